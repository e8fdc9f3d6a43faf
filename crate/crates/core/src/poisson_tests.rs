//! Replicated experiments on Φ_n and the statistical checks run on them:
//! mean counts and void probabilities per box, dispersion, the max limit,
//! disjoint-box correlation, time uniformity and mark/time independence.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::diagnostics::{block_length, default_sequences, BlockExceedances};
use crate::error::{Error, Result};
use crate::evt_norming::{norming, TailMeasure};
use crate::exceedance::{count_in_box, pattern_with, path_max, scaled_horizon, ExceedanceBox};
use crate::scenery::{SceneryFamily, ScenerySpec};
use crate::simkit::{aggregate, scenery_key, try_map_replications, walk_key, Execution, McEstimate, RngKey, DEFAULT_CI};
use crate::stable_walk::{generate_walk_with, StepLaw};

/// Fewest replications for which a verdict is reported.
pub const MIN_VERDICT_REPS: u64 = 100;

/// The shipped box suite: (0,1]×(1,∞], (0,½]×(1,∞], (½,1]×(1,∞], (0,1]×(1,2],
/// (0.2,0.7]×(2,∞].
pub fn default_boxes() -> Vec<ExceedanceBox> {
    use crate::exceedance::ValueInterval as V;
    vec![
        ExceedanceBox { t: (0.0, 1.0), values: vec![V(1.0, None)] },
        ExceedanceBox { t: (0.0, 0.5), values: vec![V(1.0, None)] },
        ExceedanceBox { t: (0.5, 1.0), values: vec![V(1.0, None)] },
        ExceedanceBox { t: (0.0, 1.0), values: vec![V(1.0, Some(2.0))] },
        ExceedanceBox { t: (0.2, 0.7), values: vec![V(2.0, None)] },
    ]
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub law: StepLaw,
    pub scenery: SceneryFamily,
    pub n: u64,
    pub reps: u64,
    pub boxes: Vec<ExceedanceBox>,
    /// Levels x for the max limit and extremal-index records.
    pub levels: Vec<f64>,
    pub q_hat: McEstimate,
    pub master_seed: u64,
    pub negative_control: bool,
}

impl ExperimentConfig {
    pub fn measure(&self) -> TailMeasure {
        TailMeasure::for_family(&self.scenery)
    }

    pub fn m_n(&self) -> u64 {
        scaled_horizon(self.q_hat.mean, self.n)
    }

    pub fn master_key(&self) -> RngKey {
        RngKey::new(self.master_seed, 0, 0)
    }

    /// Everything except the replication floor, which only verdicts need.
    pub fn validate(&self) -> Result<()> {
        self.scenery.validate()?;
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n must be ≥ 2, got {}", self.n)));
        }
        if !(self.q_hat.mean > 0.0 && self.q_hat.mean <= 1.0) {
            return Err(Error::InvalidParameter(format!("q_hat must lie in (0,1], got {}", self.q_hat.mean)));
        }
        let m_n = self.m_n();
        if m_n < 2 {
            return Err(Error::ScalingTooSmall { m_n });
        }
        if matches!(self.scenery, SceneryFamily::MovingMax { .. }) && !self.negative_control {
            return Err(Error::InvalidParameter(
                "moving-max sceneries violate D' and are only accepted as negative controls".into(),
            ));
        }
        let measure = self.measure();
        for (i, b) in self.boxes.iter().enumerate() {
            b.validate()?;
            let mass = b.intensity(&measure)?;
            if !(mass > 0.0 && mass.is_finite()) {
                return Err(Error::InvalidParameter(format!("box {i} has intensity {mass}, need finite and positive")));
            }
        }
        for &x in &self.levels {
            measure.tail(x)?;
        }
        Ok(())
    }

    pub fn require_verdict_reps(&self) -> Result<()> {
        if self.reps < MIN_VERDICT_REPS {
            return Err(Error::InsufficientReplications {
                needed: MIN_VERDICT_REPS,
                got: self.reps,
            });
        }
        Ok(())
    }
}

/// Records for one level x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub x: f64,
    /// max ξ over visited sites ≤ u_{m_n}(x); equals the void of (0,1]×(x,∞].
    pub max_below_scaled: bool,
    /// max ξ over visited sites ≤ u_n(x), normed at the walk horizon.
    pub max_below_horizon: bool,
    /// Exceedances of ξ(S_i) over u_n(x) and the time blocks holding them.
    pub exceedances: BlockExceedances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: u64,
    pub range: u64,
    pub box_counts: Vec<u64>,
    pub box_voids: Vec<bool>,
    pub levels: Vec<LevelRecord>,
    /// Time coordinates of points whose mark lies in the first box's value set.
    pub first_box_times: Vec<f64>,
    /// (τ_k/n, mark) for k = 1 and k = ⌊R_n/2⌋.
    pub visit_marks: Vec<(f64, f64)>,
}

pub fn run_replication(config: &ExperimentConfig, rep: u64) -> Result<ReplicationRecord> {
    let master = config.master_key();
    let walk = generate_walk_with(&config.law, config.n, &walk_key(&master, rep), true)?;
    let spec = ScenerySpec::new(config.scenery.clone(), scenery_key(&master, rep))?;
    let scaled = norming(&config.scenery, config.m_n())?;
    let horizon = norming(&config.scenery, config.n)?;
    let pattern = pattern_with(&walk, &spec, &scaled);

    let box_counts: Vec<u64> = config.boxes.iter().map(|b| count_in_box(&pattern, b)).collect();
    let box_voids = box_counts.iter().map(|&c| c == 0).collect();

    let m = path_max(&walk, &spec);
    let positions = walk.positions.as_deref().unwrap_or_default();
    let values: Vec<f64> = positions.iter().map(|&s| spec.value(s)).collect();
    let r = block_length(config.n, default_sequences(config.n).0) as usize;
    let levels = config
        .levels
        .iter()
        .map(|&x| {
            let u = horizon.level(x);
            let mut ex = BlockExceedances::default();
            for chunk in values.chunks(r) {
                let c = chunk.iter().filter(|&&v| v > u).count() as u64;
                ex.total += c;
                ex.blocks += u64::from(c > 0);
            }
            LevelRecord {
                x,
                max_below_scaled: m <= scaled.level(x),
                max_below_horizon: m <= u,
                exceedances: ex,
            }
        })
        .collect();

    let first_box_times = match config.boxes.first() {
        Some(b) => pattern
            .points
            .iter()
            .filter(|p| b.values.iter().any(|iv| iv.contains(p.v)))
            .map(|p| p.t)
            .collect(),
        None => Vec::new(),
    };
    let range = walk.final_range();
    let mid = (range / 2).max(1) as usize;
    let visit_marks = [1usize, mid]
        .iter()
        .map(|&k| (pattern.points[k - 1].t, pattern.points[k - 1].v))
        .collect();

    Ok(ReplicationRecord {
        replication: rep,
        range,
        box_counts,
        box_voids,
        levels,
        first_box_times,
        visit_marks,
    })
}

/// All replications, in index order, bit-identical for any scheduling.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ReplicationRecord>> {
    config.validate()?;
    try_map_replications(config.reps, exec, |r| run_replication(config, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub name: String,
    pub statistic: f64,
    pub target: f64,
    pub tolerance: f64,
    pub stderr: f64,
    pub pass: bool,
}

impl TestVerdict {
    pub fn new(name: impl Into<String>, statistic: f64, target: f64, tolerance: f64, stderr: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            target,
            tolerance,
            stderr,
            pass: (statistic - target).abs() <= tolerance,
        }
    }
}

fn need(records: &[ReplicationRecord]) -> Result<()> {
    let got = records.len() as u64;
    if got < MIN_VERDICT_REPS {
        return Err(Error::InsufficientReplications {
            needed: MIN_VERDICT_REPS,
            got,
        });
    }
    Ok(())
}

fn counts(records: &[ReplicationRecord], b: usize) -> Vec<f64> {
    records.iter().map(|r| r.box_counts[b] as f64).collect()
}

/// Mean count in box `b` against `expected`; the realized intensity scales
/// with q/q̂, so q̂'s error enters the tolerance.
pub fn mean_count_test(records: &[ReplicationRecord], b: usize, expected: f64, q_hat: &McEstimate) -> Result<TestVerdict> {
    need(records)?;
    let est = aggregate(&counts(records, b), DEFAULT_CI)?;
    let q_term = expected * q_hat.stderr / q_hat.mean;
    let tol = 3.0 * est.stderr.hypot(q_term);
    Ok(TestVerdict::new(format!("mean_count[{b}]"), est.mean, expected, tol, est.stderr))
}

/// Void frequency of box `b` against exp(−intensity).
pub fn void_probability_test(
    records: &[ReplicationRecord],
    b: usize,
    intensity: f64,
    q_hat: &McEstimate,
) -> Result<TestVerdict> {
    need(records)?;
    let v: Vec<f64> = records.iter().map(|r| f64::from(u8::from(r.box_voids[b]))).collect();
    let est = aggregate(&v, DEFAULT_CI)?;
    let target = (-intensity).exp();
    let q_term = target * intensity * q_hat.stderr / q_hat.mean;
    let tol = 3.0 * est.stderr.hypot(q_term);
    Ok(TestVerdict::new(format!("void[{b}]"), est.mean, target, tol, est.stderr))
}

/// Variance-to-mean ratio of counts in box `b`; under Poisson counts
/// (N − 1)·ratio is approximately χ²_{N−1}.
pub fn dispersion_test(records: &[ReplicationRecord], b: usize) -> Result<TestVerdict> {
    need(records)?;
    Ok(dispersion_of(&counts(records, b), &format!("dispersion[{b}]")))
}

pub fn dispersion_of(x: &[f64], name: &str) -> TestVerdict {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let ratio = if mean > 0.0 { var / mean } else { 0.0 };
    let se = (2.0 / (n - 1.0)).sqrt();
    TestVerdict::new(name, ratio, 1.0, 3.0 * se, se)
}

/// P(M ≤ u_n(x)) against exp(−q̂ ν(x,∞)).
pub fn max_limit_test(
    records: &[ReplicationRecord],
    level: usize,
    nu: f64,
    q_hat: &McEstimate,
) -> Result<TestVerdict> {
    need(records)?;
    let v: Vec<f64> = records
        .iter()
        .map(|r| f64::from(u8::from(r.levels[level].max_below_horizon)))
        .collect();
    let est = aggregate(&v, DEFAULT_CI)?;
    let target = (-q_hat.mean * nu).exp();
    let tol = 3.0 * est.stderr.hypot(nu * target * q_hat.stderr);
    let x = records[0].levels[level].x;
    Ok(TestVerdict::new(format!("max_limit[x={x}]"), est.mean, target, tol, est.stderr))
}

/// Pearson correlation of counts in two disjoint boxes, |r| ≤ 3/√N.
pub fn correlation_test(records: &[ReplicationRecord], a: usize, b: usize) -> Result<TestVerdict> {
    need(records)?;
    let x = counts(records, a);
    let y = counts(records, b);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(p, q)| (p - mx) * (q - my)).sum();
    let sxx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
    let r = sxy / (sxx * syy).sqrt();
    let se = 1.0 / n.sqrt();
    Ok(TestVerdict::new(format!("correlation[{a},{b}]"), r, 0.0, 3.0 * se, se))
}

/// Void of the union of boxes `a` and `b` against the product of voids.
pub fn void_independence_test(records: &[ReplicationRecord], a: usize, b: usize) -> Result<TestVerdict> {
    need(records)?;
    let va: Vec<f64> = records.iter().map(|r| f64::from(u8::from(r.box_voids[a]))).collect();
    let vb: Vec<f64> = records.iter().map(|r| f64::from(u8::from(r.box_voids[b]))).collect();
    let n = va.len() as f64;
    let ma = va.iter().sum::<f64>() / n;
    let mb = vb.iter().sum::<f64>() / n;
    let joint = va.iter().zip(&vb).map(|(p, q)| p * q).sum::<f64>() / n;
    let psi: Vec<f64> = va.iter().zip(&vb).map(|(p, q)| p * q - mb * p - ma * q).collect();
    let se = aggregate(&psi, DEFAULT_CI)?.stderr;
    Ok(TestVerdict::new(format!("void_product[{a},{b}]"), joint - ma * mb, 0.0, 3.0 * se, se))
}

/// Kolmogorov–Smirnov distance of pooled time coordinates from U(0,1], at
/// the 99% critical value 1.63/√N.
pub fn time_uniformity_test(records: &[ReplicationRecord]) -> Result<TestVerdict> {
    need(records)?;
    let mut t: Vec<f64> = records.iter().flat_map(|r| r.first_box_times.iter().copied()).collect();
    if t.is_empty() {
        return Err(Error::LevelTooHigh);
    }
    t.sort_by(f64::total_cmp);
    let d = ks_uniform(&t);
    let n = t.len() as f64;
    Ok(TestVerdict::new("time_uniformity", d, 0.0, 1.63 / n.sqrt(), 1.0 / n.sqrt()))
}

/// sup |F_N − F| against U(0,1) for sorted `t`.
pub fn ks_uniform(t: &[f64]) -> f64 {
    let n = t.len() as f64;
    t.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i + 1) as f64 / n - x)
        })
        .fold(0.0, f64::max)
}

/// Pearson χ² independence statistic on a quantile grid. Empty rows and
/// columns are dropped; returns (statistic, degrees of freedom).
pub fn chi_square_independence(pairs: &[(f64, f64)], bins: usize) -> (f64, usize) {
    let cuts = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (1..bins).map(|i| v[(i * v.len() / bins).min(v.len() - 1)]).collect::<Vec<f64>>()
    };
    let ct = cuts(pairs.iter().map(|p| p.0).collect());
    let cv = cuts(pairs.iter().map(|p| p.1).collect());
    let bin = |c: &[f64], x: f64| c.iter().filter(|&&q| x > q).count();
    let mut table = vec![vec![0f64; bins]; bins];
    for &(t, v) in pairs {
        table[bin(&ct, t)][bin(&cv, v)] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..bins).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let live_r: Vec<usize> = (0..bins).filter(|&i| rows[i] > 0.0).collect();
    let live_c: Vec<usize> = (0..bins).filter(|&j| cols[j] > 0.0).collect();
    let total = pairs.len() as f64;
    let mut stat = 0.0;
    for &i in &live_r {
        for &j in &live_c {
            let e = rows[i] * cols[j] / total;
            stat += (table[i][j] - e).powi(2) / e;
        }
    }
    let df = live_r.len().saturating_sub(1) * live_c.len().saturating_sub(1);
    (stat, df)
}

/// Independence of (τ_k/n, mark) over replications on a 4×4 grid at 99%.
/// `which` indexes `visit_marks` (0: k = 1, 1: k = ⌊R_n/2⌋).
pub fn independence_test(records: &[ReplicationRecord], which: usize) -> Result<TestVerdict> {
    need(records)?;
    let pairs: Vec<(f64, f64)> = records.iter().map(|r| r.visit_marks[which]).collect();
    let (stat, df) = chi_square_independence(&pairs, 4);
    let crit = if df == 0 {
        0.0
    } else {
        ChiSquared::new(df as f64)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .inverse_cdf(0.99)
    };
    let label = if which == 0 { "k=1" } else { "k=R/2" };
    Ok(TestVerdict::new(format!("independence[{label}]"), stat, 0.0, crit, (2.0 * df as f64).sqrt()))
}

/// The full verdict suite for a configuration.
pub fn standard_verdicts(config: &ExperimentConfig, records: &[ReplicationRecord]) -> Result<Vec<TestVerdict>> {
    need(records)?;
    let measure = config.measure();
    let q = &config.q_hat;
    let mut out = Vec::new();
    for (i, b) in config.boxes.iter().enumerate() {
        let mu = b.intensity(&measure)?;
        out.push(mean_count_test(records, i, mu, q)?);
        out.push(void_probability_test(records, i, mu, q)?);
        out.push(dispersion_test(records, i)?);
    }
    for (i, &x) in config.levels.iter().enumerate() {
        out.push(max_limit_test(records, i, measure.tail(x)?, q)?);
    }
    for a in 0..config.boxes.len() {
        for b in a + 1..config.boxes.len() {
            if config.boxes[a].is_disjoint_from(&config.boxes[b]) {
                out.push(correlation_test(records, a, b)?);
            }
        }
    }
    if !config.boxes.is_empty() {
        out.push(time_uniformity_test(records)?);
    }
    out.push(independence_test(records, 0)?);
    out.push(independence_test(records, 1)?);
    Ok(out)
}

/// Names of verdicts a negative control is expected to fail.
pub fn is_power_verdict(name: &str) -> bool {
    name.starts_with("dispersion") || name.starts_with("void[")
}

pub fn write_verdicts_csv<W: Write>(out: W, verdicts: &[TestVerdict]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for v in verdicts {
        w.serialize(v)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exceedance::ValueInterval;
    use crate::simkit::KeyedStream;

    fn unit_config(reps: u64) -> ExperimentConfig {
        ExperimentConfig {
            law: StepLaw::unit(),
            scenery: SceneryFamily::IidFrechet { beta: 1.0 },
            n: 2_000,
            reps,
            boxes: default_boxes(),
            levels: vec![1.0],
            q_hat: McEstimate::exact(1.0),
            master_seed: 17,
            negative_control: false,
        }
    }

    fn poisson_counts(mean: f64, n: usize, s: &KeyedStream) -> Vec<f64> {
        (0..n as u64)
            .map(|i| {
                let mut seq = s.sequence(i);
                let (mut k, mut p, l) = (0.0, 1.0, (-mean).exp());
                loop {
                    p *= seq.next_open();
                    if p <= l {
                        return k;
                    }
                    k += 1.0;
                }
            })
            .collect()
    }

    #[test]
    fn reproducible_and_additive() {
        let c = unit_config(2);
        let a = run_experiment(&c, Execution::Sequential).unwrap();
        let b = run_experiment(&c, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert_eq!(r.box_counts[0], r.box_counts[1] + r.box_counts[2]);
            for (c, v) in r.box_counts.iter().zip(&r.box_voids) {
                assert_eq!(*c == 0, *v);
            }
            assert_eq!(r.levels[0].max_below_scaled, r.box_voids[0]);
        }
    }

    #[test]
    fn verdicts_need_100_reps() {
        let c = unit_config(2);
        let recs = run_experiment(&c, Execution::Sequential).unwrap();
        assert!(matches!(
            mean_count_test(&recs, 0, 1.0, &c.q_hat),
            Err(Error::InsufficientReplications { .. })
        ));
        assert!(c.require_verdict_reps().is_err());
    }

    #[test]
    fn box_targets() {
        let m = TailMeasure::Frechet { beta: 1.0 };
        let b = default_boxes();
        assert_eq!(b[0].intensity(&m).unwrap(), 1.0);
        assert!((b[4].intensity(&m).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dispersion_calibration() {
        let s = RngKey::new(1, 2, 3).stream();
        let x = poisson_counts(1.0, 4000, &s);
        assert!(dispersion_of(&x, "p").pass);
        let flat = vec![1.0; 200];
        let v = dispersion_of(&flat, "c");
        assert_eq!(v.statistic, 0.0);
        assert!(!v.pass);
    }

    #[test]
    fn compound_poisson_is_overdispersed() {
        let s = RngKey::new(4, 2, 3).stream();
        let x: Vec<f64> = poisson_counts(0.5, 2000, &s).iter().map(|c| 2.0 * c).collect();
        let v = dispersion_of(&x, "cp");
        assert!(v.statistic > 1.0 + v.tolerance);
    }

    #[test]
    fn chi_square_drops_degenerate_rows() {
        let pairs: Vec<(f64, f64)> = (0..100).map(|i| (0.5, i as f64)).collect();
        assert_eq!(chi_square_independence(&pairs, 4).1, 0);
        let dep: Vec<(f64, f64)> = (0..400).map(|i| (i as f64, i as f64)).collect();
        let (s, df) = chi_square_independence(&dep, 4);
        assert_eq!(df, 9);
        assert!((s - 1200.0).abs() < 1e-9);
    }

    #[test]
    fn ks_of_grid_is_small() {
        let t: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
        assert!((ks_uniform(&t) - 0.001).abs() < 1e-12);
    }

    #[test]
    fn verdict_pass_rule() {
        assert!(TestVerdict::new("a", 1.1, 1.0, 0.1 + 1e-12, 0.0).pass);
        assert!(!TestVerdict::new("a", 1.2, 1.0, 0.1, 0.0).pass);
        assert!(!TestVerdict::new("a", f64::NAN, 1.0, 0.1, 0.0).pass);
    }

    #[test]
    fn moving_max_needs_negative_control_flag() {
        let mut c = unit_config(2);
        c.scenery = SceneryFamily::MovingMax { window: 2, beta: 1.0 };
        assert!(c.validate().is_err());
        c.negative_control = true;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn infinite_intensity_box_rejected() {
        let mut c = unit_config(2);
        c.boxes.push(ExceedanceBox { t: (0.0, 1.0), values: vec![ValueInterval(0.0, None)] });
        assert!(c.validate().is_err());
    }

    #[test]
    fn unit_walk_mean_count_near_one() {
        let c = unit_config(400);
        let recs = run_experiment(&c, Execution::Parallel).unwrap();
        let v = mean_count_test(&recs, 0, 1.0, &c.q_hat).unwrap();
        assert!(v.pass, "{v:?}");
    }
}
