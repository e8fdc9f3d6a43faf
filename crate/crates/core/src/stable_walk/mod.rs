//! Integer walks in the domain of attraction of an α-stable law, α < 1.
//!
//! A walk is generated step by step from a keyed counter stream (step `i` uses
//! counter `i - 1`), so extending the horizon with the same key never changes
//! an existing prefix.

mod zipf;

use std::sync::Arc;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkit::{aggregate, walk_key, map_replications, Execution, KeyedStream, McEstimate, RngKey, DEFAULT_CI};

pub use zipf::{hurwitz_tail, riemann_zeta, ZipfMagnitude, DEFAULT_TAIL_CUTOFF};

/// Anything that can produce i.i.d. integer increments from a counter stream.
pub trait StepSampler: Sync {
    fn sample(&self, stream: &KeyedStream, counter: u64) -> i64;

    /// Exponent γ in the local limit P(S_k = 0) ≍ k^{-γ}, used to extrapolate
    /// the return mass beyond a finite horizon. `None` when the walk never
    /// returns.
    fn return_decay_exponent(&self) -> Option<f64>;
}

/// Serializable description of a step law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepFamily {
    SymmetricZipf {
        alpha: f64,
        #[serde(default = "default_cutoff")]
        tail_cutoff: u64,
    },
    DeterministicUnit,
}

fn default_cutoff() -> u64 {
    DEFAULT_TAIL_CUTOFF
}

/// Increment law of the walk. Cheap to clone; the Zipf table is shared.
#[derive(Debug, Clone)]
pub struct StepLaw {
    family: StepFamily,
    table: Option<Arc<ZipfMagnitude>>,
}

impl StepLaw {
    pub fn symmetric_zipf(alpha: f64) -> Result<Self> {
        Self::from_family(StepFamily::SymmetricZipf {
            alpha,
            tail_cutoff: DEFAULT_TAIL_CUTOFF,
        })
    }

    pub fn unit() -> Self {
        Self {
            family: StepFamily::DeterministicUnit,
            table: None,
        }
    }

    pub fn from_family(family: StepFamily) -> Result<Self> {
        match family {
            StepFamily::SymmetricZipf { alpha, tail_cutoff } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "zipf alpha must lie in (0,1), got {alpha}"
                    )));
                }
                if !(16..=u32::MAX as u64).contains(&tail_cutoff) {
                    return Err(Error::InvalidParameter(format!(
                        "tail_cutoff must lie in [16, 2^32), got {tail_cutoff}"
                    )));
                }
                Ok(Self {
                    family,
                    table: Some(Arc::new(ZipfMagnitude::new(alpha, tail_cutoff))),
                })
            }
            StepFamily::DeterministicUnit => Ok(Self::unit()),
        }
    }

    pub fn family(&self) -> &StepFamily {
        &self.family
    }

    pub fn alpha(&self) -> Option<f64> {
        self.table.as_ref().map(|t| t.alpha())
    }

    /// c_α = 1 / (2 ζ(1+α)), the mass at each of ±1.
    pub fn zipf_constant(&self) -> Option<f64> {
        self.table.as_ref().map(|t| 0.5 / t.zeta())
    }

    /// P(X = k).
    pub fn pmf(&self, k: i64) -> f64 {
        match &self.table {
            Some(t) => 0.5 * t.pmf(k.unsigned_abs()),
            None => f64::from(u8::from(k == 1)),
        }
    }

    /// P(|X| ≤ tail_cutoff); 1 for the unit law.
    pub fn table_mass(&self) -> f64 {
        self.table.as_ref().map_or(1.0, |t| t.head_mass())
    }
}

impl StepSampler for StepLaw {
    #[inline]
    fn sample(&self, stream: &KeyedStream, counter: u64) -> i64 {
        match &self.table {
            None => 1,
            Some(t) => {
                let bits = stream.bits(counter);
                let u = (bits >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0);
                let mag = t.sample(u, stream, counter).min(i64::MAX as u64) as i64;
                if bits & 1 == 0 {
                    mag
                } else {
                    -mag
                }
            }
        }
    }

    fn return_decay_exponent(&self) -> Option<f64> {
        self.alpha().map(|a| 1.0 / a)
    }
}

/// One increment of `law` at slot `counter` of `key`.
pub fn sample_step(law: &impl StepSampler, key: &RngKey, counter: u64) -> i64 {
    law.sample(&key.stream(), counter)
}

/// Visit structure of one path S_1..S_n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub n: u64,
    /// τ_k: time of the k-th first visit.
    pub tau: Vec<u64>,
    /// S_{τ_k}, aligned with `tau`.
    pub first_visit_sites: Vec<i64>,
    /// R_1..R_n.
    pub range: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub positions: Option<Vec<i64>>,
}

impl WalkSummary {
    /// R_n.
    pub fn final_range(&self) -> u64 {
        self.tau.len() as u64
    }

    /// R_t for 0 ≤ t ≤ n, with R_0 = 0.
    pub fn range_at(&self, t: u64) -> u64 {
        if t == 0 {
            0
        } else {
            self.range[(t - 1) as usize]
        }
    }
}

pub fn generate_walk(law: &impl StepSampler, n: u64, key: &RngKey) -> Result<WalkSummary> {
    generate_walk_with(law, n, key, false)
}

/// Like [`generate_walk`]; `keep_positions` also stores S_1..S_n.
pub fn generate_walk_with(
    law: &impl StepSampler,
    n: u64,
    key: &RngKey,
    keep_positions: bool,
) -> Result<WalkSummary> {
    if n == 0 {
        return Err(Error::InvalidParameter("walk horizon must be ≥ 1".into()));
    }
    let stream = key.stream();
    let cap = n as usize;
    let mut visited = FxHashSet::with_capacity_and_hasher(cap, Default::default());
    let mut tau = Vec::new();
    let mut sites = Vec::new();
    let mut range = Vec::with_capacity(cap);
    let mut positions = keep_positions.then(|| Vec::with_capacity(cap));
    let mut pos = 0i64;
    for step in 1..=n {
        let x = law.sample(&stream, step - 1);
        pos = pos.checked_add(x).ok_or(Error::PositionOverflow { step })?;
        if visited.insert(pos) {
            tau.push(step);
            sites.push(pos);
        }
        range.push(tau.len() as u64);
        if let Some(p) = positions.as_mut() {
            p.push(pos);
        }
    }
    Ok(WalkSummary {
        n,
        tau,
        first_visit_sites: sites,
        range,
        positions,
    })
}

/// Positions S_1..S_len only, no visit bookkeeping.
pub fn walk_positions(law: &impl StepSampler, len: u64, key: &RngKey) -> Result<Vec<i64>> {
    let stream = key.stream();
    let mut pos = 0i64;
    let mut out = Vec::with_capacity(len as usize);
    for step in 1..=len {
        pos = pos
            .checked_add(law.sample(&stream, step - 1))
            .ok_or(Error::PositionOverflow { step })?;
        out.push(pos);
    }
    Ok(out)
}

/// Returns to the origin along one path up to `horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ReturnProfile {
    returned: bool,
    returns: u64,
    late_returns: u64,
}

fn return_profile(law: &impl StepSampler, horizon: u64, key: &RngKey) -> Result<ReturnProfile> {
    let stream = key.stream();
    let late_from = horizon / 2 + 1;
    let mut pos = 0i64;
    let mut prof = ReturnProfile {
        returned: false,
        returns: 0,
        late_returns: 0,
    };
    for step in 1..=horizon {
        pos = pos
            .checked_add(law.sample(&stream, step - 1))
            .ok_or(Error::PositionOverflow { step })?;
        if pos == 0 {
            prof.returned = true;
            prof.returns += 1;
            if step >= late_from {
                prof.late_returns += 1;
            }
        }
    }
    Ok(prof)
}

/// Horizon-truncated escape probability with its truncation-bias bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeEstimate {
    /// Fraction of paths with S_k ≠ 0 for all k ≤ horizon.
    pub q_hat: f64,
    /// Monte Carlo standard error of `q_hat`.
    pub mc_stderr: f64,
    /// Estimated Σ_{k > horizon} P(S_k = 0), which bounds q_hat − q.
    pub bias_bound: f64,
    /// Σ_{k ≤ horizon} P(S_k = 0).
    pub return_mass: McEstimate,
    pub horizon: u64,
    pub replications: u64,
}

impl EscapeEstimate {
    /// q̂ with the bias bound folded into its stderr.
    pub fn as_estimate(&self) -> McEstimate {
        McEstimate {
            mean: self.q_hat,
            stderr: self.mc_stderr + self.bias_bound,
            replications: self.replications,
            ci_level: DEFAULT_CI,
        }
    }
}

/// Return-based estimate of q = P(S_k ≠ 0 ∀ k ≥ 1).
///
/// The truncation bias Σ_{k>h} P(S_k=0) is extrapolated from the return mass
/// observed in (h/2, h] assuming P(S_k = 0) ∝ k^{-γ}: the tail equals that
/// mass times 1/(2^{γ-1} − 1). For γ ≤ 1 (recurrent) the bound is infinite.
pub fn escape_probability(
    law: &impl StepSampler,
    horizon: u64,
    reps: u64,
    key: &RngKey,
    exec: Execution,
) -> Result<EscapeEstimate> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be ≥ 1".into()));
    }
    if reps < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: reps });
    }
    let profiles = map_replications(reps, exec, |r| {
        return_profile(law, horizon, &walk_key(key, r))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let escaped: Vec<f64> = profiles.iter().map(|p| f64::from(u8::from(!p.returned))).collect();
    let mass: Vec<f64> = profiles.iter().map(|p| p.returns as f64).collect();
    let late: Vec<f64> = profiles.iter().map(|p| p.late_returns as f64).collect();
    let q = aggregate(&escaped, DEFAULT_CI)?;
    let mass = aggregate(&mass, DEFAULT_CI)?;
    let late = aggregate(&late, DEFAULT_CI)?;
    let bias_bound = match law.return_decay_exponent() {
        _ if late.mean == 0.0 => 0.0,
        Some(g) if g > 1.0 => (late.mean + 3.0 * late.stderr) / (2f64.powf(g - 1.0) - 1.0),
        _ => f64::INFINITY,
    };
    Ok(EscapeEstimate {
        q_hat: q.mean,
        mc_stderr: q.stderr,
        bias_bound,
        return_mass: mass,
        horizon,
        replications: reps,
    })
}

/// q̂ as an [`McEstimate`] whose stderr includes the truncation-bias bound.
pub fn estimate_escape_probability(
    law: &impl StepSampler,
    horizon: u64,
    reps: u64,
    key: &RngKey,
) -> Result<McEstimate> {
    Ok(escape_probability(law, horizon, reps, key, Execution::default())?.as_estimate())
}

/// Monte Carlo estimate of Σ_{k=1}^{horizon} P(S_k = 0).
pub fn estimate_return_mass(
    law: &impl StepSampler,
    horizon: u64,
    reps: u64,
    key: &RngKey,
) -> Result<McEstimate> {
    return_mass(law, horizon, reps, key, Execution::default())
}

pub fn return_mass(
    law: &impl StepSampler,
    horizon: u64,
    reps: u64,
    key: &RngKey,
    exec: Execution,
) -> Result<McEstimate> {
    if reps < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: reps });
    }
    let counts = map_replications(reps, exec, |r| {
        return_profile(law, horizon, &walk_key(key, r)).map(|p| p.returns as f64)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    aggregate(&counts, DEFAULT_CI)
}

/// Mean of R_n / n over replications (range-slope estimate of q).
pub fn range_slope(
    law: &impl StepSampler,
    n: u64,
    reps: u64,
    key: &RngKey,
    exec: Execution,
) -> Result<McEstimate> {
    if reps < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: reps });
    }
    let ratios = map_replications(reps, exec, |r| {
        range_only(law, n, &walk_key(key, r)).map(|rn| rn as f64 / n as f64)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    aggregate(&ratios, DEFAULT_CI)
}

fn range_only(law: &impl StepSampler, n: u64, key: &RngKey) -> Result<u64> {
    let stream = key.stream();
    let mut visited = FxHashSet::with_capacity_and_hasher(n as usize, Default::default());
    let mut pos = 0i64;
    for step in 1..=n {
        pos = pos
            .checked_add(law.sample(&stream, step - 1))
            .ok_or(Error::PositionOverflow { step })?;
        visited.insert(pos);
    }
    Ok(visited.len() as u64)
}

/// Both q estimators side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QReport {
    pub return_based: EscapeEstimate,
    pub range_slope: McEstimate,
    pub range_horizon: u64,
}

impl QReport {
    pub fn difference(&self) -> f64 {
        self.return_based.q_hat - self.range_slope.mean
    }

    /// Joint 3σ band plus the truncation bias of the return-based estimate.
    pub fn agreement_tolerance(&self) -> f64 {
        3.0 * self
            .return_based
            .mc_stderr
            .hypot(self.range_slope.stderr)
            + self.return_based.bias_bound
    }

    pub fn agree(&self) -> bool {
        self.difference().abs() <= self.agreement_tolerance()
    }
}

pub struct QPlan {
    pub horizon: u64,
    pub reps: u64,
    pub range_n: u64,
    pub range_reps: u64,
}

pub fn q_report(law: &impl StepSampler, plan: &QPlan, key: &RngKey, exec: Execution) -> Result<QReport> {
    let return_based = escape_probability(law, plan.horizon, plan.reps, &key.child(0, 0), exec)?;
    let slope = range_slope(law, plan.range_n, plan.range_reps, &key.child(1, 0), exec)?;
    Ok(QReport {
        return_based,
        range_slope: slope,
        range_horizon: plan.range_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_walk_five_steps() {
        let w = generate_walk(&StepLaw::unit(), 5, &RngKey::new(1, 0, 0)).unwrap();
        assert_eq!(w.tau, vec![1, 2, 3, 4, 5]);
        assert_eq!(w.first_visit_sites, vec![1, 2, 3, 4, 5]);
        assert_eq!(w.range, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn single_step_walk() {
        let law = StepLaw::symmetric_zipf(0.6).unwrap();
        for seed in 0..20 {
            let w = generate_walk(&law, 1, &RngKey::new(seed, 0, 0)).unwrap();
            assert_eq!(w.tau, vec![1]);
            assert_eq!(w.range, vec![1]);
        }
    }

    #[test]
    fn zero_horizon_rejected() {
        assert!(generate_walk(&StepLaw::unit(), 0, &RngKey::new(1, 0, 0)).is_err());
    }

    #[test]
    fn rejects_alpha_outside_unit_interval() {
        assert!(StepLaw::symmetric_zipf(1.0).is_err());
        assert!(StepLaw::symmetric_zipf(0.0).is_err());
        assert!(StepLaw::symmetric_zipf(f64::NAN).is_err());
    }

    #[test]
    fn unit_law_never_returns() {
        let key = RngKey::new(3, 0, 0);
        let e = escape_probability(&StepLaw::unit(), 100, 10, &key, Execution::Sequential).unwrap();
        assert_eq!(e.q_hat, 1.0);
        assert_eq!(e.bias_bound, 0.0);
        assert_eq!(e.return_mass.mean, 0.0);
    }

    struct Overflowing;
    impl StepSampler for Overflowing {
        fn sample(&self, _: &KeyedStream, _: u64) -> i64 {
            i64::MAX / 2 + 1
        }
        fn return_decay_exponent(&self) -> Option<f64> {
            None
        }
    }

    #[test]
    fn position_overflow_is_reported() {
        let err = generate_walk(&Overflowing, 5, &RngKey::new(0, 0, 0)).unwrap_err();
        assert_eq!(err, Error::PositionOverflow { step: 2 });
        assert!(err.to_string().contains("position overflow"));
    }
}
