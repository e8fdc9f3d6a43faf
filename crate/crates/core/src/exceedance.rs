//! Point process of exceedances Φ_n built from first visits of a walk.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt_norming::{norming, Norming, TailMeasure};
use crate::scenery::ScenerySpec;
use crate::stable_walk::WalkSummary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub v: f64,
}

/// Φ_n: one point (τ_k/n, (ξ(S_{τ_k}) − b_{m_n})/a_{m_n}) per first visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    pub n: u64,
    pub m_n: u64,
    pub points: Vec<Point>,
}

/// m_n = ⌊q̂ n⌋.
pub fn scaled_horizon(q_hat: f64, n: u64) -> u64 {
    (q_hat * n as f64).floor() as u64
}

pub fn build_pattern(walk: &WalkSummary, spec: &ScenerySpec, q_hat: f64, n: u64) -> Result<PointPattern> {
    if !(q_hat > 0.0 && q_hat <= 1.0) {
        return Err(Error::InvalidParameter(format!("q_hat must lie in (0,1], got {q_hat}")));
    }
    if walk.n != n {
        return Err(Error::InvalidParameter(format!(
            "walk horizon {} does not match n = {n}",
            walk.n
        )));
    }
    let m_n = scaled_horizon(q_hat, n);
    if m_n < 2 {
        return Err(Error::ScalingTooSmall { m_n });
    }
    let nm = norming(spec.family(), m_n)?;
    Ok(pattern_with(walk, spec, &nm))
}

pub(crate) fn pattern_with(walk: &WalkSummary, spec: &ScenerySpec, nm: &Norming) -> PointPattern {
    let nf = walk.n as f64;
    let points = walk
        .tau
        .iter()
        .zip(&walk.first_visit_sites)
        .map(|(&t, &s)| Point {
            t: t as f64 / nf,
            v: nm.normalize(spec.value(s)),
        })
        .collect();
    PointPattern {
        n: walk.n,
        m_n: nm.n,
        points,
    }
}

/// Value interval (lo, hi]; `hi = None` is +∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueInterval(pub f64, pub Option<f64>);

impl ValueInterval {
    pub fn contains(&self, v: f64) -> bool {
        v > self.0 && self.1.is_none_or(|h| v <= h)
    }
}

/// I = (a, b] × A with A a finite union of disjoint value intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceBox {
    pub t: (f64, f64),
    pub values: Vec<ValueInterval>,
}

impl ExceedanceBox {
    pub fn new(t: (f64, f64), values: Vec<ValueInterval>) -> Result<Self> {
        let b = Self { t, values };
        b.validate()?;
        Ok(b)
    }

    /// (0, 1] × (x, ∞].
    pub fn above(x: f64) -> Self {
        Self {
            t: (0.0, 1.0),
            values: vec![ValueInterval(x, None)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.t;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::InvalidParameter(format!("time interval ({a}, {b}] not inside [0,1]")));
        }
        let mut iv: Vec<ValueInterval> = self.values.clone();
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in iv.windows(2) {
            let upper = w[0].1.unwrap_or(f64::INFINITY);
            if upper > w[1].0 {
                return Err(Error::InvalidParameter("value intervals overlap".into()));
            }
        }
        for v in &iv {
            if v.1.is_some_and(|h| h <= v.0) {
                return Err(Error::InvalidParameter(format!("empty value interval ({}, {:?}]", v.0, v.1)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.t > self.t.0 && p.t <= self.t.1 && self.values.iter().any(|iv| iv.contains(p.v))
    }

    /// ν(A).
    pub fn value_mass(&self, measure: &TailMeasure) -> Result<f64> {
        self.values.iter().map(|iv| measure.interval(iv.0, iv.1)).sum()
    }

    /// (b − a) · ν(A).
    pub fn intensity(&self, measure: &TailMeasure) -> Result<f64> {
        Ok((self.t.1 - self.t.0) * self.value_mass(measure)?)
    }

    pub fn is_disjoint_from(&self, other: &ExceedanceBox) -> bool {
        let t_disjoint = self.t.1 <= other.t.0 || other.t.1 <= self.t.0;
        let v_disjoint = self.values.iter().all(|a| {
            other.values.iter().all(|b| {
                a.1.unwrap_or(f64::INFINITY) <= b.0 || b.1.unwrap_or(f64::INFINITY) <= a.0
            })
        });
        t_disjoint || v_disjoint
    }
}

pub fn count_in_box(pattern: &PointPattern, bx: &ExceedanceBox) -> u64 {
    pattern.points.iter().filter(|p| bx.contains(p)).count() as u64
}

/// max over visited sites of ξ.
pub fn path_max(walk: &WalkSummary, spec: &ScenerySpec) -> f64 {
    walk.first_visit_sites
        .iter()
        .map(|&s| spec.value(s))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// One serialized replication of Φ_n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternRecord {
    pub replication: u64,
    pub seed: u64,
    pub n: u64,
    pub m_n: u64,
    pub points: Vec<(f64, f64)>,
}

impl PatternRecord {
    pub fn new(replication: u64, seed: u64, pattern: &PointPattern) -> Self {
        Self {
            replication,
            seed,
            n: pattern.n,
            m_n: pattern.m_n,
            points: pattern.points.iter().map(|p| (p.t, p.v)).collect(),
        }
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, rows: &[T]) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenery::SceneryFamily;
    use crate::simkit::RngKey;
    use crate::stable_walk::{generate_walk, StepLaw};

    fn unit_walk(n: u64) -> WalkSummary {
        generate_walk(&StepLaw::unit(), n, &RngKey::new(0, 0, 0)).unwrap()
    }

    #[test]
    fn unit_walk_reduces_to_iid_exceedances() {
        let spec = ScenerySpec::new(SceneryFamily::IidExponential, RngKey::new(5, 0, 2)).unwrap();
        let p = build_pattern(&unit_walk(4), &spec, 1.0, 4).unwrap();
        assert_eq!(p.m_n, 4);
        for (k, pt) in p.points.iter().enumerate() {
            let site = k as i64 + 1;
            assert_eq!(pt.t, (k + 1) as f64 / 4.0);
            assert_eq!(pt.v, spec.value(site) - 4f64.ln());
        }
    }

    #[test]
    fn scaling_too_small() {
        let spec = ScenerySpec::new(SceneryFamily::IidExponential, RngKey::new(5, 0, 2)).unwrap();
        let err = build_pattern(&unit_walk(4), &spec, 0.3, 4).unwrap_err();
        assert_eq!(err, Error::ScalingTooSmall { m_n: 1 });
    }

    #[test]
    fn empty_and_single_point_counts() {
        let empty = PointPattern { n: 1, m_n: 1, points: vec![] };
        assert_eq!(count_in_box(&empty, &ExceedanceBox::above(1.0)), 0);
        let one = PointPattern {
            n: 2,
            m_n: 2,
            points: vec![Point { t: 0.5, v: 3.0 }],
        };
        assert_eq!(count_in_box(&one, &ExceedanceBox::above(1.0)), 1);
    }

    #[test]
    fn path_max_over_unit_walk() {
        let spec = ScenerySpec::new(SceneryFamily::IidFrechet { beta: 1.0 }, RngKey::new(9, 0, 2)).unwrap();
        let m = path_max(&unit_walk(3), &spec);
        assert_eq!(m, spec.value(1).max(spec.value(2)).max(spec.value(3)));
        assert_eq!(path_max(&unit_walk(1), &spec), spec.value(1));
    }

    #[test]
    fn box_validation_and_intensity() {
        assert!(ExceedanceBox::new((0.5, 0.5), vec![ValueInterval(1.0, None)]).is_err());
        assert!(ExceedanceBox::new((0.0, 1.0), vec![ValueInterval(1.0, None), ValueInterval(2.0, Some(3.0))]).is_err());
        let b = ExceedanceBox::new((0.2, 0.7), vec![ValueInterval(2.0, None)]).unwrap();
        let i = b.intensity(&TailMeasure::Frechet { beta: 1.0 }).unwrap();
        assert!((i - 0.25).abs() < 1e-15);
    }

    #[test]
    fn disjointness() {
        let a = ExceedanceBox::new((0.0, 0.5), vec![ValueInterval(1.0, None)]).unwrap();
        let b = ExceedanceBox::new((0.5, 1.0), vec![ValueInterval(1.0, None)]).unwrap();
        let c = ExceedanceBox::new((0.0, 1.0), vec![ValueInterval(1.0, Some(2.0))]).unwrap();
        let d = ExceedanceBox::new((0.2, 0.7), vec![ValueInterval(2.0, None)]).unwrap();
        assert!(a.is_disjoint_from(&b));
        assert!(c.is_disjoint_from(&d));
        assert!(!a.is_disjoint_from(&c));
    }
}
