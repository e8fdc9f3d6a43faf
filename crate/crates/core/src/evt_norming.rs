//! Norming constants u_n(x) = a_n x + b_n and the limiting tail measure ν.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenery::{normal_tail_inv, SceneryFamily};

/// Max-domain of attraction and its tail measure ν(x, ∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailMeasure {
    /// ν(x,∞) = x^{−β} on E = (0, ∞].
    Frechet { beta: f64 },
    /// ν(x,∞) = (−x)^δ on E = (−∞, 0].
    Weibull { delta: f64 },
    /// ν(x,∞) = e^{−x} on E = (−∞, ∞].
    Gumbel,
}

impl TailMeasure {
    pub fn for_family(family: &SceneryFamily) -> Self {
        match family {
            SceneryFamily::IidFrechet { beta } | SceneryFamily::MovingMax { beta, .. } => {
                TailMeasure::Frechet { beta: *beta }
            }
            SceneryFamily::IidNegPow { delta } => TailMeasure::Weibull { delta: *delta },
            SceneryFamily::IidExponential | SceneryFamily::GaussianMa { .. } => TailMeasure::Gumbel,
        }
    }

    pub fn domain(&self) -> &'static str {
        match self {
            TailMeasure::Frechet { .. } => "(0, inf]",
            TailMeasure::Weibull { .. } => "(-inf, 0]",
            TailMeasure::Gumbel => "(-inf, inf]",
        }
    }

    pub fn in_domain(&self, x: f64) -> bool {
        match self {
            TailMeasure::Frechet { .. } => x > 0.0,
            TailMeasure::Weibull { .. } => x <= 0.0,
            TailMeasure::Gumbel => !x.is_nan() && x != f64::NEG_INFINITY,
        }
    }

    /// ν(x, ∞).
    pub fn tail(&self, x: f64) -> Result<f64> {
        if !self.in_domain(x) {
            return Err(Error::OutsideDomain { x, domain: self.domain() });
        }
        Ok(match self {
            TailMeasure::Frechet { beta } => x.powf(-beta),
            TailMeasure::Weibull { delta } => (-x).powf(*delta),
            TailMeasure::Gumbel => (-x).exp(),
        })
    }

    /// ν((lo, hi]); `hi = None` is +∞.
    pub fn interval(&self, lo: f64, hi: Option<f64>) -> Result<f64> {
        let upper = match hi {
            None => 0.0,
            Some(h) if h < lo => {
                return Err(Error::InvalidParameter(format!("empty interval ({lo}, {h}]")))
            }
            Some(h) => self.tail(h)?,
        };
        Ok(self.tail(lo)? - upper)
    }
}

/// ν(x, ∞) for `measure`.
pub fn nu_tail(measure: &TailMeasure, x: f64) -> Result<f64> {
    measure.tail(x)
}

/// Affine level map for horizon `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norming {
    pub a_n: f64,
    pub b_n: f64,
    pub n: u64,
    pub measure: TailMeasure,
}

impl Norming {
    /// u_n(x) = a_n x + b_n.
    pub fn level(&self, x: f64) -> f64 {
        self.a_n * x + self.b_n
    }

    /// (ξ − b_n) / a_n.
    pub fn normalize(&self, value: f64) -> f64 {
        (value - self.b_n) / self.a_n
    }
}

/// Norming pair for `family` at horizon `n ≥ 2`.
///
/// Gaussian sceneries use the exact-quantile pair b_n = Φ̄^{-1}(1/n),
/// a_n = 1/(n φ(b_n)); moving maxima fold the window into a_n so the same ν
/// applies as for the base Fréchet law.
pub fn norming(family: &SceneryFamily, n: u64) -> Result<Norming> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("norming needs n ≥ 2, got {n}")));
    }
    family.validate()?;
    let nf = n as f64;
    let measure = TailMeasure::for_family(family);
    let (a_n, b_n) = match family {
        SceneryFamily::IidFrechet { beta } => (nf.powf(1.0 / beta), 0.0),
        SceneryFamily::MovingMax { window, beta } => ((*window as f64 * nf).powf(1.0 / beta), 0.0),
        SceneryFamily::IidExponential => (1.0, nf.ln()),
        SceneryFamily::IidNegPow { delta } => (nf.powf(-1.0 / delta), 0.0),
        SceneryFamily::GaussianMa { .. } => {
            let b = normal_tail_inv(1.0 / nf);
            let pdf = (-0.5 * b * b).exp() / (2.0 * std::f64::consts::PI).sqrt();
            (1.0 / (nf * pdf), b)
        }
    };
    Ok(Norming { a_n, b_n, n, measure })
}

/// n · P(ξ > u_n(x)), the finite-n counterpart of ν(x, ∞).
pub fn verify_tail_convergence(family: &SceneryFamily, n: u64, x: f64) -> Result<f64> {
    let nm = norming(family, n)?;
    Ok(n as f64 * family.marginal_tail(nm.level(x)))
}

/// The classical Gaussian pair a_n = (2 log n)^{-1/2},
/// b_n = (2 log n)^{1/2} − (log log n + log 4π)/2 · (2 log n)^{-1/2}.
/// Kept for comparison; its error at n = 10^6 is ≈ 0.35 at x = −1.
pub fn classical_gaussian_norming(n: u64) -> (f64, f64) {
    let l = (n as f64).ln();
    let a = (2.0 * l).powf(-0.5);
    let b = (2.0 * l).sqrt() - 0.5 * (l.ln() + (4.0 * std::f64::consts::PI).ln()) * a;
    (a, b)
}
