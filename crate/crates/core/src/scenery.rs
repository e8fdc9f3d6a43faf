//! Stationary sceneries ξ(s), s ∈ ℤ, evaluated lazily per site.
//!
//! Each site carries one innovation drawn from counter `site` of the
//! scenery's innovation stream. Finite-window families (moving maxima,
//! truncated moving averages) read the innovations at s, s+1, …, so every
//! family is stationary under site shifts.

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::simkit::{role, KeyedStream, RngKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneryFamily {
    IidFrechet {
        beta: f64,
    },
    IidExponential,
    /// ξ = −U^{1/δ}: P(ξ > x) = (−x)^δ on [−1, 0].
    IidNegPow {
        delta: f64,
    },
    /// ξ(s) = max(η_s, …, η_{s+m−1}) with i.i.d. Fréchet(β) η.
    MovingMax {
        window: usize,
        #[serde(default = "one")]
        beta: f64,
    },
    /// ξ(s) = Σ_j w_j Z_{s+j}, weights rescaled to unit ℓ2 norm.
    GaussianMa {
        weights: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl SceneryFamily {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            SceneryFamily::IidFrechet { beta } if !(*beta > 0.0 && beta.is_finite()) => {
                bad(format!("frechet beta must be positive, got {beta}"))
            }
            SceneryFamily::IidNegPow { delta } if !(*delta > 0.0 && delta.is_finite()) => {
                bad(format!("negpow delta must be positive, got {delta}"))
            }
            SceneryFamily::MovingMax { window, beta } => {
                if *window < 2 {
                    bad(format!("moving max window must be ≥ 2, got {window}"))
                } else if !(*beta > 0.0 && beta.is_finite()) {
                    bad(format!("moving max beta must be positive, got {beta}"))
                } else {
                    Ok(())
                }
            }
            SceneryFamily::GaussianMa { weights } => {
                let norm: f64 = weights.iter().map(|w| w * w).sum();
                if weights.is_empty() || !(norm > 0.0 && norm.is_finite()) {
                    Err(Error::UnsupportedFamily(
                        "gaussian moving average needs a non-zero finite weight vector".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Number of consecutive innovations one site reads.
    pub fn window(&self) -> usize {
        match self {
            SceneryFamily::MovingMax { window, .. } => *window,
            SceneryFamily::GaussianMa { weights } => weights.len(),
            _ => 1,
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(
            self,
            SceneryFamily::IidFrechet { .. } | SceneryFamily::IidExponential | SceneryFamily::IidNegPow { .. }
        ) || matches!(self, SceneryFamily::GaussianMa { weights } if weights.len() == 1)
    }

    /// AR(1)-like weights ρ^j truncated where ρ^j drops below `tol`.
    pub fn ar1_approximation(rho: f64, tol: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) || !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidParameter(format!("need |rho| < 1 and tol in (0,1), got {rho}, {tol}")));
        }
        let len = if rho == 0.0 {
            1
        } else {
            (tol.ln() / rho.abs().ln()).ceil() as usize + 1
        };
        Ok(SceneryFamily::GaussianMa {
            weights: (0..len).map(|j| rho.powi(j as i32)).collect(),
        })
    }

    /// Exact P(ξ > u).
    pub fn marginal_tail(&self, u: f64) -> f64 {
        match self {
            SceneryFamily::IidFrechet { beta } => frechet_tail(u, *beta, 1.0),
            SceneryFamily::IidExponential => {
                if u <= 0.0 {
                    1.0
                } else {
                    (-u).exp()
                }
            }
            SceneryFamily::IidNegPow { delta } => {
                if u >= 0.0 {
                    0.0
                } else if u <= -1.0 {
                    1.0
                } else {
                    (-u).powf(*delta)
                }
            }
            SceneryFamily::MovingMax { window, beta } => frechet_tail(u, *beta, *window as f64),
            SceneryFamily::GaussianMa { .. } => normal_tail(u),
        }
    }

    /// P(ξ(0) > u, ξ(lag) > u). Exact for every family; the Gaussian case
    /// integrates the bivariate normal numerically.
    pub fn joint_exceedance(&self, lag: u64, u: f64) -> f64 {
        if lag == 0 {
            return self.marginal_tail(u);
        }
        match self {
            SceneryFamily::MovingMax { window, beta } if (lag as usize) < *window => {
                if u <= 0.0 {
                    return 1.0;
                }
                let c = u.powf(-beta);
                let m = *window as f64;
                let x = c * m;
                let z = c * (m + lag as f64);
                // 1 − 2e^{−x} + e^{−z}, cancellation-free.
                exceed_pair(x, x, z)
            }
            SceneryFamily::GaussianMa { weights } if (lag as usize) < weights.len() => {
                let rho = ma_correlation(weights, lag as usize);
                bivariate_normal_joint_tail(u, rho)
            }
            _ => {
                let p = self.marginal_tail(u);
                p * p
            }
        }
    }

    /// Closed-form joint CDF over arbitrary site sets, when it exists:
    /// P(max_{s∈S} ξ(s) ≤ u) = exp(−rate · |⋃_{s∈S} [s, s+window)|).
    pub fn block_rate(&self, u: f64) -> Option<BlockRate> {
        match self {
            SceneryFamily::IidFrechet { .. } | SceneryFamily::IidExponential | SceneryFamily::IidNegPow { .. } => {
                let p = self.marginal_tail(u);
                Some(BlockRate {
                    rate: -(-p).ln_1p(),
                    window: 1,
                })
            }
            SceneryFamily::MovingMax { window, beta } => Some(BlockRate {
                rate: if u > 0.0 { u.powf(-beta) } else { f64::INFINITY },
                window: *window as i64,
            }),
            SceneryFamily::GaussianMa { weights } if weights.len() == 1 => {
                let p = normal_tail(u);
                Some(BlockRate {
                    rate: -(-p).ln_1p(),
                    window: 1,
                })
            }
            SceneryFamily::GaussianMa { .. } => None,
        }
    }

    fn normalized_weights(&self) -> Vec<f64> {
        match self {
            SceneryFamily::GaussianMa { weights } => {
                let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                weights.iter().map(|w| w / norm).collect()
            }
            _ => Vec::new(),
        }
    }
}

fn frechet_tail(u: f64, beta: f64, mult: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else {
        -(-mult * u.powf(-beta)).exp_m1()
    }
}

/// Standard normal upper tail.
pub fn normal_tail(u: f64) -> f64 {
    0.5 * erfc(u / std::f64::consts::SQRT_2)
}

/// Inverse of [`normal_tail`].
pub fn normal_tail_inv(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn ma_correlation(weights: &[f64], lag: usize) -> f64 {
    let norm: f64 = weights.iter().map(|w| w * w).sum();
    weights.iter().zip(&weights[lag..]).map(|(a, b)| a * b).sum::<f64>() / norm
}

/// P(X > u, Y > u) for standard bivariate normal with correlation ρ, as
/// ∫_u^∞ φ(x) Φ̄((u − ρx)/√(1−ρ²)) dx by composite Simpson.
pub fn bivariate_normal_joint_tail(u: f64, rho: f64) -> f64 {
    if rho >= 1.0 - 1e-12 {
        return normal_tail(u);
    }
    if rho <= -1.0 + 1e-12 {
        return (normal_tail(u) - normal_tail(-u)).max(0.0);
    }
    let s = (1.0 - rho * rho).sqrt();
    let f = |x: f64| normal_pdf(x) * normal_tail((u - rho * x) / s);
    // φ(x) has fallen below 1e-25 relative to φ(u) by x = u + 12 for u ≥ −6.
    let lo = u.max(-12.0);
    let hi = lo.max(0.0) + 12.0;
    let steps = 4000usize;
    let h = (hi - lo) / steps as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// 1 − e^{−x} − e^{−y} + e^{−z} for 0 ≤ z ≤ x + y, in a form that keeps full
/// relative precision when all three are tiny.
pub(crate) fn exceed_pair(x: f64, y: f64, z: f64) -> f64 {
    let both = (-(-x).exp_m1()) * (-(-y).exp_m1());
    let overlap = (x + y - z).max(0.0);
    both + (-z).exp() * -(-overlap).exp_m1()
}

/// Rate form of a closed-form block CDF; see [`SceneryFamily::block_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRate {
    pub rate: f64,
    pub window: i64,
}

impl BlockRate {
    /// exp(−rate · weight), with 0 · ∞ read as 0.
    pub fn below(&self, weight: u64) -> f64 {
        if weight == 0 {
            1.0
        } else {
            (-self.rate * weight as f64).exp()
        }
    }

    /// 1 − exp(−rate · weight).
    pub fn above(&self, weight: u64) -> f64 {
        if weight == 0 {
            0.0
        } else {
            -(-self.rate * weight as f64).exp_m1()
        }
    }
}

/// Union of windows [s, s+m) over a growing site set; tracks its size.
#[derive(Debug, Clone)]
pub struct WindowCover {
    sites: FxHashSet<i64>,
    window: i64,
    size: u64,
}

impl WindowCover {
    pub fn new(window: i64) -> Self {
        Self {
            sites: FxHashSet::default(),
            window,
            size: 0,
        }
    }

    /// |⋃ windows|.
    pub fn size(&self) -> u64 {
        self.size
    }

    fn covered(&self, t: i64) -> bool {
        (0..self.window).any(|d| self.sites.contains(&(t - d)))
    }

    /// Growth of the union if `extra` sites were added (not applied).
    pub fn increment(&self, extra: &[i64]) -> u64 {
        let mut fresh: Vec<i64> = Vec::new();
        for &s in extra {
            for t in s..s + self.window {
                if !self.covered(t) && !fresh.contains(&t) {
                    fresh.push(t);
                }
            }
        }
        fresh.len() as u64
    }

    pub fn insert(&mut self, site: i64) {
        let inc = self.increment(&[site]);
        self.sites.insert(site);
        self.size += inc;
    }

    pub fn contains_site(&self, site: i64) -> bool {
        self.sites.contains(&site)
    }
}

/// A family bound to a random realization.
#[derive(Debug, Clone)]
pub struct ScenerySpec {
    family: SceneryFamily,
    seed_binding: RngKey,
    innovations: KeyedStream,
    weights: Vec<f64>,
}

impl ScenerySpec {
    pub fn new(family: SceneryFamily, seed_binding: RngKey) -> Result<Self> {
        family.validate()?;
        let weights = family.normalized_weights();
        Ok(Self {
            innovations: seed_binding.child(0, role::INNOVATION).stream(),
            family,
            seed_binding,
            weights,
        })
    }

    pub fn family(&self) -> &SceneryFamily {
        &self.family
    }

    pub fn seed_binding(&self) -> RngKey {
        self.seed_binding
    }

    /// Same family, independent realization.
    pub fn rebind(&self, seed_binding: RngKey) -> Self {
        Self {
            family: self.family.clone(),
            innovations: seed_binding.child(0, role::INNOVATION).stream(),
            seed_binding,
            weights: self.weights.clone(),
        }
    }

    #[inline]
    fn uniform_at(&self, site: i64) -> f64 {
        self.innovations.uniform_open(site as u64)
    }

    #[inline]
    fn frechet_at(&self, site: i64, beta: f64) -> f64 {
        let e = -self.uniform_at(site).ln();
        if beta == 1.0 {
            1.0 / e
        } else {
            e.powf(-1.0 / beta)
        }
    }

    /// ξ(site).
    pub fn value(&self, site: i64) -> f64 {
        match &self.family {
            SceneryFamily::IidFrechet { beta } => self.frechet_at(site, *beta),
            SceneryFamily::IidExponential => -self.uniform_at(site).ln(),
            SceneryFamily::IidNegPow { delta } => -self.uniform_at(site).powf(1.0 / delta),
            SceneryFamily::MovingMax { window, beta } => (0..*window as i64)
                .map(|j| self.frechet_at(site.wrapping_add(j), *beta))
                .fold(f64::NEG_INFINITY, f64::max),
            SceneryFamily::GaussianMa { .. } => self
                .weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * normal_tail_inv(self.uniform_at(site.wrapping_add(j as i64))))
                .sum(),
        }
    }

    pub fn marginal_tail(&self, u: f64) -> f64 {
        self.family.marginal_tail(u)
    }

    pub fn joint_exceedance(&self, lag: u64, u: f64) -> f64 {
        self.family.joint_exceedance(lag, u)
    }
}

/// ξ(site) for a bound scenery.
pub fn scenery_value(spec: &ScenerySpec, site: i64) -> f64 {
    spec.value(site)
}

pub fn marginal_tail(spec: &ScenerySpec, u: f64) -> f64 {
    spec.marginal_tail(u)
}

pub fn joint_exceedance(spec: &ScenerySpec, lag: u64, u: f64) -> Result<f64> {
    if lag == 0 {
        return Err(Error::InvalidParameter("lag must be ≥ 1".into()));
    }
    Ok(spec.joint_exceedance(lag, u))
}
