//! Computable functionals behind the mixing and anti-clustering conditions:
//! block/stripe partitions, D' and D^(k) sums, the O'Brien product, ε
//! bounds, extremal-index estimators and a D(u_n) mixing surrogate.
//!
//! Inner probabilities are conditional on the walk. Where the scenery has a
//! closed-form block CDF (i.i.d. families, moving maxima) they are evaluated
//! exactly; otherwise they are estimated from independent inner scenery
//! draws keyed by the outer replication.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt_norming::norming;
use crate::exceedance::scaled_horizon;
use crate::scenery::{exceed_pair, BlockRate, ScenerySpec, WindowCover};
use crate::simkit::{
    aggregate, role, scenery_key, try_map_replications, walk_key, CompensatedSum, Execution, McEstimate, RngKey,
    DEFAULT_CI,
};
use crate::stable_walk::{walk_positions, StepSampler};

/// (k_n, ℓ_n) = (⌊n^{1/3}⌋, ⌊n^{1/4}⌋), with k_n ≥ 2 and ℓ_n ≥ 1.
pub fn default_sequences(n: u64) -> (u64, u64) {
    (iroot(n, 3).max(2), iroot(n, 4).max(1))
}

/// ⌊n^{1/k}⌋ in integer arithmetic.
fn iroot(n: u64, k: u32) -> u64 {
    let mut r = (n as f64).powf(1.0 / f64::from(k)).round() as u64;
    while r > 0 && r.checked_pow(k).is_none_or(|v| v > n) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|v| v <= n) {
        r += 1;
    }
    r
}

/// r_n = ⌊len/(k_n − 1)⌋ + 1.
pub fn block_length(len: u64, k_n: u64) -> u64 {
    len / (k_n - 1) + 1
}

/// Blocks of consecutive sites and their stripes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockScheme {
    /// Number of input sites.
    pub n: u64,
    pub k_n: u64,
    pub ell_n: u64,
    pub r_n: u64,
    #[serde(rename = "K_n")]
    pub big_k: u64,
    pub blocks: Vec<Vec<i64>>,
    /// ℓ_n largest sites of each block; empty when the block is shorter.
    pub stripes: Vec<Vec<i64>>,
}

pub fn build_blocks(sites: &[i64], k_n: u64, ell_n: u64) -> Result<BlockScheme> {
    if k_n < 2 {
        return Err(Error::InvalidParameter(format!("k_n must be ≥ 2, got {k_n}")));
    }
    if sites.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("sites must be strictly increasing".into()));
    }
    let len = sites.len() as u64;
    let r_n = block_length(len, k_n);
    let big_k = len / r_n + 1;
    let mut blocks = Vec::with_capacity(big_k as usize);
    let mut stripes = Vec::with_capacity(big_k as usize);
    for j in 0..big_k as usize {
        let lo = (j * r_n as usize).min(sites.len());
        let hi = ((j + 1) * r_n as usize).min(sites.len());
        let b = sites[lo..hi].to_vec();
        let stripe = if (b.len() as u64) < ell_n {
            Vec::new()
        } else {
            b[b.len() - ell_n as usize..].to_vec()
        };
        blocks.push(b);
        stripes.push(stripe);
    }
    Ok(BlockScheme {
        n: len,
        k_n,
        ell_n,
        r_n,
        big_k,
        blocks,
        stripes,
    })
}

/// Joint exceedance P(ξ(0) > u, ξ(d) > u) tabulated by |d|; the last entry
/// covers every lag at or beyond the dependence window.
struct LagTable(Vec<f64>);

impl LagTable {
    fn new(spec: &ScenerySpec, u: f64) -> Self {
        let w = spec.family().window() as u64;
        Self((0..=w).map(|lag| spec.joint_exceedance(lag, u)).collect())
    }

    #[inline]
    fn at(&self, d: i64) -> f64 {
        let i = (d.unsigned_abs() as usize).min(self.0.len() - 1);
        self.0[i]
    }
}

/// n · Σ_{s=1}^{⌊n/k_n⌋} P(ξ(0) > u, ξ(s) > u).
pub fn dprime_sum_scenery(spec: &ScenerySpec, n: u64, u: f64, k_n: u64) -> f64 {
    let table = LagTable::new(spec, u);
    let last = (n / k_n) as usize;
    let w = table.0.len() - 1;
    let near: f64 = (1..=last.min(w.saturating_sub(1))).map(|s| table.0[s]).sum();
    let far = last.saturating_sub(w.saturating_sub(1)) as f64 * table.0[w];
    n as f64 * (near + far)
}

/// Monte Carlo estimate of n · Σ_{i=2}^{⌊n/k_n⌋} P(ξ(S_1) > u, ξ(S_i) > u)
/// at u = u_{m_n}(x), m_n = ⌊q̂ n⌋.
///
/// The scenery is integrated out given each walk, so a replication
/// contributes n · Σ_i P(ξ(0) > u, ξ(S_i − S_1) > u) with no scenery noise.
#[allow(clippy::too_many_arguments)]
pub fn dprime_sum_rwrs(
    law: &impl StepSampler,
    spec: &ScenerySpec,
    n: u64,
    x: f64,
    q_hat: f64,
    k_n: u64,
    reps: u64,
    key: &RngKey,
    exec: Execution,
) -> Result<McEstimate> {
    if reps < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: reps });
    }
    let m_n = scaled_horizon(q_hat, n);
    if m_n < 2 {
        return Err(Error::ScalingTooSmall { m_n });
    }
    let u = norming(spec.family(), m_n)?.level(x);
    let table = LagTable::new(spec, u);
    let len = (n / k_n).max(1);
    let nf = n as f64;
    let sums = try_map_replications(reps, exec, |r| {
        let pos = walk_positions(law, len, &walk_key(key, r))?;
        let s: CompensatedSum = pos[1..].iter().map(|&s| table.at(s - pos[0])).collect();
        Ok(nf * s.value())
    })?;
    aggregate(&sums, DEFAULT_CI)
}

/// How conditional scenery probabilities are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum InnerMethod {
    Exact,
    /// Average over `inner_reps` scenery draws, walk held fixed.
    Nested { inner_reps: u64 },
}

impl InnerMethod {
    /// Exact when the family admits it, nested otherwise.
    pub fn auto(spec: &ScenerySpec, inner_reps: u64) -> Self {
        if spec.family().block_rate(0.0).is_some() {
            InnerMethod::Exact
        } else {
            InnerMethod::Nested { inner_reps }
        }
    }
}

fn inner_draws(spec: &ScenerySpec, key: &RngKey, rep: u64, inner_reps: u64) -> Vec<ScenerySpec> {
    let base = key.child(rep, role::INNER);
    (0..inner_reps).map(|i| spec.rebind(base.child(i, role::INNER))).collect()
}

fn exact_rate(spec: &ScenerySpec, u: f64) -> Result<BlockRate> {
    spec.family().block_rate(u).ok_or_else(|| {
        Error::UnsupportedFamily("exact block probabilities need an i.i.d. or moving-max scenery".into())
    })
}

#[inline]
fn scaled(c: f64, w: u64) -> f64 {
    if w == 0 {
        0.0
    } else {
        c * w as f64
    }
}

/// D^(k) sums for every k in `ks`, on one walk S_1..S_{r_n} (`pos`).
fn dk_exact(pos: &[i64], ks: &[usize], rate: &BlockRate, n: f64) -> Vec<f64> {
    let c = rate.rate;
    ks.iter()
        .map(|&k| {
            let mut cover = WindowCover::new(rate.window);
            for &s in &pos[1..k.min(pos.len())] {
                cover.insert(s);
            }
            let base = rate.below(cover.size());
            let a = cover.increment(&[pos[0]]);
            let mut acc = CompensatedSum::default();
            for &sj in pos.iter().skip(k) {
                let b = cover.increment(&[sj]);
                let z = cover.increment(&[pos[0], sj]);
                acc.add(exceed_pair(scaled(c, a), scaled(c, b), scaled(c, z)));
            }
            n * base * acc.value()
        })
        .collect()
}

fn dk_nested(pos: &[i64], ks: &[usize], draws: &[ScenerySpec], u: f64, n: f64) -> Vec<f64> {
    let mut hits = vec![0u64; ks.len()];
    for d in draws {
        let vals: Vec<f64> = pos.iter().map(|&s| d.value(s)).collect();
        if vals[0] <= u {
            continue;
        }
        // running max of ξ(S_2..S_k), updated as k grows along the sorted ladder
        let mut m = f64::NEG_INFINITY;
        let mut filled = 1usize;
        for (slot, &k) in ks.iter().enumerate() {
            while filled < k.min(vals.len()) {
                m = m.max(vals[filled]);
                filled += 1;
            }
            if m > u {
                break;
            }
            hits[slot] += vals.iter().skip(k).filter(|&&v| v > u).count() as u64;
        }
    }
    let scale = n / draws.len() as f64;
    hits.iter().map(|&h| h as f64 * scale).collect()
}

/// D^(k) ladder under common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DkLadder {
    pub ks: Vec<usize>,
    pub estimates: Vec<McEstimate>,
    /// Replications whose own ladder was nonincreasing in k.
    pub monotone_runs: u64,
    pub replications: u64,
    pub r_n: u64,
}

impl DkLadder {
    pub fn monotone_in_every_run(&self) -> bool {
        self.monotone_runs == self.replications
    }

    pub fn monotone_means(&self) -> bool {
        self.estimates.windows(2).all(|w| w[1].mean <= w[0].mean)
    }
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + f64::MIN_POSITIVE)
}

/// n · Σ_{j=k+1}^{r_n} P(ξ(S_1) > u ≥ M'_{2,k}, ξ(S_j) > u) at u = u_n(x), for
/// each k in `ks`. Every k sees the same walks and inner draws.
#[allow(clippy::too_many_arguments)]
pub fn dk_ladder(
    law: &impl StepSampler,
    spec: &ScenerySpec,
    n: u64,
    ks: &[usize],
    x: f64,
    k_n: u64,
    reps: u64,
    key: &RngKey,
    method: InnerMethod,
    exec: Execution,
) -> Result<DkLadder> {
    if reps < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: reps });
    }
    if ks.is_empty() || ks.contains(&0) || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("k ladder must be strictly increasing and ≥ 1".into()));
    }
    if k_n < 2 {
        return Err(Error::InvalidParameter(format!("k_n must be ≥ 2, got {k_n}")));
    }
    let u = norming(spec.family(), n)?.level(x);
    let r_n = block_length(n, k_n);
    let nf = n as f64;
    let rate = match method {
        InnerMethod::Exact => Some(exact_rate(spec, u)?),
        InnerMethod::Nested { .. } => None,
    };
    let rows = try_map_replications(reps, exec, |r| {
        let pos = walk_positions(law, r_n, &walk_key(key, r))?;
        Ok(match (&rate, method) {
            (Some(rate), _) => dk_exact(&pos, ks, rate, nf),
            (None, InnerMethod::Nested { inner_reps }) => {
                dk_nested(&pos, ks, &inner_draws(spec, key, r, inner_reps.max(1)), u, nf)
            }
            (None, InnerMethod::Exact) => unreachable!(),
        })
    })?;
    let monotone_runs = rows.iter().filter(|row| nonincreasing(row)).count() as u64;
    let estimates = (0..ks.len())
        .map(|i| aggregate(&rows.iter().map(|row| row[i]).collect::<Vec<_>>(), DEFAULT_CI))
        .collect::<Result<Vec<_>>>()?;
    Ok(DkLadder {
        ks: ks.to_vec(),
        estimates,
        monotone_runs,
        replications: reps,
        r_n,
    })
}

/// Single-k form of [`dk_ladder`].
#[allow(clippy::too_many_arguments)]
pub fn dk_sum_rwrs(
    law: &impl StepSampler,
    spec: &ScenerySpec,
    n: u64,
    k: usize,
    x: f64,
    k_n: u64,
    reps: u64,
    key: &RngKey,
) -> Result<McEstimate> {
    let method = InnerMethod::auto(spec, 200);
    let ladder = dk_ladder(law, spec, n, &[k], x, k_n, reps, key, method, Execution::default())?;
    Ok(ladder.estimates[0])
}

/// Both sides of the O'Brien product and their paired difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OBrien {
    /// Empirical P(M_{S_n} ≤ u_n).
    pub lhs: McEstimate,
    /// Mean of exp(−Σ_j Σ_i P(ξ(S_i) > u_n ≥ M'_{i+1, end of block j})).
    pub rhs: McEstimate,
    /// lhs − rhs, paired by replication.
    pub difference: McEstimate,
}

impl OBrien {
    pub fn consistent(&self) -> bool {
        self.difference.mean.abs() < 3.0 * self.difference.stderr
    }
}

/// O'Brien product at u = u_n(x) over time blocks of length r_n.
///
/// Within a block the inner sum Σ_i P(ξ(S_i) > u ≥ M'_{i+1,end}) splits
/// {M_B > u} by the last exceedance, so it equals P(M_B > u | walk).
#[allow(clippy::too_many_arguments)]
pub fn obrien_product(
    law: &impl StepSampler,
    spec: &ScenerySpec,
    n: u64,
    x: f64,
    k_n: u64,
    reps: u64,
    key: &RngKey,
    method: InnerMethod,
    exec: Execution,
) -> Result<OBrien> {
    if reps < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: reps });
    }
    if k_n < 2 {
        return Err(Error::InvalidParameter(format!("k_n must be ≥ 2, got {k_n}")));
    }
    let u = norming(spec.family(), n)?.level(x);
    let r_n = block_length(n, k_n) as usize;
    let rate = match method {
        InnerMethod::Exact => Some(exact_rate(spec, u)?),
        InnerMethod::Nested { .. } => None,
    };
    let pairs = try_map_replications(reps, exec, |r| {
        let pos = walk_positions(law, n, &walk_key(key, r))?;
        let real = spec.rebind(scenery_key(key, r));
        let below = pos.iter().all(|&s| real.value(s) <= u);
        let mut total = CompensatedSum::default();
        match (&rate, method) {
            (Some(rate), _) => {
                for block in pos.chunks(r_n) {
                    let mut cover = WindowCover::new(rate.window);
                    for &s in block {
                        cover.insert(s);
                    }
                    total.add(rate.above(cover.size()));
                }
            }
            (None, InnerMethod::Nested { inner_reps }) => {
                let draws = inner_draws(spec, key, r, inner_reps.max(1));
                for block in pos.chunks(r_n) {
                    let over = draws
                        .iter()
                        .filter(|d| block.iter().any(|&s| d.value(s) > u))
                        .count();
                    total.add(over as f64 / draws.len() as f64);
                }
            }
            (None, InnerMethod::Exact) => unreachable!(),
        }
        Ok((f64::from(u8::from(below)), (-total.value()).exp()))
    })?;
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    Ok(OBrien {
        lhs: aggregate(&lhs, DEFAULT_CI)?,
        rhs: aggregate(&rhs, DEFAULT_CI)?,
        difference: aggregate(&diff, DEFAULT_CI)?,
    })
}

/// Per-replication inputs of the blocks estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockExceedances {
    /// Time blocks with at least one exceedance.
    pub blocks: u64,
    /// Exceedances of ξ(S_i), i ≤ n, revisits included.
    pub total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaEstimates {
    pub theta_blocks: McEstimate,
    pub theta_logs: McEstimate,
}

/// Blocks and log estimators of the extremal index, both clipped to [0, 1].
pub fn extremal_index_estimators(
    max_indicators: &[bool],
    block_exceedances: &[BlockExceedances],
    tau_level: f64,
) -> Result<ThetaEstimates> {
    if !(tau_level > 0.0) {
        return Err(Error::InvalidParameter(format!("tau_level must be positive, got {tau_level}")));
    }
    let n_max = max_indicators.len() as u64;
    let n_blk = block_exceedances.len() as u64;
    if n_max < 2 || n_blk < 2 {
        return Err(Error::InsufficientReplications {
            needed: 2,
            got: n_max.min(n_blk),
        });
    }
    let exc: u64 = block_exceedances.iter().map(|b| b.total).sum();
    if exc == 0 {
        return Err(Error::LevelTooHigh);
    }
    let blk: u64 = block_exceedances.iter().map(|b| b.blocks).sum();
    let ratio = blk as f64 / exc as f64;
    // Delta method for a ratio of means.
    let mean_exc = exc as f64 / n_blk as f64;
    let resid: Vec<f64> = block_exceedances
        .iter()
        .map(|b| b.blocks as f64 - ratio * b.total as f64)
        .collect();
    let ss: f64 = resid.iter().map(|d| d * d).sum::<f64>() / (n_blk - 1) as f64;
    let blocks_se = (ss / n_blk as f64).sqrt() / mean_exc;

    let p = max_indicators.iter().filter(|&&b| b).count() as f64 / n_max as f64;
    let p_se = (p * (1.0 - p) / (n_max - 1) as f64).sqrt();
    let (logs, logs_se) = if p > 0.0 {
        (-p.ln() / tau_level, p_se / (p * tau_level))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let est = |mean: f64, stderr: f64, reps: u64| McEstimate {
        mean: mean.clamp(0.0, 1.0),
        stderr,
        replications: reps,
        ci_level: DEFAULT_CI,
    };
    Ok(ThetaEstimates {
        theta_blocks: est(ratio, blocks_se, n_blk),
        theta_logs: est(logs, logs_se, n_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonBounds {
    pub eps1: f64,
    pub eps2: f64,
    pub c: f64,
}

/// eps1 = c (k_n ℓ_n / n + k_n α), eps2 = c (1/k_n + D'), for trend checks.
pub fn epsilon_bounds(n: u64, k_n: u64, ell_n: u64, alpha_mix: f64, dprime_value: f64, c: f64) -> Result<EpsilonBounds> {
    if alpha_mix < 0.0 || dprime_value < 0.0 || c < 0.0 || n == 0 || k_n == 0 {
        return Err(Error::InvalidParameter("epsilon bound inputs must be nonnegative".into()));
    }
    let (n, k, l) = (n as f64, k_n as f64, ell_n as f64);
    Ok(EpsilonBounds {
        eps1: c * (k * l / n + k * alpha_mix),
        eps2: c * (1.0 / k + dprime_value),
        c,
    })
}

/// Largest factorization defect found on the index grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingSurrogate {
    pub defect: f64,
    /// Zero when the defect was evaluated exactly.
    pub stderr: f64,
    pub exact: bool,
    pub left: Vec<i64>,
    pub right: Vec<i64>,
}

/// Index tuples I < J with |I|, |J| ≤ max_p, j_1 − i_p ≥ ell, inside [0, n).
fn mixing_grid(n: u64, ell: u64, max_p: usize) -> Vec<(Vec<i64>, Vec<i64>)> {
    let mut spacings = vec![1i64, 2, ell.max(1) as i64];
    spacings.dedup();
    let mut out = Vec::new();
    for p in 1..=max_p {
        for pp in 1..=max_p {
            for &d in &spacings {
                let left: Vec<i64> = (0..p as i64).map(|i| i * d).collect();
                let start = left[p - 1] + ell as i64;
                let right: Vec<i64> = (0..pp as i64).map(|j| start + j * d).collect();
                if (right[pp - 1] as u64) < n && !out.contains(&(left.clone(), right.clone())) {
                    out.push((left, right));
                }
            }
        }
    }
    out
}

/// max over the grid of |F_{I∪J}(u) − F_I(u) F_J(u)|, where F_S(u) = P(max_S ξ ≤ u).
///
/// Closed-form families are evaluated exactly; others by `reps` scenery
/// draws, with the defect's delta-method stderr.
#[allow(clippy::too_many_arguments)]
pub fn alpha_mixing_surrogate(
    spec: &ScenerySpec,
    n: u64,
    ell: u64,
    u: f64,
    max_p: usize,
    reps: u64,
    key: &RngKey,
    exec: Execution,
) -> Result<MixingSurrogate> {
    if !(1..=3).contains(&max_p) {
        return Err(Error::InvalidParameter(format!("max_p must lie in 1..=3, got {max_p}")));
    }
    if ell == 0 {
        return Err(Error::InvalidParameter("gap ell must be ≥ 1".into()));
    }
    let grid = mixing_grid(n, ell, max_p);
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("no index tuples fit below n = {n}")));
    }
    match spec.family().block_rate(u) {
        Some(rate) => {
            let cdf = |sites: &[i64]| {
                let mut c = WindowCover::new(rate.window);
                for &s in sites {
                    c.insert(s);
                }
                rate.below(c.size())
            };
            let mut best = MixingSurrogate {
                defect: -1.0,
                stderr: 0.0,
                exact: true,
                left: Vec::new(),
                right: Vec::new(),
            };
            for (l, r) in grid {
                let both: Vec<i64> = l.iter().chain(&r).copied().collect();
                let d = (cdf(&both) - cdf(&l) * cdf(&r)).abs();
                if d > best.defect {
                    best = MixingSurrogate {
                        defect: d,
                        stderr: 0.0,
                        exact: true,
                        left: l,
                        right: r,
                    };
                }
            }
            Ok(best)
        }
        None => mixing_defect_mc(spec, &grid, u, reps, key, exec),
    }
}

/// Monte Carlo defect over `grid`; also usable on closed-form families.
pub fn mixing_defect_mc(
    spec: &ScenerySpec,
    grid: &[(Vec<i64>, Vec<i64>)],
    u: f64,
    reps: u64,
    key: &RngKey,
    exec: Execution,
) -> Result<MixingSurrogate> {
    if reps < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: reps });
    }
    let below = |d: &ScenerySpec, s: &[i64]| s.iter().all(|&i| d.value(i) <= u);
    let rows = try_map_replications(reps, exec, |r| {
        let d = spec.rebind(key.child(r, role::SURROGATE));
        Ok(grid
            .iter()
            .map(|(l, rr)| (below(&d, l), below(&d, rr)))
            .collect::<Vec<_>>())
    })?;
    let nf = reps as f64;
    let mut best: Option<MixingSurrogate> = None;
    for (g, (l, r)) in grid.iter().enumerate() {
        let a: Vec<f64> = rows.iter().map(|row| f64::from(u8::from(row[g].0))).collect();
        let b: Vec<f64> = rows.iter().map(|row| f64::from(u8::from(row[g].1))).collect();
        let ma = a.iter().sum::<f64>() / nf;
        let mb = b.iter().sum::<f64>() / nf;
        let mab = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / nf;
        let defect = mab - ma * mb;
        // Influence function of (ab) − ā b̄.
        let psi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y - mb * x - ma * y).collect();
        let se = aggregate(&psi, DEFAULT_CI)?.stderr;
        if best.as_ref().is_none_or(|b| defect.abs() > b.defect) {
            best = Some(MixingSurrogate {
                defect: defect.abs(),
                stderr: se,
                exact: false,
                left: l.clone(),
                right: r.clone(),
            });
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// Public access to the tuple grid used by [`alpha_mixing_surrogate`].
pub fn surrogate_grid(n: u64, ell: u64, max_p: usize) -> Vec<(Vec<i64>, Vec<i64>)> {
    mixing_grid(n, ell, max_p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub n: u64,
    pub functional: String,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub rows: Vec<DiagnosticRow>,
}

impl DiagnosticReport {
    pub fn push(&mut self, n: u64, functional: impl Into<String>, est: McEstimate) {
        self.rows.push(DiagnosticRow {
            n,
            functional: functional.into(),
            estimate: est.mean,
            stderr: est.stderr,
        });
    }

    pub fn find(&self, n: u64, functional: &str) -> Option<&DiagnosticRow> {
        self.rows.iter().find(|r| r.n == n && r.functional == functional)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
