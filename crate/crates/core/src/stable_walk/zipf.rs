//! Exact sampler for |X| with P(|X| = k) ∝ k^{-(1+α)}, k ≥ 1.

use crate::simkit::KeyedStream;

/// Default switch point between table inversion and tail rejection.
pub const DEFAULT_TAIL_CUTOFF: u64 = 1 << 16;

const GUIDE_BUCKETS: usize = 1 << 12;

/// Hurwitz tail Σ_{k ≥ start} k^{-s} for s > 1, by Euler–Maclaurin with
/// terms through the fifth derivative. `start` ≥ 16 keeps the remainder
/// below 1e-17 relative for s ∈ (1, 3).
pub fn hurwitz_tail(s: f64, start: u64) -> f64 {
    assert!(s > 1.0, "hurwitz_tail needs s > 1");
    let head_end = start.max(32);
    let mut head = 0.0;
    for k in start..head_end {
        head += (k as f64).powf(-s);
    }
    let n = head_end as f64;
    let f = n.powf(-s);
    let integral = n.powf(1.0 - s) / (s - 1.0);
    let d1 = s * f / n;
    let d3 = s * (s + 1.0) * (s + 2.0) * f / (n * n * n);
    let d5 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * f / n.powi(5);
    head + integral + 0.5 * f + d1 / 12.0 - d3 / 720.0 + d5 / 30240.0
}

/// Riemann zeta for real s > 1.
pub fn riemann_zeta(s: f64) -> f64 {
    let mut head = 0.0;
    // Summed smallest-first for accuracy.
    for k in (1..32u64).rev() {
        head += (k as f64).powf(-s);
    }
    head + hurwitz_tail(s, 32)
}

/// Magnitude table: inverse CDF up to `cutoff`, Pareto-proposal rejection
/// beyond.
#[derive(Debug, Clone)]
pub struct ZipfMagnitude {
    alpha: f64,
    cutoff: u64,
    zeta: f64,
    /// cdf[i] = P(|X| ≤ i + 1)
    cdf: Vec<f64>,
    guide: Vec<u32>,
    head_mass: f64,
    accept_scale: f64,
}

impl ZipfMagnitude {
    pub fn new(alpha: f64, cutoff: u64) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0);
        assert!(cutoff >= 16 && cutoff <= u32::MAX as u64);
        let s = 1.0 + alpha;
        let zeta = riemann_zeta(s);
        let mut cdf = Vec::with_capacity(cutoff as usize);
        let (mut acc, mut comp) = (0.0f64, 0.0f64);
        for k in 1..=cutoff {
            let term = (k as f64).powf(-s);
            let y = term - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
            cdf.push(acc / zeta);
        }
        let head_mass = 1.0 - hurwitz_tail(s, cutoff + 1) / zeta;
        // Guide entries: first index whose cdf exceeds the bucket's lower edge.
        let mut guide = Vec::with_capacity(GUIDE_BUCKETS + 1);
        let mut idx = 0usize;
        for g in 0..=GUIDE_BUCKETS {
            let edge = g as f64 / GUIDE_BUCKETS as f64;
            while idx + 1 < cdf.len() && cdf[idx] <= edge {
                idx += 1;
            }
            guide.push(idx as u32);
        }
        let accept_scale = (1.0 + 1.0 / (cutoff as f64 + 1.0)).powf(s);
        Self {
            alpha,
            cutoff,
            zeta,
            cdf,
            guide,
            head_mass,
            accept_scale,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// P(|X| ≤ cutoff).
    pub fn head_mass(&self) -> f64 {
        self.head_mass
    }

    /// P(|X| = k).
    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            0.0
        } else {
            (k as f64).powf(-(1.0 + self.alpha)) / self.zeta
        }
    }

    /// Draws |X| from slot `counter`; `u` is the slot's primary uniform.
    #[inline]
    pub(crate) fn sample(&self, u: f64, stream: &KeyedStream, counter: u64) -> u64 {
        if u < self.head_mass {
            self.invert_head(u)
        } else {
            self.sample_tail(stream, counter)
        }
    }

    #[inline]
    fn invert_head(&self, u: f64) -> u64 {
        let g = ((u * GUIDE_BUCKETS as f64) as usize).min(GUIDE_BUCKETS - 1);
        let mut lo = self.guide[g] as usize;
        let mut hi = (self.guide[g + 1] as usize).min(self.cdf.len() - 1);
        // Smallest i in [lo, hi] with cdf[i] > u.
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.cdf[mid] > u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo as u64 + 1
    }

    fn sample_tail(&self, stream: &KeyedStream, counter: u64) -> u64 {
        let s = 1.0 + self.alpha;
        let base = self.cutoff as f64 + 1.0;
        let mut seq = stream.sequence(counter);
        loop {
            let v = seq.next_open();
            let y = base * v.powf(-1.0 / self.alpha);
            let k = y.floor();
            // ∫_k^{k+1} y^{-s} dy, written to avoid cancellation at large k.
            let inv_k = 1.0 / k;
            let cell = k.powf(-self.alpha) * -(-self.alpha * inv_k.ln_1p()).exp_m1() / self.alpha;
            let ratio = k.powf(-s) / cell / self.accept_scale;
            if seq.next_open() <= ratio {
                // Saturating cast; anything this large overflows the walk anyway.
                return if k >= u64::MAX as f64 { u64::MAX } else { k as u64 };
            }
        }
    }
}
