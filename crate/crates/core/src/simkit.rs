//! Counter-based randomness and ordered Monte Carlo aggregation.
//!
//! Every random quantity in the crate is a pure function of an [`RngKey`] and a
//! 64-bit counter. Walk steps use the step index as counter, scenery
//! innovations use the site coordinate, so any site or step can be regenerated
//! without replaying a sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const SALT_MASTER: u64 = 0x6A09_E667_F3BC_C908;
const SALT_STREAM: u64 = 0xBB67_AE85_84CA_A73B;
const SALT_SUB: u64 = 0x3C6E_F372_FE94_F82B;
const SALT_OUT: u64 = 0xA54F_F53A_5F1D_36F1;
const SALT_SEQ: u64 = 0x510E_527F_ADE6_82D1;

/// 2^-53
const UNIT_53: f64 = 1.0 / 9_007_199_254_740_992.0;

/// Finalizer from SplitMix64 (Stafford variant 13). Bijective on u64.
#[inline(always)]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Role tags carried in [`RngKey::substream`].
pub mod role {
    pub const STEP: u32 = 1;
    pub const SCENERY: u32 = 2;
    pub const INNOVATION: u32 = 3;
    pub const INNER: u32 = 4;
    pub const SURROGATE: u32 = 5;
}

/// Address of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngKey {
    pub master_seed: u64,
    pub stream_id: u64,
    pub substream: u32,
}

impl RngKey {
    pub const fn new(master_seed: u64, stream_id: u64, substream: u32) -> Self {
        Self {
            master_seed,
            stream_id,
            substream,
        }
    }

    /// A 64-bit digest of the whole key.
    pub fn digest(&self) -> u64 {
        let h = mix64(self.master_seed ^ SALT_MASTER);
        let h = mix64(h ^ self.stream_id.wrapping_mul(GOLDEN) ^ SALT_STREAM);
        mix64(h ^ (u64::from(self.substream)).wrapping_mul(SALT_SUB))
    }

    /// Derives a key whose master seed is this key's digest, so that streams
    /// below it are disjoint from every stream below any other key.
    pub fn child(&self, stream_id: u64, substream: u32) -> RngKey {
        RngKey::new(self.digest(), stream_id, substream)
    }

    pub fn stream(&self) -> KeyedStream {
        KeyedStream::from_digest(self.digest())
    }
}

/// A key with its digest precomputed; the hot-loop form of [`RngKey`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyedStream {
    seed: u64,
    whiten: u64,
}

impl KeyedStream {
    fn from_digest(d: u64) -> Self {
        Self {
            seed: d,
            whiten: mix64(d ^ SALT_OUT),
        }
    }

    /// 64 random bits at `counter`.
    #[inline(always)]
    pub fn bits(&self, counter: u64) -> u64 {
        let z = self.seed.wrapping_add(counter.wrapping_mul(GOLDEN));
        mix64(mix64(z) ^ self.whiten)
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    #[inline(always)]
    pub fn uniform(&self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * UNIT_53
    }

    /// Uniform on the open interval (0, 1).
    #[inline(always)]
    pub fn uniform_open(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) as f64 + 0.5) * UNIT_53
    }

    /// An unbounded sequence of draws attached to `counter`, for samplers that
    /// need a variable number of uniforms per output (rejection loops).
    pub fn sequence(&self, counter: u64) -> CounterSequence {
        CounterSequence {
            state: mix64(self.bits(counter) ^ SALT_SEQ),
        }
    }
}

/// SplitMix64 walk seeded from one counter slot.
#[derive(Debug, Clone)]
pub struct CounterSequence {
    state: u64,
}

impl CounterSequence {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    #[inline]
    pub fn next_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * UNIT_53
    }
}

/// Uniform on [0,1) as a pure function of `(key, counter)`.
pub fn uniform(key: &RngKey, counter: u64) -> f64 {
    key.stream().uniform(counter)
}

/// Mean and standard error of a replicated estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replications: u64,
    pub ci_level: f64,
}

impl McEstimate {
    /// An exactly known value (zero error).
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            replications: 0,
            ci_level: 0.95,
        }
    }

    /// Half-width of the two-sided normal interval at `ci_level`.
    pub fn half_width(&self) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let z = Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(0.5 + self.ci_level / 2.0);
        z * self.stderr
    }

    /// Adds a non-statistical error term (e.g. a bias bound) to the stderr.
    pub fn widen(mut self, extra: f64) -> Self {
        self.stderr += extra;
        self
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Reduces samples, given in replication-index order, to an [`McEstimate`].
pub fn aggregate(samples: &[f64], ci_level: f64) -> Result<McEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientReplications {
            needed: 2,
            got: samples.len() as u64,
        });
    }
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ci_level must lie in (0,1), got {ci_level}"
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().copied().collect::<CompensatedSum>().value() / n;
    let ss = samples
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .value();
    let sd = (ss / (n - 1.0)).sqrt();
    Ok(McEstimate {
        mean,
        stderr: sd / n.sqrt(),
        replications: samples.len() as u64,
        ci_level,
    })
}

/// Default confidence level used across the crate.
pub const DEFAULT_CI: f64 = 0.95;

/// Key of replication `rep`'s walk under `master`.
pub fn walk_key(master: &RngKey, rep: u64) -> RngKey {
    master.child(rep, role::STEP)
}

/// Key of replication `rep`'s scenery realization under `master`.
pub fn scenery_key(master: &RngKey, rep: u64) -> RngKey {
    master.child(rep, role::SCENERY)
}

/// How replication loops are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing over replications. Falls back to sequential when
    /// the `parallel` feature is disabled.
    #[default]
    Parallel,
}

/// Maps `f` over replication indices `0..reps`, returning results in index
/// order whatever the scheduling.
pub fn map_replications<T, F>(reps: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..reps).into_par_iter().map(f).collect()
        }
        _ => (0..reps).map(f).collect(),
    }
}

/// Fallible variant of [`map_replications`]; the first error in index order wins.
pub fn try_map_replications<T, F>(reps: u64, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    map_replications(reps, exec, f).into_iter().collect()
}
