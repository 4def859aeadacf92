//! Reproducible random streams.
//!
//! A [`RngStream`] names a ChaCha8 keystream: the 64-bit seed is expanded to a
//! 256-bit key with `SeedableRng::seed_from_u64` (PCG32 expansion) and
//! `stream_id` selects one of the 2^64 independent ChaCha streams under that
//! key. Replication `r` of a run uses `stream_id = r`, so replications can be
//! evaluated in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky_lower, RealMatrix};
use crate::error::{Error, Result};

/// Generator type handed out by [`RngStream::generator`].
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn generator(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derived stream used for the `attempt`-th regeneration of a failed
    /// draw. Attempt 0 is the stream itself.
    pub fn substream(&self, attempt: u64) -> Self {
        if attempt == 0 {
            return *self;
        }
        self.derive(attempt)
    }

    /// Stream with the same id under a key mixed from `tag`. Distinct tags
    /// give unrelated streams.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(tag)),
            stream_id: self.stream_id,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `n` draws from `N(mean, cov)`, one per row.
pub fn mvn_sample<R: rand::Rng + ?Sized>(
    rng: &mut R,
    mean: &[f64],
    cov: &RealMatrix,
    n: usize,
) -> Result<RealMatrix> {
    let d = mean.len();
    if cov.rows() != d || cov.cols() != d {
        return Err(Error::Shape(format!(
            "mean has dimension {d} but covariance is {}x{}",
            cov.rows(),
            cov.cols()
        )));
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    let l = cholesky_lower(cov)?;
    let mut data = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        for i in 0..d {
            let mut v = mean[i];
            for k in 0..=i {
                v += l[(i, k)] * z[k];
            }
            data.push(v);
        }
    }
    RealMatrix::new(n, d, data)
}
