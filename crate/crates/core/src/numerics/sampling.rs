use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CVec, C64};

/// Seed of one independent random stream.
///
/// The generator state is a pure function of `(master_seed, stream_id)`:
/// a ChaCha8 key from the master seed and the stream id as ChaCha nonce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        SeedSpec { master_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream keyed by the given path components.
    pub fn child(&self, parts: &[u64]) -> SeedSpec {
        let mut all = Vec::with_capacity(parts.len() + 1);
        all.push(self.stream_id);
        all.extend_from_slice(parts);
        SeedSpec { master_seed: self.master_seed, stream_id: stream_id(&all) }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a path of integers into a stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5851_f42d_4c95_7f2d, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// `n` i.i.d. CN(0, 1) entries drawn from `rng`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(s * re, s * im)
        })
        .collect()
}

pub fn sample_complex_gaussian(n: usize, seed: SeedSpec) -> CVec {
    assert!(n >= 1, "sample dimension must be positive");
    CVec::from_vec_unchecked(complex_gaussian(&mut seed.rng(), n))
}
