//! Counter-based random substreams.
//!
//! Every stochastic draw in a simulation is tied to a logical address
//! (iteration, block, purpose) hashed together with the master seed into an
//! independent ChaCha stream. Results are therefore identical no matter how
//! iterations are scheduled across worker threads.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::CVec;

/// What a substream is consumed for. Keeping purposes distinct means adding
/// a new consumer never shifts the draws seen by existing ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    ChannelInit,
    ChannelEvolve,
    Noise,
    Shuffle,
    CodebookDesign,
}

impl StreamPurpose {
    pub fn code(self) -> u64 {
        match self {
            StreamPurpose::ChannelInit => 1,
            StreamPurpose::ChannelEvolve => 2,
            StreamPurpose::Noise => 3,
            StreamPurpose::Shuffle => 4,
            StreamPurpose::CodebookDesign => 5,
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fold(state: u64, word: u64) -> u64 {
    mix(state
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(word))
}

/// Derive an independent stream from a master seed and a logical address.
/// Distinct paths yield statistically independent streams; the mapping is
/// fixed and platform-independent.
pub fn substream(master: u64, path: &[u64]) -> ChaCha8Rng {
    let mut s = fold(0x243F_6A88_85A3_08D3, master);
    for &w in path {
        s = fold(s, w);
    }
    let mut seed = [0u8; 32];
    let mut t = s;
    for chunk in seed.chunks_exact_mut(8) {
        t = fold(t, 0x5851_F42D_4C95_7F2D);
        chunk.copy_from_slice(&t.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Stream for one (iteration, block, purpose) cell of a simulation.
pub fn block_stream(master: u64, iteration: u64, block: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    substream(master, &[iteration, block, purpose.code()])
}

/// One draw from CN(0, 1): real and imaginary parts are independent
/// N(0, 1/2) so the total variance is 1.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Vector of i.i.d. CN(0, 1) entries, drawn in index order.
pub fn complex_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    DVector::from_fn(n, |_, _| complex_gaussian(rng))
}
