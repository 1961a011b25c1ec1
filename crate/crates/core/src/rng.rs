//! Seeded random number generation.
//!
//! Every stochastic call site takes an explicit `&mut Rng`. The generator is
//! ChaCha8, which is counter-based: a run derives independent streams from a
//! single seed so that, for example, the dropout masks of two runs with the
//! same seed match even when one of them also draws Monte-Carlo samples.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::DenseMatrix;

pub type Rng = ChaCha8Rng;

/// Named sub-streams of a training run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 0,
    Dropout = 1,
    Sampling = 2,
    DropEdge = 3,
    Split = 4,
    Data = 5,
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn uniform(rng: &mut Rng) -> f64 {
    rng.random::<f64>()
}

/// An `rows × cols` matrix of independent standard-normal entries.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| standard_normal(rng)).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("length matches shape")
}

/// Fisher-Yates shuffle of `items` in place.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
}
