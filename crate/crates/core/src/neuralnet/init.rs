use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;

/// Deterministic generator used for every parameter initialization.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows × cols` matrix drawn uniformly from ±√(6/(fan_in+fan_out)).
pub fn glorot_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let limit = if rows + cols == 0 {
        0.0
    } else {
        (6.0 / (rows + cols) as f64).sqrt()
    };
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Tensor::from_vec(&[rows, cols], data).expect("length matches shape")
}
