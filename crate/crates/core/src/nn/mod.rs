//! Just enough reverse-mode differentiation for the two fixed architectures:
//! 3D convolution stacks over `[C, D, H, W]` volumes and dense stacks over
//! `[N, F]` batches, plus Adam and the L1 / masked MSE losses.
//!
//! Everything runs single-threaded with fixed reduction order, so training is
//! bit-reproducible for a given seed.

mod adam;
pub mod checkpoint;
mod gemm;
pub mod gradcheck;
mod layers;
mod loss;
mod network;
mod tensor;

pub use gradcheck::{gradient_check, GradCheck};
pub use adam::{AdamConfig, AdamState, LrSchedule, LrScheduler};
pub use layers::{LayerSpec, NetworkSpec};
pub use loss::{l1_loss, l1_loss_with_grad, mse_loss, mse_loss_with_grad};
pub use network::{Gradients, Network, Trace};
pub use tensor::Tensor;

/// Deterministic random source shared by initialization and training.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    use rand_core::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Uniform sample in `[0, 1)` with 53 bits of precision.
pub fn uniform(rng: &mut Rng) -> f64 {
    use rand_core::RngCore;
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Fisher-Yates shuffle driven by [`Rng`].
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    use rand_core::RngCore;
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}
