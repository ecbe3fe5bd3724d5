//! Shared fixtures for the criterion benches.

use spfu_core::tensor::gaussian_latent;
use spfu_core::{Matrix, QkvWeights, SeededRng, Shape4, TokenSequence, VideoLatent};

pub fn latent(shape: Shape4, seed: u64) -> VideoLatent {
    gaussian_latent(shape, &mut SeededRng::new(seed)).expect("valid shape")
}

/// Tokens of a `(d, frames, side, side)` noise latent.
pub fn tokens(d: usize, frames: usize, side: usize, seed: u64) -> TokenSequence {
    TokenSequence::from_latent(&latent(Shape4::new(d, frames, side, side), seed))
}

pub fn qkv(tokens: &TokenSequence, seed: u64) -> (Matrix, Matrix, Matrix) {
    let w = QkvWeights::random(tokens.d_model(), &mut SeededRng::new(seed)).expect("valid width");
    spfu_core::attention::project_qkv(tokens, &w).expect("matching width")
}

pub fn weights(d: usize, seed: u64) -> QkvWeights {
    QkvWeights::random(d, &mut SeededRng::new(seed)).expect("valid width")
}
