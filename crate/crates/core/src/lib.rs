//! Multi-scale spectral fusion attention for long video latents.
//!
//! Tensors are `(C, T, H, W)` row-major `f32`. Spectra use an orthonormal
//! 3D DFT, and frequencies are expressed in units of pi.

pub mod analysis;
pub mod attention;
pub mod config;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod noise_init;
pub mod selftest;
pub mod spectral;
pub mod tensor;

pub use analysis::{AttnMap, AttnMapBuilder, SnrReport, TokenAttentionMap};
pub use attention::{AttentionWindow, KeySelection, Matrix, QkvWeights, TokenSequence, WindowKind};
pub use error::{Error, Result};
pub use fusion::{BranchConfig, FusionPlan, FusionTrace};
pub use harness::{SyntheticScene, WeightSource};
pub use noise_init::{MixDomain, SpatialShape, SpecMixParams};
pub use spectral::{BandSpec, DomainMode, FrequencyMask, TransformAxes};
pub use tensor::{Grid3, SeededRng, Shape4, SpectralTensor, VideoLatent};
