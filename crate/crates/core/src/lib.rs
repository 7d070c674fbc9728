//! Deep Belief Network image denoising.
//!
//! A stack of RBMs is pretrained greedily on clean and noise-corrupted
//! images. Top-layer units whose activations swing between a clean image and
//! its noisy copy are flagged as noise nodes; denoising replaces their values
//! with their mean over clean images before decoding.

pub mod data;
pub mod dbn;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod pgm;
pub mod rbm;
pub mod seed;

pub use data::{Image, PairedDataset};
pub use dbn::{Activations, Dbn};
pub use denoise::NoiseProfile;
pub use error::{Error, Result};
pub use eval::{ExperimentConfig, ExperimentReport};
pub use rbm::{Rbm, RbmGradient, TrainConfig, UnitKind};
