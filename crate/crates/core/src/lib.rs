//! Asymmetric latent semantic indexing for gene expression data.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); ingest, the
//! CSV codec and the command-line pipeline work in `f64`.

pub mod cli;
pub mod config;
pub mod error;
pub mod fusion;
pub mod ingest;
pub mod latent;
pub mod linalg;
pub mod mixture;
pub mod pipeline;
pub mod scalar;
pub mod similarity;
pub mod stats;
pub mod synthetic;
pub mod viz;

pub use error::{AlsiError, Result, Warning};
pub use linalg::Matrix;
pub use scalar::Real;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type PolarParts64 = linalg::PolarParts<f64>;
pub type LatentEmbedding64 = latent::LatentEmbedding<f64>;
pub type MixtureModel64 = mixture::MixtureModel<f64>;
