//! Gaussian noise-injection training for small differentiable models, with
//! closed-form effective regularizers and independent oracles to check them.

pub mod error;
pub mod losses;
pub mod models;
pub mod noise;
pub mod numerics;
pub mod oracles;
pub mod regularizers;
pub mod sweep;
pub mod trainer;

pub use error::{Error, Result};
pub use losses::LossSpec;
pub use models::{ModelKind, ModelSpec, ParamVector};
pub use noise::{NoiseMode, NoiseScheme, Normalization, PerturbedLayer};
pub use numerics::{Matrix, RngStream};
pub use regularizers::{EffectiveLoss, FormulaId, RegValue};
