//! Stochastic vector quantisers.
//!
//! An SVQ encodes an input `x` as `n` independent draws from a posterior
//! `Pr(y|x)` over `M` codes and decodes by averaging the drawn reconstruction
//! vectors. Training minimises an upper bound `D1 + D2` on the resulting
//! mean squared distortion by gradient descent.

pub mod analysis;
pub mod datagen;
pub mod error;
pub mod gradcheck;
pub mod leakage;
pub mod matrix;
pub mod model;
pub mod objective;
pub mod persist;
pub mod posterior;
pub mod sampling;
pub mod topology;
pub mod trainer;

pub use error::{Result, SvqError};
pub use leakage::LeakageKernel;
pub use matrix::Matrix;
pub use model::{init_model, sigmoid, Codebook, ResponseModel, Svq};
pub use objective::{Batch, Gradients, ObjectiveValue};
pub use posterior::{apply_leakage, posterior_finite, posterior_infinite, PosteriorVector};
pub use sampling::{encode, mean_reconstruction, reconstruct, CodeSample};
pub use topology::{Layout, Topology};
pub use trainer::{train, train_chain, ChainSpec, LrSchedule, Trace, TrainConfig};
