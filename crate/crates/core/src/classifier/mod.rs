//! Single-layer linear classifier trained with negative log-likelihood.

mod model;
mod softmax;
mod train;

pub use model::{Gradient, LinearModel, LinearParams, MODEL_MAGIC};
pub use softmax::{argmax, log_softmax, nll_loss};
pub use train::{accuracy, train, Dataset, TrainConfig, TrainOutcome};
