//! Small fully-connected regression networks: exact backpropagation, ERM
//! training with early stopping on a target MSE, and IRM training.

mod flatten;
mod gradient;
mod irm;
pub(crate) mod mlp;
mod train;

pub use flatten::{canonical_form, flatten_params, permute_units, unflatten_params};
pub use gradient::gradient;
pub use irm::{irm_penalty, train_irm, IrmSpec};
pub use mlp::{random_init, Activation, Gradients, MlpModel, Workspace};
pub use train::{train_erm, StopReason, TrainOptions, TrainOutcome};
