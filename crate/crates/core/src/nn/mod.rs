//! Small dense-network engine: matrices, MLPs with backprop, losses and SGD.

mod loss;
mod matrix;
mod mlp;
mod optim;
mod params;

pub use loss::{bce_with_logits, softmax, softmax_cross_entropy, softplus, squared_error};
pub use matrix::Matrix;
pub use mlp::{sigmoid, Activation, DenseLayer, Gradients, MlpModel, Trace};
pub use optim::{lr_at, sgd_step, sgd_step_in_place, LrSchedule, ScheduleForm};
pub use params::{LayerShape, Layout, ParamVector};
