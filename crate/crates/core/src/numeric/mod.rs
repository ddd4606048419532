//! Dense numeric substrate: tensors, a differentiation tape, parameters,
//! SGD, dropout and a seeded random stream.

mod dropout;
mod grad_check;
mod optim;
mod params;
mod rng;
mod tape;
mod tensor;

pub use dropout::{dropout_mask, Mode};
pub use grad_check::{
    finite_difference_gradient, max_relative_error, relative_error, DEFAULT_STEP, RELATIVE_FLOOR,
};
pub use optim::{sgd_step, Sgd};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use rng::RngStream;
pub use tape::{MixEntry, NodeId, Tape, WindowPlan};
pub use tensor::{affine, cross_entropy, softmax, tanh_map, Tensor, PROB_FLOOR};

pub(crate) use tensor::{dot, softmax_slice};
