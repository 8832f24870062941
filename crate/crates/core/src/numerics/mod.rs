//! Dense numerics: tensors, parameter sets, the GRU cell, reverse-mode
//! differentiation and finite-difference gradient checking.

mod gradcheck;
mod gru;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{check_gradient, check_gradient_steps, relative_error, GradCheckReport, ParamCheck};
pub use gru::{gru_cell_forward, GruCellParams, GruNodes};
pub use params::{glorot_uniform, ParamId, ParamSet, Parameter};
pub use tape::{NodeId, Tape};
pub use tensor::{dot, sigmoid, softmax, Tensor};
