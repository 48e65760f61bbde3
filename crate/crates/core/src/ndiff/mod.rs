//! Dense double-precision tensors with hand-written backward passes, the
//! Adam optimizer and a central-difference gradient checker.

mod adam;
mod gradcheck;
mod ops;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, relative_error, GRAD_FLOOR};
pub use ops::*;
pub use tensor::Tensor2D;
