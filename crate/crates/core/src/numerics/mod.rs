//! Complex linear algebra at small fixed sizes and the reverse-mode
//! differentiation engine behind the trainable beamformer.

pub mod complex;
pub mod tape;
pub mod tensor;

pub use complex::{hermitian_solve, C64, CMat, CVec, CholeskyC};
pub use tape::{softmax_value, Gradients, NodeId, Tape};
pub use tensor::{SpdFactor, Tensor, PIVOT_EPS};
