//! Dense `f64` tensors and a tape-based reverse-mode differentiator.

mod tape;
mod tensor;

pub use tape::{Tape, Var};
pub use tensor::Tensor;
