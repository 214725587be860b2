//! Minimal reverse-mode automatic differentiation over dense 64-bit matrices.
//!
//! A [`Tape`] records every operation as it executes; [`Tape::backward`]
//! sweeps it in reverse and accumulates gradients into leaf nodes. Tensors
//! are treated as `rows × cols` matrices (last dimension = columns). The
//! only broadcasting is scalar scaling and the row weight of `rmsnorm`.
//!
//! Gradients accumulate across repeated `backward` calls until
//! [`Tape::zero_grad`] is invoked.

pub mod kernels;
mod ops;
mod tape;
mod tensor;

pub use ops::{concat_cols, concat_rows, sum_all};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
