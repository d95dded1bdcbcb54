//! Minimal tape-based reverse-mode differentiation over [`Matrix`](crate::tensor::Matrix) values.

mod grad_check;
mod tape;

pub use grad_check::{finite_diff_check, rel_error, GradCheckReport};
pub use tape::{Gradients, Tape, Var};
