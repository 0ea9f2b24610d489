//! Dense `f64` linear algebra, stable reductions, a reproducible PRNG and a
//! finite-difference gradient checker.
//!
//! Every reduction runs in a fixed order so repeated calls with the same
//! inputs are bit-identical.

mod gradcheck;
mod matrix;
mod rng;

pub use gradcheck::{grad_check, GradCheck, DEFAULT_STEP};
pub use matrix::{dot, softmax, softmax_backward, softmax_in_place, Axis, Matrix};
pub use rng::{rng_uniform, Rng};

/// Free-function form of [`Matrix::matmul`].
pub fn matmul(a: &Matrix, b: &Matrix) -> crate::Result<Matrix> {
    a.matmul(b)
}

/// Free-function form of [`Matrix::softmax_stable`].
pub fn softmax_stable(logits: &Matrix, axis: Axis) -> Matrix {
    logits.softmax_stable(axis)
}
