//! Dense `f64` matrices and a tape-based reverse-mode autodiff engine.
//!
//! Values live in [`Matrix`]; trainable state lives in a [`ParamStore`]. A forward
//! pass records operations on a [`Tape`], and [`Tape::backward`] walks the tape in
//! reverse, accumulating parameter gradients into the store.
//!
//! Independent tapes can be built on different threads against a shared `&ParamStore`;
//! accumulation needs `&mut ParamStore`, so concurrent backward passes must be
//! reduced one at a time.

mod gradcheck;
mod matrix;
mod param;
mod tape;

pub use gradcheck::{grad_check, grad_check_params, GradCheckReport};
pub use matrix::Matrix;
pub use param::{Param, ParamId, ParamStore};
pub use tape::{segment_softmax, Gradients, Tape, Var};

use rand::Rng;

/// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization.
pub fn uniform_init<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Matrix {
    let bound = 1.0 / crate::math::sqrt(fan_in.max(1) as f64);
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = rng.random_range(-bound..=bound);
    }
    m
}
