//! Durrmeyer-type sampling series `S_w f(x) = sum_k phi(wx - k) w int psi(wu - k) f(u) du`:
//! kernels and their moments, operator evaluation, Orlicz modulars and
//! convergence studies, plus the `durrmeyer` command-line front end.

// `!(x > 0.0)` is used on purpose throughout: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod kernel;
pub mod moments;
pub mod orlicz;
pub mod quadrature;
pub mod sampling;
pub mod signals;

pub use error::{Error, Result};
