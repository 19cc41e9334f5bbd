//! Self-interacting random walks built from finitely many step distributions.
//!
//! The core math is generic over the scalar (`f32`/`f64`, see [`scalar::Real`]);
//! the aliases below fix it to `f64`, which is what the CLI and harness use.

pub mod cli;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lyapunov;
pub mod measure;
pub mod quadrature;
pub mod scalar;
pub mod sphere;
pub mod transform;
pub mod walk;

pub use error::{Error, Result};

pub type Measure = measure::FiniteMeasure<f64>;
pub type Mat = linalg::Matrix<f64>;
pub type Sym = linalg::SymMatrix<f64>;
pub type Report = transform::TransformReport<f64>;
pub type Params = lyapunov::PhiParams<f64>;
