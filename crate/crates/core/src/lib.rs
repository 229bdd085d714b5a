//! Exactness certificates for Shor semidefinite relaxations of quadratically
//! constrained quadratic programs.

pub mod error;
pub mod exactness;
pub mod gallery;
pub mod gamma;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod ratio;
pub mod rog;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use model::{QcqpInstance, QuadraticForm, Sense};
