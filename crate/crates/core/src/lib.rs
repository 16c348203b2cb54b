pub mod bernstein;
pub mod cli;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod laplace;
pub mod ops;
mod product;
pub mod quadrature;
pub mod sim;
pub mod solver;

pub use error::{CbfError, Result};
