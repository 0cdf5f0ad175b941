pub mod biortho;
pub mod cost_lab;
pub mod dd;
pub mod error;
pub mod linalg;
pub mod moment_control;
pub mod quadrature;
pub mod simulator;
pub mod specfun;
pub mod spectrum;
pub mod verification;

pub use error::{Error, Result};
