//! Adaptive finite element solver for total-variation (ROF) denoising with
//! Crouzeix–Raviart primal and Raviart–Thomas dual discretizations.

pub mod afem;
pub mod bench;
pub mod cli;
pub mod convex;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod fem;
pub mod mesh;
pub mod rof;

pub use error::{Error, Result};
