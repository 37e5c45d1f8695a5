//! Finite-volume solvers for heat and Keller–Segel type chemotaxis systems
//! with homogeneous Neumann data, together with discrete checks of the
//! gradient and Orlicz-type a-priori estimates that drive compactness
//! arguments for L¹ data.

pub mod chemotaxis;
pub mod convergence;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod heat;
pub mod io;
pub mod linsolve;
pub mod tolerances;
pub mod verifier;
pub mod weak;

pub use error::{Error, Result};
