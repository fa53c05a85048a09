//! Growth-fragmentation-death model of plasmid copy numbers in a dividing
//! bacterial population: rate and kernel definitions, characteristic flow,
//! integrability checks, discrete and continuous simulators, and two
//! independent solvers for the dominant eigenpair.

pub mod assumptions;
pub mod cli;
pub mod config;
pub mod discrete;
pub mod eigen_fixedpoint;
pub mod eigen_operator;
pub mod error;
pub mod flow;
pub mod grid;
pub mod interp;
pub mod ode;
pub mod params;
pub mod pde;
pub mod quadrature;

pub use error::{Error, Result};
