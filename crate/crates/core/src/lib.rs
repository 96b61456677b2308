//! Pseudo-periodic planar orbits of the symmetric 4- and 6-body problem.
//!
//! The crate couples four pieces:
//!
//! * [`dynamics`]: reduced polar-coordinate equations of motion and the
//!   Cartesian N-body oracle they are checked against;
//! * [`integrator`]: deterministic Runge-Kutta integration with explicit
//!   failure reporting;
//! * [`shooting`]: the return-condition residual and its sup-norm error;
//! * [`solver`]: an adaptive stochastic derivative-free equation solver.
//!
//! [`harness`] ties them to the published solution tables and [`cli`]
//! exposes everything on the command line.

pub mod cli;
pub mod dynamics;
pub mod harness;
pub mod integrator;
pub mod shooting;
pub mod solver;
