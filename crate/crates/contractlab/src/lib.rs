//! Numerical laboratory for dynamic securitisation contracts on a loan pool
//! with Markovian contagion, bank moral hazard (costly monitoring) and
//! adverse selection (two bank types differing in payment efficiency).
//!
//! The crate computes, in closed form where one exists and numerically
//! otherwise:
//!
//! * the credible set of (bad-bank, good-bank) continuation value pairs for
//!   every remaining pool size, with its piecewise lower and upper boundaries
//!   ([`credible_set`]);
//! * the investor value of the pure-moral-hazard contract, including the
//!   payment free boundary located by smooth pasting ([`pmh`]);
//! * investor value functions on both boundaries of the credible set, the
//!   inner lower boundary via Lagrangian duality over stochastic-liquidation
//!   policies with hypoexponential default-time densities ([`boundary_values`]);
//! * the recursive two-dimensional variational inequalities with gradient
//!   constraints in the interior of the credible set, by Howard policy
//!   iteration on boundary-fitted grids ([`hjb`]);
//! * closed-form optimal contract policies on the boundaries, short-term
//!   contracts with constant or delayed payments, and endogenous reservation
//!   utilities ([`contracts`]);
//! * an exact event-driven Monte Carlo simulator that reproduces every closed
//!   form above as a statistical check ([`sim`]).
//!
//! The [`cli`] module wires the pipeline behind a single binary; the
//! `examples/` directory holds one runnable example per capability.

pub mod boundary_values;
pub mod cli;
pub mod contracts;
pub mod credible_set;
mod error;
pub mod hjb;
pub mod model;
pub mod pmh;
pub mod sim;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
