//! Upper and lower values of a two-insurer zero-sum reinsurance game.
//!
//! Two insurers with compound-Poisson surplus processes choose reinsurance
//! controls; player 1 maximizes and player 2 minimizes a discounted payoff of
//! the surplus difference until it leaves an interval `[a, b]`. The crate
//! solves the Bellman-Isaacs equations on a grid by alternating policy
//! iteration and checks the result against an exact piecewise-deterministic
//! Monte Carlo simulation of the controlled difference process.

pub mod cli;
pub mod error;
pub mod model;
pub mod operator;
pub mod quadrature;
pub mod scenario;
pub mod simulator;
pub mod solver;

pub use error::{GameError, Result};
