//! Analytic model, fixed-point solver, explicit Markov-chain oracle and
//! slot-level simulator for 802.11 DCF with finite retries, non-saturated
//! Poisson traffic, packet errors and capture.

pub mod analytic;
pub mod chain;
pub mod config;
pub mod error;
pub mod params;
pub mod sim;
pub mod solver;

pub use analytic::{Metrics, SteadyState};
pub use error::{ChainError, DomainError, ParamError, SolverError};
pub use params::{AccessMode, Scenario};
pub use sim::{SimConfig, SimMetrics};
pub use solver::{solve, Mode, Solution, SolverOptions};
