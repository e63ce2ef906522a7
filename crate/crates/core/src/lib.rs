//! Coalitional electricity market simulation for low-voltage resistive
//! micro-grids: cost-network derivation, MST/Shapley coalition games,
//! Stackelberg pricing rounds, bounded droop voltage dynamics, and CVaR
//! risk-sharing analysis.

pub mod coalgame;
pub mod error;
pub mod griddyn;
pub mod market;
pub mod netgraph;
pub mod risk;
pub mod scenario;
pub mod sim;

mod lp;

pub use error::{Error, Result};
