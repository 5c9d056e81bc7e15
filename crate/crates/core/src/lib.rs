//! Cellular-automaton traffic on a grid of unsignalized intersections where
//! drivers either respect the right-hand rule (CO) or ignore it (DE).
//!
//! Vehicles move with Nagel–Schreckenberg dynamics. Two drivers arriving at
//! a free junction at the same time play a 2×2 game whose payoffs are
//! waiting times. Driver types follow one of three behavior models: fixed
//! shares, imitation with a law-abiding core, or Weibull impatience.

pub mod behavior;
pub mod config;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod games;
pub mod network;
pub mod seed;
pub mod snapshot;
pub mod state;
pub mod stats;

pub use behavior::{BehaviorModel, HazardMode, WeibullParams};
pub use error::{Error, Result};
pub use games::PayoffTable;
pub use network::{Direction, GridNetwork};
pub use state::{DriverType, SimConfig, SimState, Vehicle};
pub use stats::{RunSummary, StepMetrics};
