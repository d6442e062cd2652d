//! Flood-scheduling controller for managed aquifer recharge on cropland: a root-zone water and
//! oxygen simulator, a run-length constrained plan enumerator, a causally calibrated
//! multivariate forecaster, and a receding-horizon controller that picks the flooding plan
//! with the most recharge that keeps root-zone oxygen above a safety threshold.

pub mod error;
pub mod forecast;
pub mod history;
pub mod kv;
pub mod metrics;
pub mod mpc;
pub mod planner;
pub mod scenario;
pub mod sim;
pub mod spectral;
pub mod types;
pub mod validate;
pub mod weather;

pub use error::{Error, Result};
pub use planner::{FloodingPlan, InitialRunState, PlanConstraints};
pub use sim::{SimParams, SimState};
pub use types::{ExogenousClues, HistoryWindow, OxygenTrace, TimeAxis, Variate};
pub use weather::{WeatherRecord, WeatherSeries};
