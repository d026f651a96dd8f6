//! Monte Carlo harness for the coherent synthetic aperture uplink: scenario
//! files, deterministic trials, BLER sweeps and CSV/JSON output.

pub mod config;
pub mod error;
pub mod output;
pub mod seed;
pub mod sweep;
pub mod trial;

pub use config::ScenarioConfig;
pub use error::{Result, SimError};
pub use sweep::{run_sweep, BlerCurve, BlerPoint};
pub use trial::{Scenario, TrialRecord, UeOutcome};
