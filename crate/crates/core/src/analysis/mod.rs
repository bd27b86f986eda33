//! Asymptotic analysis, loss-ratio statistics and load sweeps.

pub mod density;
pub mod stats;
pub mod sweep;

pub use density::{de_threshold, density_evolution, DeResult};
pub use stats::{aggregate, wilson_interval, PlrEstimate, Z_95};
pub use sweep::{load_at_target_plr, sweep, StopRule, SweepResult, SweepRow, CSV_HEADER};
