//! Deterministic scenario harness.

pub mod nav;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use nav::{cruise_navigation, loiter_tracking, Geofence, NavConfig, Waypoint};
pub use run::{run, RunMetrics, RunOutput, TelemetryRow, TELEMETRY_HEADER};
pub use scenario::Scenario;
pub use sweep::{radius_sweep, SweepConfig, SweepResult};
