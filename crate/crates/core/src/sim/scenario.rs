//! Scenario files.
//!
//! A scenario is a TOML document. Controller parameters live in `[params]`
//! under the autopilot's own names (`SOAR_VSPEED`, `WP_LOITER_RAD`, ...).
//!
//! ```toml
//! duration = 600.0
//! seed = 7
//! vario_noise_std = 0.1
//! geofence = [[-400.0, -400.0], [-400.0, 400.0], [1200.0, 400.0], [1200.0, -400.0]]
//!
//! [wind]
//! v_north = 0.0
//! v_east = 1.0
//!
//! [initial]
//! altitude = 120.0
//! heading_deg = 0.0
//!
//! [[waypoint]]
//! north = 1000.0
//! east = 0.0
//!
//! [[thermal]]
//! strength = 2.5
//! radius = 50.0
//! core_north = 400.0
//! core_east = 10.0
//!
//! [params]
//! SOAR_VSPEED = 0.7
//! WP_LOITER_RAD = 15.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::SoarConfig;
use crate::error::{Result, SoarError};
use crate::glider::{DynamicsParams, GliderState, SEA_LEVEL_DENSITY};
use crate::polar_fit::compute_k;
use crate::sim::nav::{Geofence, NavConfig, Waypoint};
use crate::thermal_env::{ThermalParams, WindVector};

/// Initial aircraft state as written in a scenario file (angles in degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialState {
    pub north: f64,
    pub east: f64,
    pub altitude: f64,
    pub airspeed: f64,
    pub heading_deg: f64,
    pub bank_deg: f64,
    pub motor_on: bool,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            north: 0.0,
            east: 0.0,
            altitude: 100.0,
            airspeed: 9.0,
            heading_deg: 0.0,
            bank_deg: 0.0,
            motor_on: false,
        }
    }
}

impl From<InitialState> for GliderState {
    fn from(s: InitialState) -> Self {
        GliderState {
            north: s.north,
            east: s.east,
            altitude: s.altitude,
            airspeed: s.airspeed,
            heading: s.heading_deg.to_radians(),
            bank: s.bank_deg.to_radians(),
            motor_on: s.motor_on,
            time: 0.0,
        }
    }
}

/// Airframe geometry; when present it supplies `SOAR_POLAR_K` unless the
/// parameter is given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Airframe {
    pub mass: f64,
    pub wing_area: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_rho() -> f64 {
    SEA_LEVEL_DENSITY
}

fn default_tick_rate() -> f64 {
    5.0
}

fn default_substeps() -> u32 {
    4
}

fn default_drift() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration: f64,
    #[serde(default = "default_tick_rate")]
    pub tick_rate: f64,
    #[serde(default = "default_substeps")]
    pub physics_substeps: u32,
    #[serde(default)]
    pub seed: u64,
    /// Std of the additive Gaussian noise on the netto reading, m/s.
    #[serde(default)]
    pub vario_noise_std: f64,
    /// Fraction of the wind speed at which thermal cores drift.
    #[serde(default = "default_drift")]
    pub thermal_drift_factor: f64,
    #[serde(default)]
    pub geofence: Option<Geofence>,
    #[serde(default)]
    pub wind: WindVector,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default, rename = "waypoint")]
    pub waypoints: Vec<Waypoint>,
    #[serde(default, rename = "thermal")]
    pub thermals: Vec<ThermalParams>,
    #[serde(default)]
    pub airframe: Option<Airframe>,
    #[serde(default)]
    pub params: SoarConfig,
    #[serde(default)]
    pub dynamics: DynamicsParams,
    #[serde(default)]
    pub nav: NavConfig,
}

impl Scenario {
    /// Minimal scenario: still air, no thermals, one waypoint far north.
    pub fn new(duration: f64, config: SoarConfig) -> Self {
        Scenario {
            duration,
            tick_rate: default_tick_rate(),
            physics_substeps: default_substeps(),
            seed: 0,
            vario_noise_std: 0.0,
            thermal_drift_factor: 1.0,
            geofence: None,
            wind: WindVector::CALM,
            initial: InitialState::default(),
            waypoints: vec![Waypoint::new(100_000.0, 0.0)],
            thermals: Vec::new(),
            airframe: None,
            params: config,
            dynamics: DynamicsParams::default(),
            nav: NavConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut scenario: Scenario =
            toml::from_str(text).map_err(|e| SoarError::Parse(e.to_string()))?;
        if let Some(af) = scenario.airframe {
            let explicit_k = toml::from_str::<toml::Table>(text)
                .ok()
                .and_then(|t| t.get("params").and_then(|p| p.get("SOAR_POLAR_K")).cloned())
                .is_some();
            if !explicit_k {
                scenario.params.polar_k = compute_k(af.mass, af.wing_area, af.rho, scenario.dynamics.gravity)
                    .map_err(|e| SoarError::scenario("airframe", e.to_string()))?;
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SoarError::Parse(e.to_string()))
    }

    pub fn initial_state(&self) -> GliderState {
        self.initial.into()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(SoarError::scenario(field, reason));
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad("duration", "must be positive");
        }
        if !(self.tick_rate > 0.0) || !self.tick_rate.is_finite() {
            return bad("tick_rate", "must be positive");
        }
        if self.physics_substeps == 0 {
            return bad("physics_substeps", "must be at least 1");
        }
        if !(self.vario_noise_std >= 0.0) {
            return bad("vario_noise_std", "must be non-negative");
        }
        if !self.wind.is_finite() {
            return bad("wind", "components must be finite");
        }
        if !self.thermal_drift_factor.is_finite() {
            return bad("thermal_drift_factor", "must be finite");
        }
        if self.waypoints.is_empty() {
            return bad("waypoint", "at least one waypoint is required");
        }
        for (i, th) in self.thermals.iter().enumerate() {
            th.validate()
                .map_err(|e| SoarError::scenario(format!("thermal[{i}]"), e.to_string()))?;
        }
        if let Some(fence) = &self.geofence {
            for (i, wp) in self.waypoints.iter().enumerate() {
                if !fence.contains(wp.north, wp.east) {
                    return Err(SoarError::scenario(
                        format!("waypoint[{i}]"),
                        "lies outside the geofence",
                    ));
                }
            }
        }
        let d = &self.dynamics;
        if !(d.bank_time_constant > 0.0 && d.airspeed_time_constant > 0.0) {
            return bad("dynamics", "time constants must be positive");
        }
        if !(d.max_bank > 0.0 && d.max_bank < std::f64::consts::FRAC_PI_2) {
            return bad("dynamics.max_bank", "must lie in (0, π/2)");
        }
        let nav_limit = self.nav.cruise_bank_limit_deg.max(self.nav.loiter_bank_limit_deg);
        if nav_limit.to_radians() > d.max_bank {
            return bad("nav", "bank limits exceed dynamics.max_bank");
        }
        if !(self.nav.loiter_lookahead > 0.0) {
            return bad("nav.loiter_lookahead", "must be positive");
        }
        self.initial_state().validate()?;
        self.params.validate()
    }
}
