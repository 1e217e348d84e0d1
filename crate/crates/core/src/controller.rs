//! Soaring mode logic.
//!
//! Three modes partition the flight: powered climb, motor-off cruise along
//! the waypoint course, and thermal loiter around the estimated core.
//! Altitude limits take precedence over every other transition.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Result, SoarError};
use crate::estimator::{
    self, initialize, predict, wind_corrected_displacement, EstimatorState, InitConfig,
    NoiseConfig, UpdateInfo,
};
use crate::glider::{coordinated_bank, sink_rate, GliderState, PolarCoefficients, VarioSample, GRAVITY};
use crate::thermal_env::WindVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlightMode {
    ClimbPowered,
    GlideCruise,
    ThermalLoiter,
}

impl FlightMode {
    pub const ALL: [FlightMode; 3] = [
        FlightMode::ClimbPowered,
        FlightMode::GlideCruise,
        FlightMode::ThermalLoiter,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FlightMode::ClimbPowered => "CLIMB_POWERED",
            FlightMode::GlideCruise => "GLIDE_CRUISE",
            FlightMode::ThermalLoiter => "THERMAL_LOITER",
        }
    }

    pub fn motor_on(&self) -> bool {
        matches!(self, FlightMode::ClimbPowered)
    }
}

impl fmt::Display for FlightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FlightMode {
    type Err = SoarError;

    fn from_str(s: &str) -> Result<Self> {
        FlightMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| SoarError::Parse(format!("unknown flight mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurnDirection {
    /// Clockwise seen from above: right turns.
    Cw,
    Ccw,
}

impl TurnDirection {
    pub fn sign(&self) -> f64 {
        match self {
            TurnDirection::Cw => 1.0,
            TurnDirection::Ccw => -1.0,
        }
    }

    /// Keep turning the way the aircraft already banks; level flight picks CCW.
    pub fn on_entry(bank: f64) -> Self {
        if bank.abs() > 5f64.to_radians() && bank > 0.0 {
            TurnDirection::Cw
        } else {
            TurnDirection::Ccw
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoiterCommand {
    pub center_north: f64,
    pub center_east: f64,
    pub radius: f64,
    pub direction: TurnDirection,
}

fn bool_or_int<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(i64),
    }
    Ok(match Flag::deserialize(d)? {
        Flag::Bool(b) => b,
        Flag::Int(i) => i != 0,
    })
}

/// Every controller tunable. Keys follow the autopilot's parameter names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoarConfig {
    #[serde(rename = "SOAR_ENABLE", deserialize_with = "bool_or_int")]
    pub enable: bool,
    #[serde(rename = "SOAR_VSPEED")]
    pub vspeed_trigger: f64,
    #[serde(rename = "SOAR_ALT_MIN")]
    pub alt_min: f64,
    #[serde(rename = "SOAR_ALT_CUTOFF")]
    pub alt_cutoff: f64,
    #[serde(rename = "SOAR_ALT_MAX")]
    pub alt_max: f64,
    #[serde(rename = "SOAR_MIN_THML_S")]
    pub min_thermal_s: f64,
    #[serde(rename = "SOAR_MIN_CRSE_S")]
    pub min_cruise_s: f64,
    #[serde(rename = "SOAR_POLAR_CD0")]
    pub polar_cd0: f64,
    #[serde(rename = "SOAR_POLAR_B")]
    pub polar_b: f64,
    #[serde(rename = "SOAR_POLAR_K")]
    pub polar_k: f64,
    #[serde(rename = "SOAR_DIST_AHEAD")]
    pub dist_ahead: f64,
    #[serde(rename = "SOAR_Q1")]
    pub q1: f64,
    #[serde(rename = "SOAR_Q2")]
    pub q2: f64,
    #[serde(rename = "SOAR_R")]
    pub r: f64,
    #[serde(rename = "WP_LOITER_RAD")]
    pub loiter_radius: f64,

    /// Target airspeed in every mode, m/s.
    pub cruise_airspeed: f64,
    /// Overrides the polar-derived circling sink used by the exit test.
    pub k_sink: Option<f64>,
    /// Low-pass constant of the detection filter.
    pub vario_tc: f64,
    pub init_radius: f64,
    pub init_strength_std: f64,
    pub init_radius_std: f64,
}

impl Default for SoarConfig {
    fn default() -> Self {
        let polar = PolarCoefficients::default();
        let noise = NoiseConfig::default();
        let init = InitConfig::default();
        Self {
            enable: true,
            vspeed_trigger: 0.7,
            alt_min: 50.0,
            alt_cutoff: 150.0,
            alt_max: 300.0,
            min_thermal_s: 20.0,
            min_cruise_s: 30.0,
            polar_cd0: polar.c_d0,
            polar_b: polar.b,
            polar_k: polar.k,
            dist_ahead: init.dist_ahead,
            q1: noise.q1,
            q2: noise.q2,
            r: noise.r,
            loiter_radius: 15.0,
            cruise_airspeed: 9.0,
            k_sink: None,
            vario_tc: 0.03,
            init_radius: init.radius,
            init_strength_std: init.strength_std,
            init_radius_std: init.radius_std,
        }
    }
}

impl SoarConfig {
    pub fn polar(&self) -> PolarCoefficients {
        PolarCoefficients::new(self.polar_cd0, self.polar_b, self.polar_k)
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            q1: self.q1,
            q2: self.q2,
            r: self.r,
        }
    }

    pub fn init_config(&self) -> InitConfig {
        InitConfig {
            dist_ahead: self.dist_ahead,
            radius: self.init_radius,
            strength_std: self.init_strength_std,
            radius_std: self.init_radius_std,
            position_std: None,
        }
    }

    /// Sink while circling at `WP_LOITER_RAD` and cruise airspeed, unless
    /// overridden.
    pub fn k_sink(&self) -> Result<f64> {
        match self.k_sink {
            Some(k) => Ok(k),
            None => {
                let v = self.cruise_airspeed;
                let bank = coordinated_bank(v, self.loiter_radius, GRAVITY);
                sink_rate(&self.polar(), v, bank)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(SoarError::scenario(field, reason));
        if !(self.alt_min < self.alt_cutoff && self.alt_cutoff < self.alt_max) {
            return bad(
                "SOAR_ALT_MIN/SOAR_ALT_CUTOFF/SOAR_ALT_MAX",
                "must satisfy ALT_MIN < ALT_CUTOFF < ALT_MAX",
            );
        }
        if !(self.loiter_radius > 0.0) {
            return bad("WP_LOITER_RAD", "must be positive");
        }
        if !(self.min_thermal_s >= 0.0) {
            return bad("SOAR_MIN_THML_S", "must be non-negative");
        }
        if !(self.min_cruise_s >= 0.0) {
            return bad("SOAR_MIN_CRSE_S", "must be non-negative");
        }
        if !(self.cruise_airspeed > 0.0) {
            return bad("cruise_airspeed", "must be positive");
        }
        if !(self.vario_tc > 0.0 && self.vario_tc <= 1.0) {
            return bad("vario_tc", "must lie in (0, 1]");
        }
        if !(self.init_radius > 0.0) {
            return bad("init_radius", "must be positive");
        }
        if !(self.dist_ahead >= 0.0) {
            return bad("SOAR_DIST_AHEAD", "must be non-negative");
        }
        self.polar().validate().map_err(|e| SoarError::scenario("SOAR_POLAR_*", e.to_string()))?;
        self.noise().validate().map_err(|e| SoarError::scenario("SOAR_Q1/SOAR_Q2/SOAR_R", e.to_string()))?;
        self.k_sink()?;
        Ok(())
    }
}

/// Thermal trigger while cruising. Comparisons are strict.
pub fn detect(
    e_dot_filt: f64,
    mode: FlightMode,
    time_since_exit: f64,
    altitude: f64,
    config: &SoarConfig,
) -> bool {
    mode == FlightMode::GlideCruise
        && e_dot_filt > config.vspeed_trigger
        && time_since_exit >= config.min_cruise_s
        && altitude > config.alt_min
        && altitude < config.alt_max
}

/// Climb the model predicts when circling at `loiter_radius`, net of the
/// circling sink.
pub fn predicted_climb(state: &EstimatorState, loiter_radius: f64, k_sink: f64) -> f64 {
    let r = state.radius();
    state.strength() * (-(loiter_radius * loiter_radius) / (r * r)).exp() - k_sink
}

/// Weak-thermal exit. Uses only the model, never the instantaneous vario.
pub fn exit_check(
    state: &EstimatorState,
    loiter_radius: f64,
    k_sink: f64,
    config: &SoarConfig,
    time_in_thermal: f64,
) -> bool {
    time_in_thermal >= config.min_thermal_s
        && predicted_climb(state, loiter_radius, k_sink) < config.vspeed_trigger
}

/// Orbit the estimated core at the configured radius.
pub fn loiter_target(
    state: &EstimatorState,
    aircraft: &GliderState,
    config: &SoarConfig,
    direction: TurnDirection,
) -> LoiterCommand {
    let (x, y) = state.core_offset();
    LoiterCommand {
        center_north: aircraft.north + x,
        center_east: aircraft.east + y,
        radius: config.loiter_radius,
        direction,
    }
}

pub fn altitude_mode_step(mode: FlightMode, altitude: f64, config: &SoarConfig) -> FlightMode {
    match mode {
        FlightMode::GlideCruise if altitude <= config.alt_min => FlightMode::ClimbPowered,
        FlightMode::ClimbPowered if altitude >= config.alt_cutoff => FlightMode::GlideCruise,
        FlightMode::ThermalLoiter if altitude >= config.alt_max => FlightMode::GlideCruise,
        FlightMode::ThermalLoiter if altitude <= config.alt_min => FlightMode::ClimbPowered,
        m => m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionReason {
    AltitudeLimit,
    ThermalDetected,
    WeakThermal,
    Geofence,
    EstimatorReset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeTransition {
    pub time: f64,
    pub from: FlightMode,
    pub to: FlightMode,
    pub reason: TransitionReason,
    pub altitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Guidance {
    /// Follow the waypoint course.
    Cruise,
    Loiter(LoiterCommand),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickInputs {
    pub state: GliderState,
    pub vario: VarioSample,
    pub wind: WindVector,
    pub inside_fence: bool,
}

/// Inputs and diagnostics of the EKF step taken during a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfStep {
    pub dx: f64,
    pub dy: f64,
    pub observation: f64,
    pub info: UpdateInfo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutput {
    pub mode: FlightMode,
    pub motor: bool,
    pub target_airspeed: f64,
    pub guidance: Guidance,
    pub estimator: Option<EstimatorState>,
    pub ekf_step: Option<EkfStep>,
    pub transition: Option<ModeTransition>,
    /// Cruise should resume toward the nearest waypoint (after a fence breach).
    pub reselect_waypoint: bool,
    pub estimator_reset: bool,
}

#[derive(Debug, Clone)]
struct Encounter {
    estimator: EstimatorState,
    direction: TurnDirection,
    entered_at: f64,
    last_north: f64,
    last_east: f64,
    last_time: f64,
}

/// The mode state machine. `tick` is its only mutation point.
#[derive(Debug, Clone)]
pub struct SoarController {
    config: SoarConfig,
    k_sink: f64,
    mode: FlightMode,
    encounter: Option<Encounter>,
    last_exit_time: Option<f64>,
}

impl SoarController {
    pub fn new(config: SoarConfig, initial: &GliderState) -> Result<Self> {
        config.validate()?;
        let k_sink = config.k_sink()?;
        let mode = if initial.motor_on || initial.altitude <= config.alt_min {
            FlightMode::ClimbPowered
        } else {
            FlightMode::GlideCruise
        };
        Ok(Self {
            config,
            k_sink,
            mode,
            encounter: None,
            last_exit_time: None,
        })
    }

    pub fn mode(&self) -> FlightMode {
        self.mode
    }

    pub fn config(&self) -> &SoarConfig {
        &self.config
    }

    pub fn k_sink(&self) -> f64 {
        self.k_sink
    }

    pub fn estimator(&self) -> Option<&EstimatorState> {
        self.encounter.as_ref().map(|e| &e.estimator)
    }

    fn time_since_exit(&self, now: f64) -> f64 {
        self.last_exit_time.map_or(f64::INFINITY, |t| now - t)
    }

    pub fn tick(&mut self, inputs: &TickInputs) -> TickOutput {
        let cfg = &self.config;
        let st = &inputs.state;
        let now = st.time;
        let from = self.mode;
        let mut ekf_step = None;
        let mut reselect_waypoint = false;
        let mut estimator_reset = false;

        let by_altitude = altitude_mode_step(from, st.altitude, cfg);
        let (to, reason) = if by_altitude != from {
            (by_altitude, Some(TransitionReason::AltitudeLimit))
        } else {
            match from {
                FlightMode::ClimbPowered => (from, None),
                FlightMode::GlideCruise => {
                    let triggered = cfg.enable
                        && inputs.inside_fence
                        && detect(
                            inputs.vario.e_dot_filt,
                            from,
                            self.time_since_exit(now),
                            st.altitude,
                            cfg,
                        );
                    if triggered {
                        self.encounter = Some(Encounter {
                            estimator: initialize(
                                inputs.vario.e_dot_filt,
                                st.heading,
                                &cfg.init_config(),
                            ),
                            direction: TurnDirection::on_entry(st.bank),
                            entered_at: now,
                            last_north: st.north,
                            last_east: st.east,
                            last_time: now,
                        });
                        (FlightMode::ThermalLoiter, Some(TransitionReason::ThermalDetected))
                    } else {
                        (from, None)
                    }
                }
                FlightMode::ThermalLoiter => {
                    if !inputs.inside_fence {
                        reselect_waypoint = true;
                        (FlightMode::GlideCruise, Some(TransitionReason::Geofence))
                    } else {
                        match self.encounter.as_mut() {
                            None => {
                                estimator_reset = true;
                                (FlightMode::GlideCruise, Some(TransitionReason::EstimatorReset))
                            }
                            Some(enc) => {
                                let dt = now - enc.last_time;
                                let (dx, dy) = wind_corrected_displacement(
                                    st.north - enc.last_north,
                                    st.east - enc.last_east,
                                    inputs.wind,
                                    dt,
                                );
                                enc.last_north = st.north;
                                enc.last_east = st.east;
                                enc.last_time = now;
                                let noise = cfg.noise();
                                let prior = predict(&enc.estimator, dx, dy, &noise);
                                let observation = inputs.vario.e_dot_net;
                                match estimator::update(&prior, observation, &noise) {
                                    Ok((post, info)) => {
                                        enc.estimator = post;
                                        ekf_step = Some(EkfStep {
                                            dx,
                                            dy,
                                            observation,
                                            info,
                                        });
                                        if exit_check(
                                            &post,
                                            cfg.loiter_radius,
                                            self.k_sink,
                                            cfg,
                                            now - enc.entered_at,
                                        ) {
                                            (FlightMode::GlideCruise, Some(TransitionReason::WeakThermal))
                                        } else {
                                            (from, None)
                                        }
                                    }
                                    Err(_) => {
                                        estimator_reset = true;
                                        (FlightMode::GlideCruise, Some(TransitionReason::EstimatorReset))
                                    }
                                }
                            }
                        }
                    }
                }
            }
        };

        let transition = reason.map(|reason| ModeTransition {
            time: now,
            from,
            to,
            reason,
            altitude: st.altitude,
        });
        if let Some(tr) = &transition {
            log::info!(
                "t={:.1}s {} -> {} ({:?}) at {:.1} m",
                tr.time,
                tr.from,
                tr.to,
                tr.reason,
                tr.altitude
            );
            if from == FlightMode::ThermalLoiter {
                self.last_exit_time = Some(now);
                self.encounter = None;
            }
        }
        self.mode = to;

        let (guidance, estimator) = match (&self.encounter, to) {
            (Some(enc), FlightMode::ThermalLoiter) => (
                Guidance::Loiter(loiter_target(&enc.estimator, st, cfg, enc.direction)),
                Some(enc.estimator),
            ),
            _ => (Guidance::Cruise, None),
        };

        TickOutput {
            mode: to,
            motor: to.motor_on(),
            target_airspeed: cfg.cruise_airspeed,
            guidance,
            estimator,
            ekf_step,
            transition,
            reselect_waypoint,
            estimator_reset,
        }
    }
}
