//! Point-mass sailplane: drag-polar sink, kinematics and variometer synthesis.
//!
//! Frame conventions: `north`/`east` in metres on a flat local tangent plane,
//! heading measured clockwise from north, positive bank turns right
//! (heading increasing).

use serde::{Deserialize, Serialize};

use crate::error::{Result, SoarError};
use crate::thermal_env::WindVector;

pub const GRAVITY: f64 = 9.806_65;
pub const SEA_LEVEL_DENSITY: f64 = 1.225;

/// Drag-polar constants. `k` is the lift-coefficient scale (C_L = k / v²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarCoefficients {
    pub c_d0: f64,
    pub b: f64,
    pub k: f64,
}

impl Default for PolarCoefficients {
    fn default() -> Self {
        Self {
            c_d0: 0.027,
            b: 0.031,
            k: 25.6,
        }
    }
}

impl PolarCoefficients {
    pub fn new(c_d0: f64, b: f64, k: f64) -> Self {
        Self { c_d0, b, k }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("c_d0", self.c_d0), ("b", self.b), ("k", self.k)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SoarError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// Still-air sink rate (positive down) at airspeed `v` and bank `bank`.
pub fn sink_rate(polar: &PolarCoefficients, v: f64, bank: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() || !(bank.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(SoarError::InvalidFlightCondition { airspeed: v, bank });
    }
    let cl = polar.k / (v * v);
    let cos_bank = bank.cos();
    Ok(v * (polar.c_d0 / cl + polar.b * cl / (cos_bank * cos_bank)))
}

/// Bank angle of a coordinated level turn of the given radius.
pub fn coordinated_bank(v: f64, radius: f64, g: f64) -> f64 {
    (v * v / (g * radius)).atan()
}

/// Finite-difference rate of change of total specific energy `h + v²/2g`.
pub fn specific_energy_rate(
    h_prev: f64,
    h_now: f64,
    v_prev: f64,
    v_now: f64,
    dt: f64,
    g: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(SoarError::NonPositiveTimeStep(dt));
    }
    let e_prev = h_prev + v_prev * v_prev / (2.0 * g);
    let e_now = h_now + v_now * v_now / (2.0 * g);
    Ok((e_now - e_prev) / dt)
}

/// Netto vario: energy rate corrected for the airframe's own sink.
pub fn netto(e_dot: f64, polar: &PolarCoefficients, v: f64, bank: f64) -> Result<f64> {
    Ok(e_dot + sink_rate(polar, v, bank)?)
}

/// One step of the first-order low-pass used for thermal detection.
pub fn lowpass_step(prev_filt: f64, e_dot_net: f64, t_c: f64) -> Result<f64> {
    if !(t_c > 0.0 && t_c <= 1.0) {
        return Err(SoarError::FilterConstant(t_c));
    }
    Ok(t_c * e_dot_net + (1.0 - t_c) * prev_filt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GliderState {
    pub north: f64,
    pub east: f64,
    pub altitude: f64,
    pub airspeed: f64,
    pub heading: f64,
    pub bank: f64,
    pub motor_on: bool,
    pub time: f64,
}

impl GliderState {
    pub fn validate(&self) -> Result<()> {
        if !(self.airspeed > 0.0) {
            return Err(SoarError::scenario("initial.airspeed", "must be positive"));
        }
        if !(self.bank.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(SoarError::scenario("initial.bank", "must be within ±90°"));
        }
        if !(self.altitude >= 0.0) {
            return Err(SoarError::scenario("initial.altitude", "must be non-negative"));
        }
        Ok(())
    }

    /// Ground velocity (north, east) including wind.
    pub fn ground_velocity(&self, wind: WindVector) -> (f64, f64) {
        (
            self.airspeed * self.heading.cos() + wind.v_north,
            self.airspeed * self.heading.sin() + wind.v_east,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightCommands {
    pub target_bank: f64,
    pub target_airspeed: f64,
    pub motor: bool,
}

/// Actuator and propulsion parameters of the truth model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsParams {
    pub bank_time_constant: f64,
    pub airspeed_time_constant: f64,
    /// Climb rate added while the motor runs, m/s.
    pub motor_climb_rate: f64,
    /// Largest bank the actuators accept, rad.
    pub max_bank: f64,
    pub gravity: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            bank_time_constant: 0.5,
            airspeed_time_constant: 0.5,
            motor_climb_rate: 2.0,
            max_bank: 60f64.to_radians(),
            gravity: GRAVITY,
        }
    }
}

/// Advance the point-mass model by `dt`.
///
/// Bank and airspeed relax exponentially toward their targets. Altitude
/// follows the energy balance `d/dt (h + v²/2g) = lift - sink (+ motor)`, so
/// airspeed changes trade against height.
pub fn step_dynamics(
    state: &GliderState,
    commands: &FlightCommands,
    env_lift: f64,
    wind: WindVector,
    polar: &PolarCoefficients,
    params: &DynamicsParams,
    dt: f64,
) -> Result<GliderState> {
    if !(dt > 0.0) {
        return Err(SoarError::NonPositiveTimeStep(dt));
    }
    if !commands.target_bank.is_finite() || commands.target_bank.abs() > params.max_bank {
        return Err(SoarError::InvalidCommand(format!(
            "target bank {} outside ±{}",
            commands.target_bank, params.max_bank
        )));
    }
    if !(commands.target_airspeed > 0.0) || !commands.target_airspeed.is_finite() {
        return Err(SoarError::InvalidCommand(format!(
            "target airspeed {}",
            commands.target_airspeed
        )));
    }
    let g = params.gravity;

    let bank_decay = (-dt / params.bank_time_constant).exp();
    let bank = commands.target_bank + (state.bank - commands.target_bank) * bank_decay;
    let speed_decay = (-dt / params.airspeed_time_constant).exp();
    let airspeed =
        commands.target_airspeed + (state.airspeed - commands.target_airspeed) * speed_decay;

    let mean_bank = 0.5 * (state.bank + bank);
    let mean_speed = 0.5 * (state.airspeed + airspeed);
    let turn_rate = g * mean_bank.tan() / mean_speed;
    let heading_change = turn_rate * dt;
    // Chord direction of a constant-rate arc.
    let track = state.heading + 0.5 * heading_change;
    let north = state.north + (mean_speed * track.cos() + wind.v_north) * dt;
    let east = state.east + (mean_speed * track.sin() + wind.v_east) * dt;

    let sink = sink_rate(polar, airspeed, bank)?;
    let motor = if commands.motor {
        params.motor_climb_rate
    } else {
        0.0
    };
    let kinetic = (airspeed * airspeed - state.airspeed * state.airspeed) / (2.0 * g);
    let altitude = (state.altitude + (env_lift - sink + motor) * dt - kinetic).max(0.0);

    Ok(GliderState {
        north,
        east,
        altitude,
        airspeed,
        heading: wrap_angle(state.heading + heading_change),
        bank,
        motor_on: commands.motor,
        time: state.time + dt,
    })
}

/// Wrap an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarioSample {
    pub e_dot: f64,
    pub e_dot_net: f64,
    pub e_dot_filt: f64,
    pub time: f64,
}

/// Stateful variometer fed with successive altitude and airspeed samples.
#[derive(Debug, Clone)]
pub struct Variometer {
    polar: PolarCoefficients,
    t_c: f64,
    g: f64,
    prev_altitude: f64,
    prev_airspeed: f64,
    filt: Option<f64>,
}

impl Variometer {
    pub fn new(polar: PolarCoefficients, t_c: f64, g: f64, initial: &GliderState) -> Result<Self> {
        if !(t_c > 0.0 && t_c <= 1.0) {
            return Err(SoarError::FilterConstant(t_c));
        }
        Ok(Self {
            polar,
            t_c,
            g,
            prev_altitude: initial.altitude,
            prev_airspeed: initial.airspeed,
            filt: None,
        })
    }

    /// Forget the filter history; the next netto sample seeds it.
    pub fn reset_filter(&mut self) {
        self.filt = None;
    }

    /// `netto_noise` is added to the netto reading before filtering.
    pub fn update(&mut self, state: &GliderState, dt: f64, netto_noise: f64) -> Result<VarioSample> {
        let e_dot = specific_energy_rate(
            self.prev_altitude,
            state.altitude,
            self.prev_airspeed,
            state.airspeed,
            dt,
            self.g,
        )?;
        self.prev_altitude = state.altitude;
        self.prev_airspeed = state.airspeed;
        let e_dot_net = netto(e_dot, &self.polar, state.airspeed, state.bank)? + netto_noise;
        let e_dot_filt = match self.filt {
            Some(prev) => lowpass_step(prev, e_dot_net, self.t_c)?,
            None => e_dot_net,
        };
        self.filt = Some(e_dot_filt);
        Ok(VarioSample {
            e_dot,
            e_dot_net,
            e_dot_filt,
            time: state.time,
        })
    }
}
