//! Four-state thermal EKF.
//!
//! State `[W, R, x, y]`: core strength (m/s), Gaussian radius (m) and the
//! core position north/east of the aircraft (m). The aircraft sits at the
//! origin of its own frame, so the transition only shifts `(x, y)` by the
//! aircraft's air-relative displacement and its Jacobian is the identity.
//! The single observation is the netto vario reading.

use nalgebra::{Matrix4, RowVector4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SoarError};
use crate::thermal_env::WindVector;

pub type StateVector = Vector4<f64>;
pub type Covariance = Matrix4<f64>;
pub type ObservationRow = RowVector4<f64>;

pub const IDX_STRENGTH: usize = 0;
pub const IDX_RADIUS: usize = 1;
pub const IDX_NORTH: usize = 2;
pub const IDX_EAST: usize = 3;

/// Lower clamp on the radius component; the Jacobian divides by R³.
pub const RADIUS_FLOOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    pub mean: StateVector,
    pub cov: Covariance,
}

impl EstimatorState {
    pub fn new(mean: StateVector, cov: Covariance) -> Self {
        Self { mean, cov }
    }

    pub fn strength(&self) -> f64 {
        self.mean[IDX_STRENGTH]
    }

    pub fn radius(&self) -> f64 {
        self.mean[IDX_RADIUS]
    }

    /// Core position relative to the aircraft (north, east).
    pub fn core_offset(&self) -> (f64, f64) {
        (self.mean[IDX_NORTH], self.mean[IDX_EAST])
    }
}

/// Process and observation standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per-tick process std of the strength.
    pub q1: f64,
    /// Per-tick process std of the radius and both position components.
    pub q2: f64,
    /// Observation std of the vario reading.
    pub r: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            q1: 0.001,
            q2: 0.03,
            r: 0.45,
        }
    }
}

impl NoiseConfig {
    pub fn process_covariance(&self) -> Covariance {
        let q1 = self.q1 * self.q1;
        let q2 = self.q2 * self.q2;
        Covariance::from_diagonal(&Vector4::new(q1, q2, q2, q2))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("SOAR_Q1", self.q1), ("SOAR_Q2", self.q2), ("SOAR_R", self.r)] {
            if !(value > 0.0) {
                return Err(SoarError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// Initial-belief settings used when a thermal is first detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    /// Distance ahead along the heading where the core is first assumed, m.
    pub dist_ahead: f64,
    pub radius: f64,
    pub strength_std: f64,
    pub radius_std: f64,
    /// Position std; `None` uses `dist_ahead` (floored at 1 m).
    pub position_std: Option<f64>,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            dist_ahead: 30.0,
            radius: 80.0,
            strength_std: 1.0,
            radius_std: 40.0,
            position_std: None,
        }
    }
}

/// Aircraft displacement relative to the air mass over one step.
pub fn wind_corrected_displacement(
    d_north_abs: f64,
    d_east_abs: f64,
    wind: WindVector,
    dt: f64,
) -> (f64, f64) {
    (d_north_abs - wind.v_north * dt, d_east_abs - wind.v_east * dt)
}

/// Time update. The transition Jacobian is the identity, so the covariance
/// update is a plain `P + Q`.
pub fn predict(state: &EstimatorState, dx: f64, dy: f64, noise: &NoiseConfig) -> EstimatorState {
    let mut mean = state.mean;
    mean[IDX_NORTH] -= dx;
    mean[IDX_EAST] -= dy;
    EstimatorState {
        mean,
        cov: state.cov + noise.process_covariance(),
    }
}

/// Lift the model predicts at the aircraft (the origin of the state frame).
pub fn predicted_lift(mean: &StateVector) -> f64 {
    let (w, r, x, y) = (mean[0], mean[1], mean[2], mean[3]);
    w * (-(x * x + y * y) / (r * r)).exp()
}

/// Gradient of [`predicted_lift`] with respect to `[W, R, x, y]`.
pub fn observation_jacobian(mean: &StateVector) -> ObservationRow {
    let (w, r, x, y) = (mean[0], mean[1], mean[2], mean[3]);
    let r2 = r * r;
    let d2 = x * x + y * y;
    let expon = (-d2 / r2).exp();
    ObservationRow::new(
        expon,
        2.0 * w * d2 / (r2 * r) * expon,
        -2.0 * w * x / r2 * expon,
        -2.0 * w * y / r2 * expon,
    )
}

/// Diagnostics of one measurement update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub innovation: f64,
    pub innovation_variance: f64,
    pub gain_norm: f64,
}

/// Gain and innovation variance for a scalar observation with std `r`.
/// The innovation covariance is 1×1, so its inverse is one division.
pub fn kalman_gain(cov: &Covariance, h: &ObservationRow, r: f64) -> Result<(StateVector, f64)> {
    let ph_t = cov * h.transpose();
    let s = (h * ph_t)[0] + r * r;
    if !(s > 0.0) || !s.is_finite() {
        return Err(SoarError::CorruptCovariance(s));
    }
    Ok((ph_t / s, s))
}

/// Measurement update with a scalar innovation.
pub fn update(
    state: &EstimatorState,
    observed_vario: f64,
    noise: &NoiseConfig,
) -> Result<(EstimatorState, UpdateInfo)> {
    if !observed_vario.is_finite() {
        return Err(SoarError::NonFinite("vario observation"));
    }
    let h = observation_jacobian(&state.mean);
    let p = state.cov;
    let (gain, s) = kalman_gain(&p, &h, noise.r)?;
    let innovation = observed_vario - predicted_lift(&state.mean);

    let mut mean = state.mean + gain * innovation;
    mean[IDX_RADIUS] = mean[IDX_RADIUS].max(RADIUS_FLOOR);
    let cov = (Covariance::identity() - gain * h) * p;
    let cov = 0.5 * (cov + cov.transpose());
    if !mean.iter().chain(cov.iter()).all(|v| v.is_finite()) {
        return Err(SoarError::NonFinite("estimator state"));
    }

    Ok((
        EstimatorState { mean, cov },
        UpdateInfo {
            innovation,
            innovation_variance: s,
            gain_norm: gain.norm(),
        },
    ))
}

/// Fresh belief when a thermal is detected: the core is placed
/// `dist_ahead` metres along the current heading and the strength is scaled
/// so the model reproduces the filtered vario at the aircraft.
pub fn initialize(filtered_vario: f64, heading: f64, config: &InitConfig) -> EstimatorState {
    let d = config.dist_ahead;
    let strength = filtered_vario / (-(d * d) / (config.radius * config.radius)).exp();
    let pos_std = config.position_std.unwrap_or(d.max(1.0));
    let mean = StateVector::new(strength, config.radius, d * heading.cos(), d * heading.sin());
    let cov = Covariance::from_diagonal(&Vector4::new(
        config.strength_std.powi(2),
        config.radius_std.powi(2),
        pos_std * pos_std,
        pos_std * pos_std,
    ));
    EstimatorState { mean, cov }
}
