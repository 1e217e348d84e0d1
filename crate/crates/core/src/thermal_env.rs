//! Ground-truth atmosphere.
//!
//! Thermals are Gaussian lift distributions in the horizontal plane. Each one
//! drifts with a uniform wind field scaled by a drift factor (1.0 means the
//! core moves with the air mass). Several thermals superpose additively.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SoarError};

/// Uniform horizontal wind, m/s in the north/east frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindVector {
    pub v_north: f64,
    pub v_east: f64,
}

impl WindVector {
    pub const CALM: WindVector = WindVector {
        v_north: 0.0,
        v_east: 0.0,
    };

    pub fn new(v_north: f64, v_east: f64) -> Self {
        Self { v_north, v_east }
    }

    pub fn is_finite(&self) -> bool {
        self.v_north.is_finite() && self.v_east.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    /// Vertical air speed at the core, m/s. Negative values model sink.
    pub strength: f64,
    /// Gaussian length scale, m.
    pub radius: f64,
    pub core_north: f64,
    pub core_east: f64,
    /// Simulation time at which the thermal becomes active, s.
    #[serde(default)]
    pub spawn_time: f64,
}

impl ThermalParams {
    pub fn new(strength: f64, radius: f64, core_north: f64, core_east: f64) -> Self {
        Self {
            strength,
            radius,
            core_north,
            core_east,
            spawn_time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(SoarError::NonPositive {
                name: "thermal radius",
                value: self.radius,
            });
        }
        if !self.strength.is_finite() || !self.core_north.is_finite() || !self.core_east.is_finite()
        {
            return Err(SoarError::Parse("thermal fields must be finite".into()));
        }
        Ok(())
    }

    pub fn is_active(&self, time: f64) -> bool {
        time >= self.spawn_time
    }
}

/// Vertical air velocity of a single thermal at a point.
pub fn lift_at(thermal: &ThermalParams, north: f64, east: f64) -> f64 {
    let dn = north - thermal.core_north;
    let de = east - thermal.core_east;
    let d2 = dn * dn + de * de;
    thermal.strength * (-d2 / (thermal.radius * thermal.radius)).exp()
}

/// Displace the core by `wind * dt`; strength and radius are unchanged.
pub fn advect(thermal: &ThermalParams, wind: WindVector, dt: f64) -> ThermalParams {
    ThermalParams {
        core_north: thermal.core_north + wind.v_north * dt,
        core_east: thermal.core_east + wind.v_east * dt,
        ..*thermal
    }
}

/// Sum of `lift_at` over every thermal in the slice.
pub fn field_lift(thermals: &[ThermalParams], north: f64, east: f64) -> f64 {
    thermals.iter().map(|t| lift_at(t, north, east)).sum()
}

/// Time-evolving set of thermals sharing one wind field.
#[derive(Debug, Clone)]
pub struct Atmosphere {
    thermals: Vec<ThermalParams>,
    wind: WindVector,
    drift_factor: f64,
    time: f64,
}

impl Atmosphere {
    pub fn new(thermals: Vec<ThermalParams>, wind: WindVector, drift_factor: f64) -> Self {
        Self {
            thermals,
            wind,
            drift_factor,
            time: 0.0,
        }
    }

    pub fn wind(&self) -> WindVector {
        self.wind
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Thermals whose spawn time has passed, at their current positions.
    pub fn active(&self) -> impl Iterator<Item = &ThermalParams> {
        let t = self.time;
        self.thermals.iter().filter(move |th| th.is_active(t))
    }

    pub fn lift(&self, north: f64, east: f64) -> f64 {
        self.active().map(|t| lift_at(t, north, east)).sum()
    }

    pub fn advance(&mut self, dt: f64) {
        let drift = WindVector::new(
            self.wind.v_north * self.drift_factor,
            self.wind.v_east * self.drift_factor,
        );
        let now = self.time;
        for th in &mut self.thermals {
            // A thermal drifts only from its spawn time onwards.
            let active_dt = (now + dt - th.spawn_time.max(now)).clamp(0.0, dt);
            if active_dt > 0.0 {
                *th = advect(th, drift, active_dt);
            }
        }
        self.time += dt;
    }

    /// Active thermal whose core is nearest to the given point.
    pub fn nearest_core(&self, north: f64, east: f64) -> Option<(f64, f64)> {
        self.active()
            .map(|t| (t.core_north, t.core_east))
            .min_by(|a, b| {
                let da = (a.0 - north).powi(2) + (a.1 - east).powi(2);
                let db = (b.0 - north).powi(2) + (b.1 - east).powi(2);
                da.total_cmp(&db)
            })
    }
}
