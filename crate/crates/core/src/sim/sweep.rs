//! Loiter-radius performance sweep.
//!
//! For each thermal radius the glider is flown in a loiter centred exactly on
//! the core, and the steady climb rate is measured from the simulated
//! altitude trace. The per-thermal optimum is the best radius on a scan grid
//! that also contains the fixed radii.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::controller::{LoiterCommand, TurnDirection};
use crate::error::{Result, SoarError};
use crate::glider::{
    coordinated_bank, sink_rate, step_dynamics, DynamicsParams, FlightCommands, GliderState,
    PolarCoefficients,
};
use crate::sim::nav::{loiter_tracking, NavConfig};
use crate::thermal_env::{lift_at, ThermalParams, WindVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub strength: f64,
    pub thermal_radii: Vec<f64>,
    pub loiter_radii: Vec<f64>,
    /// Candidate radii for the per-thermal optimum. The default starts just
    /// above the tightest circle flyable at the loiter bank limit (8.3 m at
    /// 9 m/s and 45°).
    pub scan_radii: Vec<f64>,
    pub airspeed: f64,
    pub polar: PolarCoefficients,
    pub dynamics: DynamicsParams,
    pub nav: NavConfig,
    pub tick_rate: f64,
    pub substeps: u32,
    /// Orbits flown before measuring.
    pub settle_orbits: f64,
    pub measure_orbits: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            strength: 2.5,
            thermal_radii: vec![10.0, 20.0, 30.0, 50.0, 80.0, 100.0],
            loiter_radii: vec![15.0, 30.0, 60.0],
            scan_radii: (9..=120).map(f64::from).collect(),
            airspeed: 9.0,
            polar: PolarCoefficients::default(),
            dynamics: DynamicsParams::default(),
            nav: NavConfig::default(),
            tick_rate: 5.0,
            substeps: 4,
            settle_orbits: 2.0,
            measure_orbits: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub thermal_radius: f64,
    pub loiter_radius: f64,
    pub climb_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// One cell per (thermal radius, fixed loiter radius), thermal-major.
    pub fixed: Vec<SweepCell>,
    /// Best scanned radius per thermal radius.
    pub optimal: Vec<SweepCell>,
}

impl SweepResult {
    pub fn climb(&self, thermal_radius: f64, loiter_radius: f64) -> Option<f64> {
        self.fixed
            .iter()
            .find(|c| c.thermal_radius == thermal_radius && c.loiter_radius == loiter_radius)
            .map(|c| c.climb_rate)
    }

    /// Mean climb of one fixed radius across all thermal radii.
    pub fn mean_climb(&self, loiter_radius: f64) -> f64 {
        let cells: Vec<f64> = self
            .fixed
            .iter()
            .filter(|c| c.loiter_radius == loiter_radius)
            .map(|c| c.climb_rate)
            .collect();
        cells.iter().sum::<f64>() / cells.len() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind,thermal_radius,loiter_radius,climb_rate")?;
        for (kind, cells) in [("fixed", &self.fixed), ("optimal", &self.optimal)] {
            for c in cells {
                writeln!(
                    w,
                    "{kind},{},{},{:.6}",
                    c.thermal_radius, c.loiter_radius, c.climb_rate
                )?;
            }
        }
        Ok(())
    }
}

/// Climb rate a perfect circle would give: lift at the radius minus the
/// banked-polar sink.
pub fn ideal_climb(
    strength: f64,
    thermal_radius: f64,
    loiter_radius: f64,
    airspeed: f64,
    polar: &PolarCoefficients,
    g: f64,
) -> Result<f64> {
    let bank = coordinated_bank(airspeed, loiter_radius, g);
    Ok(strength * (-(loiter_radius / thermal_radius).powi(2)).exp()
        - sink_rate(polar, airspeed, bank)?)
}

/// Fly a loiter centred on a single thermal and measure the climb rate.
pub fn centered_loiter_climb(
    thermal_radius: f64,
    loiter_radius: f64,
    cfg: &SweepConfig,
) -> Result<f64> {
    if !(loiter_radius > 0.0) {
        return Err(SoarError::NonPositive {
            name: "loiter radius",
            value: loiter_radius,
        });
    }
    let g = cfg.dynamics.gravity;
    let thermal = ThermalParams::new(cfg.strength, thermal_radius, 0.0, 0.0);
    let cmd = LoiterCommand {
        center_north: 0.0,
        center_east: 0.0,
        radius: loiter_radius,
        direction: TurnDirection::Cw,
    };
    // South of the centre, heading west: on the circle, tangent for a CW orbit.
    let bank = coordinated_bank(cfg.airspeed, loiter_radius, g)
        .min(cfg.nav.loiter_bank_limit_deg.to_radians());
    let mut state = GliderState {
        north: -loiter_radius,
        east: 0.0,
        altitude: 1000.0,
        airspeed: cfg.airspeed,
        heading: -std::f64::consts::FRAC_PI_2,
        bank,
        motor_on: false,
        time: 0.0,
    };
    let dt = 1.0 / cfg.tick_rate;
    let sub_dt = dt / f64::from(cfg.substeps);
    let orbit = std::f64::consts::TAU * loiter_radius / cfg.airspeed;
    let settle_ticks = (cfg.settle_orbits * orbit / dt).ceil() as usize;
    let measure_ticks = ((cfg.measure_orbits * orbit / dt).ceil() as usize).max(1);

    let mut start_alt = state.altitude;
    for tick in 0..settle_ticks + measure_ticks {
        if tick == settle_ticks {
            start_alt = state.altitude;
        }
        let commands = FlightCommands {
            target_bank: loiter_tracking(&state, WindVector::CALM, &cmd, &cfg.nav, g),
            target_airspeed: cfg.airspeed,
            motor: false,
        };
        for _ in 0..cfg.substeps {
            let lift = lift_at(&thermal, state.north, state.east);
            state = step_dynamics(
                &state,
                &commands,
                lift,
                WindVector::CALM,
                &cfg.polar,
                &cfg.dynamics,
                sub_dt,
            )?;
        }
    }
    Ok((state.altitude - start_alt) / (measure_ticks as f64 * dt))
}

pub fn radius_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.thermal_radii.is_empty() || cfg.loiter_radii.is_empty() {
        return Err(SoarError::Parse(
            "sweep needs at least one thermal radius and one loiter radius".into(),
        ));
    }
    let mut candidates: Vec<f64> = cfg
        .scan_radii
        .iter()
        .chain(&cfg.loiter_radii)
        .copied()
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let jobs: Vec<(f64, f64)> = cfg
        .thermal_radii
        .iter()
        .flat_map(|&rt| candidates.iter().map(move |&rl| (rt, rl)))
        .collect();
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(rt, rl)| {
            centered_loiter_climb(rt, rl, cfg).map(|climb_rate| SweepCell {
                thermal_radius: rt,
                loiter_radius: rl,
                climb_rate,
            })
        })
        .collect::<Result<_>>()?;

    let mut fixed = Vec::new();
    let mut optimal = Vec::new();
    for &rt in &cfg.thermal_radii {
        let row: Vec<&SweepCell> = cells.iter().filter(|c| c.thermal_radius == rt).collect();
        for &rl in &cfg.loiter_radii {
            if let Some(c) = row.iter().find(|c| c.loiter_radius == rl) {
                fixed.push(**c);
            }
        }
        if let Some(best) = row
            .iter()
            .max_by(|a, b| a.climb_rate.total_cmp(&b.climb_rate))
        {
            optimal.push(**best);
        }
    }
    Ok(SweepResult { fixed, optimal })
}
