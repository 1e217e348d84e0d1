//! Closed-loop scenario runner.
//!
//! Each control tick integrates the truth model over several physics
//! substeps, synthesises the vario reading (plus seeded Gaussian noise),
//! runs the controller and turns its guidance into a bank command.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::controller::{
    FlightMode, Guidance, LoiterCommand, ModeTransition, SoarController, TickInputs,
    TransitionReason,
};
use crate::error::{Result, SoarError};
use crate::glider::{step_dynamics, FlightCommands, GliderState, VarioSample, Variometer};
use crate::sim::nav::{cruise_navigation, loiter_tracking, nearest_waypoint};
use crate::sim::scenario::Scenario;
use crate::thermal_env::Atmosphere;

/// Per-tick estimator trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorTrace {
    pub mean: [f64; 4],
    pub cov_diag: [f64; 4],
    pub innovation: Option<f64>,
    pub gain_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRow {
    pub time: f64,
    pub state: GliderState,
    pub mode: FlightMode,
    /// Motor command issued at this tick.
    pub motor: bool,
    /// True vertical air speed at the aircraft.
    pub env_lift: f64,
    pub vario: VarioSample,
    pub estimator: Option<EstimatorTrace>,
    pub loiter: Option<LoiterCommand>,
    /// Distance from the estimated core to the nearest true core, m.
    pub core_error: Option<f64>,
    pub inside_fence: bool,
}

pub const TELEMETRY_HEADER: &str = "time,north,east,altitude,airspeed,heading,bank,mode,motor,\
env_lift,e_dot,e_dot_net,e_dot_filt,ekf_w,ekf_r,ekf_x,ekf_y,ekf_p_w,ekf_p_r,ekf_p_x,ekf_p_y,\
innovation,gain_norm,loiter_north,loiter_east,core_error,inside_fence";

fn opt(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        let _ = write!(out, "{v:.6}");
    }
}

impl TelemetryRow {
    pub fn to_csv_line(&self) -> String {
        let s = &self.state;
        let mut out = String::with_capacity(256);
        let _ = write!(
            out,
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{:.6},{:.6},{:.6},{:.6}",
            self.time,
            s.north,
            s.east,
            s.altitude,
            s.airspeed,
            s.heading,
            s.bank,
            self.mode,
            u8::from(self.motor),
            self.env_lift,
            self.vario.e_dot,
            self.vario.e_dot_net,
            self.vario.e_dot_filt,
        );
        let est = self.estimator.as_ref();
        for i in 0..4 {
            opt(&mut out, est.map(|e| e.mean[i]));
        }
        for i in 0..4 {
            opt(&mut out, est.map(|e| e.cov_diag[i]));
        }
        opt(&mut out, est.and_then(|e| e.innovation));
        opt(&mut out, est.and_then(|e| e.gain_norm));
        opt(&mut out, self.loiter.map(|l| l.center_north));
        opt(&mut out, self.loiter.map(|l| l.center_east));
        opt(&mut out, self.core_error);
        let _ = write!(out, ",{}", u8::from(self.inside_fence));
        out
    }
}

/// Write the telemetry log: header row then one row per control tick.
pub fn write_telemetry<W: Write>(rows: &[TelemetryRow], mut w: W) -> Result<()> {
    writeln!(w, "{TELEMETRY_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", row.to_csv_line())?;
    }
    Ok(())
}

pub fn telemetry_to_string(rows: &[TelemetryRow]) -> String {
    let mut buf = Vec::new();
    write_telemetry(rows, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("telemetry is ASCII")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoiterSegment {
    pub start_time: f64,
    pub end_time: Option<f64>,
    pub start_altitude: f64,
    pub end_altitude: f64,
    pub exit_reason: Option<TransitionReason>,
}

impl LoiterSegment {
    pub fn altitude_gain(&self) -> f64 {
        self.end_altitude - self.start_altitude
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub duration: f64,
    pub time_in_mode: BTreeMap<String, f64>,
    pub motor_on_time: f64,
    pub total_loiter_climb: f64,
    pub mean_thermalling_climb_rate: f64,
    pub thermal_encounters: usize,
    pub loiter_segments: Vec<LoiterSegment>,
    pub transitions: Vec<ModeTransition>,
    /// (time, distance) samples while loitering.
    pub center_error: Vec<(f64, f64)>,
    pub estimator_resets: usize,
    pub final_altitude: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub telemetry: Vec<TelemetryRow>,
    pub metrics: RunMetrics,
}

impl RunOutput {
    pub fn telemetry_csv(&self) -> String {
        telemetry_to_string(&self.telemetry)
    }
}

pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate()?;
    let config = scenario.params.clone();
    let polar = config.polar();
    let dynamics = scenario.dynamics;
    let g = dynamics.gravity;
    let wind = scenario.wind;
    let dt = 1.0 / scenario.tick_rate;
    let substeps = scenario.physics_substeps;
    let sub_dt = dt / f64::from(substeps);
    let ticks = (scenario.duration * scenario.tick_rate).round() as usize;

    let mut state = scenario.initial_state();
    let mut atmosphere = Atmosphere::new(
        scenario.thermals.clone(),
        wind,
        scenario.thermal_drift_factor,
    );
    let mut vario = Variometer::new(polar, config.vario_tc, g, &state)?;
    let mut controller = SoarController::new(config.clone(), &state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = Normal::new(0.0, scenario.vario_noise_std)
        .map_err(|e| SoarError::scenario("vario_noise_std", e.to_string()))?;

    let mut mode = controller.mode();
    let mut waypoint = 0usize;
    let (bank, idx) = cruise_navigation(&state, wind, &scenario.waypoints, waypoint, &scenario.nav);
    waypoint = idx;
    let mut commands = FlightCommands {
        target_bank: bank,
        target_airspeed: config.cruise_airspeed,
        motor: mode.motor_on(),
    };

    let mut telemetry = Vec::with_capacity(ticks);
    let mut time_in_mode: BTreeMap<String, f64> =
        FlightMode::ALL.iter().map(|m| (m.to_string(), 0.0)).collect();
    let mut motor_on_time = 0.0;
    let mut transitions = Vec::new();
    let mut segments: Vec<LoiterSegment> = Vec::new();
    let mut center_error = Vec::new();
    let mut estimator_resets = 0;

    for _ in 0..ticks {
        for _ in 0..substeps {
            let lift = atmosphere.lift(state.north, state.east);
            state = step_dynamics(&state, &commands, lift, wind, &polar, &dynamics, sub_dt)?;
            atmosphere.advance(sub_dt);
        }
        *time_in_mode.get_mut(mode.as_str()).expect("all modes seeded") += dt;
        if commands.motor {
            motor_on_time += dt;
        }

        let netto_noise = if scenario.vario_noise_std > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        let sample = vario.update(&state, dt, netto_noise)?;
        let inside_fence = scenario
            .geofence
            .as_ref()
            .is_none_or(|f| f.contains(state.north, state.east));

        let out = controller.tick(&TickInputs {
            state,
            vario: sample,
            wind,
            inside_fence,
        });

        if mode == FlightMode::ClimbPowered && out.mode != FlightMode::ClimbPowered {
            // Motor energy must not leak into the detection filter.
            vario.reset_filter();
        }
        if out.estimator_reset {
            estimator_resets += 1;
        }
        if out.reselect_waypoint {
            waypoint = nearest_waypoint(&scenario.waypoints, state.north, state.east);
        }
        if let Some(tr) = out.transition {
            transitions.push(tr);
            if tr.to == FlightMode::ThermalLoiter {
                segments.push(LoiterSegment {
                    start_time: tr.time,
                    end_time: None,
                    start_altitude: state.altitude,
                    end_altitude: state.altitude,
                    exit_reason: None,
                });
            } else if tr.from == FlightMode::ThermalLoiter {
                if let Some(seg) = segments.last_mut() {
                    seg.end_time = Some(tr.time);
                    seg.end_altitude = state.altitude;
                    seg.exit_reason = Some(tr.reason);
                }
            }
        }
        if out.mode == FlightMode::ThermalLoiter {
            if let Some(seg) = segments.last_mut() {
                seg.end_altitude = state.altitude;
            }
        }

        let target_bank = match out.guidance {
            Guidance::Cruise => {
                let (bank, idx) =
                    cruise_navigation(&state, wind, &scenario.waypoints, waypoint, &scenario.nav);
                waypoint = idx;
                bank
            }
            Guidance::Loiter(cmd) => loiter_tracking(&state, wind, &cmd, &scenario.nav, g),
        };
        commands = FlightCommands {
            target_bank,
            target_airspeed: out.target_airspeed,
            motor: out.motor,
        };

        let loiter = match out.guidance {
            Guidance::Loiter(cmd) => Some(cmd),
            Guidance::Cruise => None,
        };
        let core_error = loiter.and_then(|cmd| {
            atmosphere
                .nearest_core(cmd.center_north, cmd.center_east)
                .map(|(n, e)| (n - cmd.center_north).hypot(e - cmd.center_east))
        });
        if let Some(err) = core_error {
            center_error.push((state.time, err));
        }
        let estimator = out.estimator.map(|est| EstimatorTrace {
            mean: [est.mean[0], est.mean[1], est.mean[2], est.mean[3]],
            cov_diag: [est.cov[(0, 0)], est.cov[(1, 1)], est.cov[(2, 2)], est.cov[(3, 3)]],
            innovation: out.ekf_step.map(|s| s.info.innovation),
            gain_norm: out.ekf_step.map(|s| s.info.gain_norm),
        });

        telemetry.push(TelemetryRow {
            time: state.time,
            state,
            mode: out.mode,
            motor: out.motor,
            env_lift: atmosphere.lift(state.north, state.east),
            vario: sample,
            estimator,
            loiter,
            core_error,
            inside_fence,
        });
        mode = out.mode;
    }

    let loiter_time = time_in_mode[FlightMode::ThermalLoiter.as_str()];
    let total_loiter_climb: f64 = segments.iter().map(LoiterSegment::altitude_gain).sum();
    let metrics = RunMetrics {
        duration: ticks as f64 * dt,
        time_in_mode,
        motor_on_time,
        total_loiter_climb,
        mean_thermalling_climb_rate: if loiter_time > 0.0 {
            total_loiter_climb / loiter_time
        } else {
            0.0
        },
        thermal_encounters: segments.len(),
        loiter_segments: segments,
        transitions,
        center_error,
        estimator_resets,
        final_altitude: state.altitude,
    };
    Ok(RunOutput { telemetry, metrics })
}
