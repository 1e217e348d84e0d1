//! Drag-polar identification from calm-air glide data.
//!
//! With `k` known from airframe geometry the sink model
//! `v · (c_d0·v²/k + b·k/(v²·cos²φ))` is linear in `(c_d0, b)`, so the fit is
//! a two-parameter linear least-squares problem solved by normal equations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SoarError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlideSample {
    pub airspeed: f64,
    /// Measured sink rate, positive down.
    pub sink: f64,
    /// Bank angle during the sample, rad.
    #[serde(default)]
    pub bank: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarFit {
    pub c_d0: f64,
    pub b: f64,
    /// RMS of the sink residuals, m/s.
    pub rms_residual: f64,
    /// Set when a fitted coefficient is negative; the data are probably bad.
    pub suspect: bool,
}

/// `k = 2·m·g / (ρ·A)`.
pub fn compute_k(mass: f64, wing_area: f64, rho: f64, g: f64) -> Result<f64> {
    for (name, value) in [("mass", mass), ("wing_area", wing_area), ("rho", rho), ("g", g)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(SoarError::NonPositive { name, value });
        }
    }
    Ok(2.0 * mass * g / (rho * wing_area))
}

// Regressors multiplying c_d0 and b.
fn regressors(s: &GlideSample, k: f64) -> (f64, f64) {
    let v = s.airspeed;
    let cos_bank = s.bank.cos();
    (v * v * v / k, k / (v * cos_bank * cos_bank))
}

/// Smallest acceptable `det / (Σa²·Σb²)` of the normal matrix.
const CONDITION_FLOOR: f64 = 1e-12;

pub fn fit_polar(samples: &[GlideSample], k: f64) -> Result<PolarFit> {
    if !(k > 0.0) {
        return Err(SoarError::NonPositive { name: "k", value: k });
    }
    for s in samples {
        if !(s.airspeed > 0.0) || !s.sink.is_finite() {
            return Err(SoarError::InvalidFlightCondition {
                airspeed: s.airspeed,
                bank: s.bank,
            });
        }
    }
    let mut speeds: Vec<f64> = samples.iter().map(|s| s.airspeed).collect();
    speeds.sort_by(f64::total_cmp);
    speeds.dedup();
    if speeds.len() < 2 {
        return Err(SoarError::TooFewAirspeeds(speeds.len()));
    }

    let (mut saa, mut sab, mut sbb, mut sas, mut sbs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples {
        let (a, b) = regressors(s, k);
        saa += a * a;
        sab += a * b;
        sbb += b * b;
        sas += a * s.sink;
        sbs += b * s.sink;
    }
    let det = saa * sbb - sab * sab;
    let ratio = det / (saa * sbb);
    if !(ratio > CONDITION_FLOOR) {
        return Err(SoarError::RankDeficient(ratio));
    }
    let c_d0 = (sbb * sas - sab * sbs) / det;
    let b = (saa * sbs - sab * sas) / det;

    let sse: f64 = samples
        .iter()
        .map(|s| {
            let (ra, rb) = regressors(s, k);
            (s.sink - (c_d0 * ra + b * rb)).powi(2)
        })
        .sum();
    Ok(PolarFit {
        c_d0,
        b,
        rms_residual: (sse / samples.len() as f64).sqrt(),
        suspect: c_d0 < 0.0 || b < 0.0,
    })
}

/// Read `airspeed,sink[,bank]` rows (header required, bank in radians).
pub fn read_samples(path: &Path) -> Result<Vec<GlideSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| SoarError::Io(e.to_string()))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| SoarError::Parse(e.to_string())))
        .collect()
}
