//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls the estimator's own update code: the generic filter
//! uses dynamic matrices and an explicit inverse, the Jacobian oracle uses
//! finite differences and the particle filter never linearises.

#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use soar_core::sim::Scenario;

pub fn scenario_path(name: &str) -> String {
    format!("{}/../../scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

pub fn load_scenario(name: &str) -> Scenario {
    Scenario::load(std::path::Path::new(&scenario_path(name)))
        .unwrap_or_else(|e| panic!("scenario {name}: {e}"))
}

/// Lift model written out independently of the library.
pub fn gaussian_lift(state: &[f64; 4]) -> f64 {
    let [w, r, x, y] = *state;
    w * (-(x * x + y * y) / (r * r)).exp()
}

/// Central-difference gradient of `f` at `x`.
pub fn central_difference<F: Fn(&[f64; 4]) -> f64>(f: F, x: &[f64; 4]) -> [f64; 4] {
    let mut grad = [0.0; 4];
    for i in 0..4 {
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut up = *x;
        let mut down = *x;
        up[i] += h;
        down[i] -= h;
        grad[i] = (f(&up) - f(&down)) / (up[i] - down[i]);
    }
    grad
}

pub fn to_dmatrix(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(4, 4, m.iter().copied())
}

/// `F·P·Fᵀ + Q` with an explicit identity transition.
pub fn generic_predict_cov(p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let f = DMatrix::<f64>::identity(p.nrows(), p.ncols());
    &f * p * f.transpose() + q
}

/// `P·Hᵀ·(H·P·Hᵀ + R)⁻¹` through a general matrix inverse.
pub fn generic_gain(p: &DMatrix<f64>, h: &DMatrix<f64>, r_var: f64) -> DMatrix<f64> {
    let s = h * p * h.transpose() + DMatrix::from_element(1, 1, r_var);
    let s_inv = s.try_inverse().expect("innovation covariance is invertible");
    p * h.transpose() * s_inv
}

/// Random symmetric positive-definite 4×4 matrix with eigenvalues spread
/// over roughly `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Matrix4<f64> {
    let a = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let d = Vector4::from_fn(|_, _| lo * (hi / lo).powf(rng.random::<f64>()));
    let m = q * Matrix4::from_diagonal(&d) * q.transpose();
    0.5 * (m + m.transpose())
}

/// Sequential-importance-resampling filter over `[W, R, x, y]`.
///
/// Same prior, process noise and likelihood as the EKF, but the posterior is
/// represented by samples, so no linearisation is involved.
pub struct ParticleFilter {
    particles: Vec<[f64; 4]>,
    log_weights: Vec<f64>,
    q_std: [f64; 4],
    r_std: f64,
    rng: ChaCha8Rng,
    pub resamples: usize,
}

impl ParticleFilter {
    pub fn new(
        mean: [f64; 4],
        cov: &Matrix4<f64>,
        q_std: [f64; 4],
        r_std: f64,
        n: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = cov.cholesky().expect("prior covariance is SPD").l();
        let particles = (0..n)
            .map(|_| {
                let z = Vector4::from_fn(|_, _| StandardNormal.sample(&mut rng));
                let d = l * z;
                [mean[0] + d[0], mean[1] + d[1], mean[2] + d[2], mean[3] + d[3]]
            })
            .collect();
        Self {
            particles,
            log_weights: vec![0.0; n],
            q_std,
            r_std,
            rng,
            resamples: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    /// Propagate by the aircraft displacement plus process noise, then weight
    /// by the vario likelihood.
    pub fn step(&mut self, dx: f64, dy: f64, observation: f64) {
        let inv_r2 = 1.0 / (self.r_std * self.r_std);
        for (p, lw) in self.particles.iter_mut().zip(&mut self.log_weights) {
            let noise: [f64; 4] = std::array::from_fn(|i| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                self.q_std[i] * z
            });
            p[0] += noise[0];
            p[1] += noise[1];
            p[2] += noise[2] - dx;
            p[3] += noise[3] - dy;
            // The radius enters only squared; use its magnitude.
            let model = [p[0], p[1].abs(), p[2], p[3]];
            let innovation = observation - gaussian_lift(&model);
            *lw -= 0.5 * innovation * innovation * inv_r2;
        }
        self.normalise();
        if self.effective_sample_size() < 0.5 * self.len() as f64 {
            self.resample();
        }
    }

    fn normalise(&mut self) {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self.log_weights.iter().map(|lw| (lw - max).exp()).sum();
        let log_norm = max + sum.ln();
        for lw in &mut self.log_weights {
            *lw -= log_norm;
        }
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.log_weights.iter().map(|lw| (2.0 * lw).exp()).sum::<f64>()
    }

    /// Systematic resampling.
    fn resample(&mut self) {
        let n = self.len();
        let start: f64 = self.rng.random::<f64>() / n as f64;
        let mut out = Vec::with_capacity(n);
        let mut cumulative = 0.0;
        let mut j = 0;
        for (i, lw) in self.log_weights.iter().enumerate() {
            cumulative += lw.exp();
            while j < n && start + j as f64 / n as f64 <= cumulative {
                out.push(self.particles[i]);
                j += 1;
            }
        }
        // Rounding can leave the last few slots unfilled.
        while out.len() < n {
            out.push(*self.particles.last().expect("non-empty"));
        }
        self.particles = out;
        self.log_weights.fill(-(n as f64).ln());
        self.resamples += 1;
    }

    pub fn mean(&self) -> [f64; 4] {
        let mut m = [0.0; 4];
        for (p, lw) in self.particles.iter().zip(&self.log_weights) {
            let w = lw.exp();
            for i in 0..4 {
                m[i] += w * p[i];
            }
        }
        m
    }
}
