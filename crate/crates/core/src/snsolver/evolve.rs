//! Crank–Nicolson time stepping with a midpoint self-potential.
//!
//! Each step solves `(1 + iτH/2) u⁺ = (1 − iτH/2) u` with `H` built from
//! `½(Φ[u] + Φ[u*])`, where `u*` is a predictor step in the frozen
//! potential `Φ[u]`. `H` is real symmetric, so every step is exactly
//! unitary. Iterating the corrector to convergence gives the implicit
//! midpoint scheme, which also conserves the discrete energy exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::tridiag::solve_complex;
use super::{Model, SnError, WaveState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveOptions {
    /// Iterate the corrector until successive iterates agree to
    /// `inner_tolerance` (max-norm, reduced amplitude).
    #[serde(default)]
    pub inner_iteration: bool,
    #[serde(default = "default_inner_tolerance")]
    pub inner_tolerance: f64,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
}

fn default_inner_tolerance() -> f64 {
    1e-13
}
fn default_max_inner() -> usize {
    50
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { inner_iteration: false, inner_tolerance: default_inner_tolerance(), max_inner: default_max_inner() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub step: usize,
    pub time: f64,
    pub norm: f64,
    pub energy: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub observables: Vec<Observables>,
    pub final_state: WaveState,
}

impl Trajectory {
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.observables[0].norm;
        self.observables.iter().map(|o| (o.norm - n0).abs()).fold(0.0, f64::max)
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        let e0 = self.observables[0].energy;
        self.observables.iter().map(|o| ((o.energy - e0) / e0).abs()).fold(0.0, f64::max)
    }

    pub fn max_relative_width_drift(&self) -> f64 {
        let w0 = self.observables[0].width;
        self.observables.iter().map(|o| ((o.width - w0) / w0).abs()).fold(0.0, f64::max)
    }
}

fn observe(model: &Model, u: &[Complex64], step: usize, tau: f64) -> Observables {
    let norm = model.norm(u);
    Observables {
        step,
        time: step as f64 * tau * model.units.time,
        norm,
        energy: model.energy(u) * model.units.energy,
        width: (model.second_moment(u) / norm).sqrt() * model.units.length,
    }
}

fn cn_step(model: &Model, u: &[Complex64], phi: &[f64], tau: f64) -> Vec<Complex64> {
    let n = u.len();
    let half = Complex64::new(0.0, 0.5 * tau);
    let kd = model.kinetic_diag();
    let ko = model.kinetic_off();
    let diag_h: Vec<f64> = (0..n).map(|i| kd + model.v[i] + phi[i]).collect();
    let rhs: Vec<Complex64> = (0..n)
        .map(|i| {
            let mut hu = diag_h[i] * u[i];
            if i > 0 {
                hu += ko * u[i - 1];
            }
            if i + 1 < n {
                hu += ko * u[i + 1];
            }
            u[i] - half * hu
        })
        .collect();
    let lhs: Vec<Complex64> = diag_h.iter().map(|&d| 1.0 + half * d).collect();
    solve_complex(&lhs, half * ko, &rhs)
}

fn density(u: &[Complex64]) -> Vec<f64> {
    u.iter().map(|z| z.norm_sqr()).collect()
}

pub fn evolve(state: &WaveState, dt: f64, n_steps: usize) -> Result<Trajectory, SnError> {
    evolve_with(state, dt, n_steps, &EvolveOptions::default())
}

pub fn evolve_with(state: &WaveState, dt: f64, n_steps: usize, options: &EvolveOptions) -> Result<Trajectory, SnError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SnError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(SnError::Normalization { norm });
    }
    let model = Model::from_state(state);
    let tau = dt / model.units.time;
    let mut u = model.reduce(&state.psi);
    let mut observables = Vec::with_capacity(n_steps + 1);
    observables.push(observe(&model, &u, 0, tau));
    for step in 1..=n_steps {
        let phi_n = model.potential_of(&density(&u));
        let vmax = model.v.iter().zip(&phi_n).map(|(v, p)| v.abs() + p.abs()).fold(0.0, f64::max);
        if tau * vmax > 1.0 {
            return Err(SnError::StepSize { dt, limit: model.units.time / vmax });
        }
        let mut next = cn_step(&model, &u, &phi_n, tau);
        if model.kappa != 0.0 {
            let passes = if options.inner_iteration { options.max_inner } else { 1 };
            for _ in 0..passes {
                let phi_star = model.potential_of(&density(&next));
                let phi_mid: Vec<f64> = phi_n.iter().zip(&phi_star).map(|(a, b)| 0.5 * (a + b)).collect();
                let corrected = cn_step(&model, &u, &phi_mid, tau);
                let change = corrected.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                next = corrected;
                if change < options.inner_tolerance {
                    break;
                }
            }
        }
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SnError::NumericalBlowup { step });
        }
        u = next;
        observables.push(observe(&model, &u, step, tau));
    }
    let mut final_state = state.clone();
    final_state.psi = model.expand(&u);
    Ok(Trajectory { observables, final_state })
}

/// Closed-form width of a free Gaussian with initial spread `sigma0` per
/// axis: `⟨r²⟩^{1/2}` in 3-D (`radial`) or `⟨x²⟩^{1/2}` in 1-D.
pub fn free_gaussian_width(sigma0: f64, mass: f64, hbar: f64, t: f64, radial: bool) -> f64 {
    let s = hbar * t / (2.0 * mass * sigma0 * sigma0);
    let sigma = sigma0 * (1.0 + s * s).sqrt();
    if radial {
        3f64.sqrt() * sigma
    } else {
        sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionComparison {
    pub times: Vec<f64>,
    pub width_interacting: Vec<f64>,
    pub width_free: Vec<f64>,
}

impl DispersionComparison {
    /// True when the interacting packet is never wider than the free one
    /// (after the first step) and ends strictly narrower.
    pub fn dispersion_inhibited(&self) -> bool {
        let n = self.times.len();
        n > 1
            && self.width_interacting.iter().zip(&self.width_free).skip(1).all(|(a, b)| a <= b)
            && self.width_interacting[n - 1] < self.width_free[n - 1]
    }
}

/// Runs the state with and without its self-coupling over the same steps.
pub fn dispersion_comparison(state: &WaveState, dt: f64, n_steps: usize) -> Result<DispersionComparison, SnError> {
    let interacting = evolve(state, dt, n_steps)?;
    let mut free_state = state.clone();
    free_state.self_coupling.clear();
    let free = evolve(&free_state, dt, n_steps)?;
    Ok(DispersionComparison {
        times: interacting.observables.iter().map(|o| o.time).collect(),
        width_interacting: interacting.observables.iter().map(|o| o.width).collect(),
        width_free: free.observables.iter().map(|o| o.width).collect(),
    })
}
