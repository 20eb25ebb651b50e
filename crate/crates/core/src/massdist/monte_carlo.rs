//! Stratified Monte Carlo estimates of the six-dimensional energy integrals.
//!
//! Points are drawn from each distribution's own mass measure (radial
//! quantile times a uniform direction), so every estimator is an average of
//! `1/|x − y|` terms. The radial quantile of the first point is stratified
//! into equal-probability bins; the reported standard error is the
//! stratified one. Sample `i` always uses Philox stream `i` under `seed`, so
//! estimates are reproducible and independent of thread scheduling.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distance, MassDistribution, MassError, SuperpositionSpec, Vec3};
use crate::quantities::PhysicalConstants;
use crate::rng::PhiloxStream;

const MAX_STRATA: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn sample_point(d: &MassDistribution, u_radius: f64, u_cos: f64, u_phi: f64) -> Vec3 {
    let r = d.radial_quantile(u_radius);
    let cos_t = 2.0 * u_cos - 1.0;
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = 2.0 * PI * u_phi;
    let c = d.center();
    [c[0] + r * sin_t * phi.cos(), c[1] + r * sin_t * phi.sin(), c[2] + r * cos_t]
}

fn draw(d: &MassDistribution, rng: &mut PhiloxStream, u_radius: Option<f64>) -> Vec3 {
    let u = u_radius.unwrap_or_else(|| rng.next_f64());
    sample_point(d, u, rng.next_f64(), rng.next_f64())
}

fn stratified<F>(n: usize, seed: u64, estimator: F) -> McEstimate
where
    F: Fn(&mut PhiloxStream, f64) -> f64 + Sync,
{
    let strata = MAX_STRATA.min((n / 2).max(1));
    let per = n / strata;
    let stats: Vec<(f64, f64)> = (0..strata)
        .into_par_iter()
        .map(|k| {
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for j in 0..per {
                let index = (k * per + j) as u64;
                let mut rng = PhiloxStream::new(seed, index);
                let u = (k as f64 + rng.next_f64()) / strata as f64;
                let x = estimator(&mut rng, u);
                let delta = x - mean;
                mean += delta / (j + 1) as f64;
                m2 += delta * (x - mean);
            }
            let var = if per > 1 { m2 / (per - 1) as f64 } else { 0.0 };
            (mean, var)
        })
        .collect();
    let k = strata as f64;
    let mean = stats.iter().map(|s| s.0).sum::<f64>() / k;
    let var = stats.iter().map(|s| s.1 / per as f64).sum::<f64>() / (k * k);
    McEstimate { mean, std_error: var.sqrt(), samples: per * strata }
}

fn inverse_distance(x: &Vec3, y: &Vec3) -> f64 {
    let r = distance(x, y);
    if r > 0.0 {
        1.0 / r
    } else {
        0.0
    }
}

/// Monte Carlo estimate of `E_Δ` in joules.
pub fn e_delta_monte_carlo(
    spec: &SuperpositionSpec,
    constants: &PhysicalConstants,
    n: usize,
    seed: u64,
) -> Result<McEstimate, MassError> {
    spec.validate()?;
    let (a, b) = (&spec.branch_a, &spec.branch_b);
    if a.is_singular() || b.is_singular() {
        return Err(MassError::DivergentSelfEnergy("superposition branch is an unsmeared point mass".into()));
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    let g = constants.g();
    Ok(stratified(n.max(2), seed, |rng, u| {
        let xa = draw(a, rng, Some(u));
        let xa2 = draw(a, rng, None);
        let xb = draw(b, rng, None);
        let xb2 = draw(b, rng, None);
        0.5 * g
            * (ma * ma * inverse_distance(&xa, &xa2) + mb * mb * inverse_distance(&xb, &xb2)
                - ma * mb * (inverse_distance(&xa, &xb2) + inverse_distance(&xa2, &xb)))
    }))
}

/// Monte Carlo estimate of the mutual energy `G∬ρ₁ρ₂/|x−y|`.
pub fn mutual_energy_monte_carlo(
    d1: &MassDistribution,
    d2: &MassDistribution,
    constants: &PhysicalConstants,
    n: usize,
    seed: u64,
) -> McEstimate {
    let scale = constants.g() * d1.total_mass() * d2.total_mass();
    stratified(n.max(2), seed, |rng, u| {
        let x = draw(d1, rng, Some(u));
        let y = draw(d2, rng, None);
        scale * inverse_distance(&x, &y)
    })
}

/// Monte Carlo estimate of the self-energy `U[ρ]`.
pub fn self_energy_monte_carlo(
    d: &MassDistribution,
    constants: &PhysicalConstants,
    n: usize,
    seed: u64,
) -> Result<McEstimate, MassError> {
    if d.is_singular() {
        return Err(MassError::DivergentSelfEnergy("point mass with zero smearing length".into()));
    }
    let mut est = mutual_energy_monte_carlo(d, d, constants, n, seed);
    est.mean *= 0.5;
    est.std_error *= 0.5;
    Ok(est)
}
