//! Schrödinger–Newton equation with a general `κ/|x − x′|` self-interaction.
//!
//! Radial problems are discretised on a uniform grid `r_i = i·h`,
//! `i = 1..=N`, in the reduced amplitude `u = √(4π)·r·ψ` with `u = 0` at
//! `r = 0` and at `r = (N+1)h`. The kinetic term is the three-point
//! Laplacian, so every Hamiltonian is a real symmetric tridiagonal matrix.
//! The discrete self-potential
//!
//! ```text
//! Φ_i = κ h Σ_j |u_j|² / max(r_i, r_j)
//! ```
//!
//! is the trapezoid rule for the shell-theorem integrals; its kernel is
//! symmetric, which makes the discrete energy functional exactly conserved
//! by the implicit midpoint scheme.
//!
//! Numerics run in dimensionless form: lengths in `L = 32h`, energies in
//! `ħ²/(mL²)`, times in `ħ/E`.

mod evolve;
mod hydrogen;
mod io;
mod stationary;
mod tridiag;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use evolve::{
    dispersion_comparison, evolve, evolve_with, free_gaussian_width, DispersionComparison, EvolveOptions,
    Observables, Trajectory,
};
pub use hydrogen::{hydrogen_diagnostic, HydrogenReport};
pub use io::{read_wave_csv, write_profile_csv, write_trajectory_csv};
pub use stationary::{
    cross_check, ground_state, shooting_eigenvalue, stationary_states, CrossCheck, Method, SnProblem,
    StationaryState, DEFAULT_TOLERANCE, MIN_POINTS_PER_LENGTH,
};

use crate::quantities::PhysicalConstants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnError {
    #[error("state is not normalised: norm = {norm}")]
    Normalization { norm: f64 },
    #[error("self-consistent iteration did not converge after {iterations} iterations (last residual {last:e})", last = residual_history.last().copied().unwrap_or(f64::NAN))]
    Convergence { iterations: usize, residual_history: Vec<f64> },
    #[error("grid error: {0}")]
    Grid(String),
    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    StepSize { dt: f64, limit: f64 },
    #[error("numerical blow-up at step {step}")]
    NumericalBlowup { step: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Radial grid `r_i = i·spacing` (`i = 1..=points`) or a 1-D Cartesian grid
/// `x_i = origin + i·spacing` (`i = 0..points`). Both carry Dirichlet walls
/// one spacing outside the stored points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Grid {
    Radial { spacing: f64, points: usize },
    Cartesian { origin: f64, spacing: f64, points: usize },
}

impl Grid {
    pub fn radial(spacing: f64, points: usize) -> Result<Self, SnError> {
        let grid = Grid::Radial { spacing, points };
        grid.validate()?;
        Ok(grid)
    }

    /// Radial grid whose outer wall sits at (or just beyond) `r_max`.
    pub fn radial_to(r_max: f64, spacing: f64) -> Result<Self, SnError> {
        if !(r_max > spacing) {
            return Err(SnError::Grid(format!("r_max {r_max} must exceed the spacing {spacing}")));
        }
        Grid::radial(spacing, (r_max / spacing).ceil() as usize - 1)
    }

    pub fn cartesian(origin: f64, spacing: f64, points: usize) -> Result<Self, SnError> {
        let grid = Grid::Cartesian { origin, spacing, points };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), SnError> {
        let (h, n) = (self.spacing(), self.points());
        if !(h.is_finite() && h > 0.0) {
            return Err(SnError::Grid(format!("spacing must be positive, got {h}")));
        }
        if n < 3 {
            return Err(SnError::Grid(format!("need at least 3 grid points, got {n}")));
        }
        if let Grid::Cartesian { origin, .. } = self {
            if !origin.is_finite() {
                return Err(SnError::Grid("non-finite origin".into()));
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        match *self {
            Grid::Radial { spacing, .. } | Grid::Cartesian { spacing, .. } => spacing,
        }
    }

    pub fn points(&self) -> usize {
        match *self {
            Grid::Radial { points, .. } | Grid::Cartesian { points, .. } => points,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Grid::Radial { .. })
    }

    /// Position of the outer Dirichlet wall.
    pub fn extent(&self) -> f64 {
        match *self {
            Grid::Radial { spacing, points } => (points + 1) as f64 * spacing,
            Grid::Cartesian { origin, spacing, points } => origin + points as f64 * spacing,
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        match *self {
            Grid::Radial { spacing, points } => (1..=points).map(|i| i as f64 * spacing).collect(),
            Grid::Cartesian { origin, spacing, points } => (0..points).map(|i| origin + i as f64 * spacing).collect(),
        }
    }

    fn scaled(&self, length: f64) -> Grid {
        match *self {
            Grid::Radial { spacing, points } => Grid::Radial { spacing: spacing / length, points },
            Grid::Cartesian { origin, spacing, points } => {
                Grid::Cartesian { origin: origin / length, spacing: spacing / length, points }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    Gravitational,
    Electrostatic,
    Custom,
}

/// One `κ/|x − x′|` kernel term. Gravity is `κ = −Gm²`; electrostatics
/// `κ = +e²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub kind: CouplingKind,
    pub kappa: f64,
}

impl Coupling {
    pub fn gravitational(g: f64, mass: f64) -> Self {
        Coupling { kind: CouplingKind::Gravitational, kappa: -g * mass * mass }
    }

    pub fn electrostatic(e2: f64) -> Self {
        Coupling { kind: CouplingKind::Electrostatic, kappa: e2 }
    }

    pub fn custom(kappa: f64) -> Self {
        Coupling { kind: CouplingKind::Custom, kappa }
    }

    pub fn from_constants(kind: CouplingKind, constants: &PhysicalConstants, mass: f64) -> Self {
        match kind {
            CouplingKind::Gravitational => Coupling::gravitational(constants.g(), mass),
            CouplingKind::Electrostatic => Coupling::electrostatic(constants.e2_coulomb()),
            CouplingKind::Custom => Coupling::custom(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExternalPotential {
    #[default]
    None,
    /// `½ m ω² r²`.
    Harmonic { omega: f64 },
    /// `κ/r`; hydrogen is `κ = −e²`.
    Coulomb { kappa: f64 },
    /// Values on the grid points, energy units.
    Sampled { values: Vec<f64> },
}

impl ExternalPotential {
    pub fn sample(&self, grid: &Grid, mass: f64) -> Result<Vec<f64>, SnError> {
        let x = grid.coordinates();
        match self {
            ExternalPotential::None => Ok(vec![0.0; x.len()]),
            ExternalPotential::Harmonic { omega } => Ok(x.iter().map(|r| 0.5 * mass * omega * omega * r * r).collect()),
            ExternalPotential::Coulomb { kappa } => {
                if x.iter().any(|&r| r <= 0.0) {
                    return Err(SnError::Grid("Coulomb potential needs r > 0 on every grid point".into()));
                }
                Ok(x.iter().map(|r| kappa / r).collect())
            }
            ExternalPotential::Sampled { values } => {
                if values.len() != x.len() {
                    return Err(SnError::InvalidInput(format!(
                        "sampled potential has {} values for {} grid points",
                        values.len(),
                        x.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }

    /// Length scale the potential imposes on a particle of this mass.
    pub fn length_scale(&self, mass: f64, hbar: f64) -> Option<f64> {
        match *self {
            ExternalPotential::Harmonic { omega } if omega > 0.0 => Some((hbar / (mass * omega)).sqrt()),
            ExternalPotential::Coulomb { kappa } if kappa != 0.0 => Some(hbar * hbar / (mass * kappa.abs())),
            _ => None,
        }
    }
}

/// Smallest length set by the couplings or the external potential.
pub fn characteristic_length(mass: f64, hbar: f64, couplings: &[Coupling], external: &ExternalPotential) -> Option<f64> {
    couplings
        .iter()
        .filter(|c| c.kappa != 0.0)
        .map(|c| hbar * hbar / (mass * c.kappa.abs()))
        .chain(external.length_scale(mass, hbar))
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.min(l))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub length: f64,
    pub energy: f64,
    pub time: f64,
}

impl Units {
    fn new(length: f64, mass: f64, hbar: f64) -> Self {
        let energy = hbar * hbar / (mass * length * length);
        Units { length, energy, time: hbar / energy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub grid: Grid,
    pub psi: Vec<Complex64>,
    pub mass: f64,
    pub hbar: f64,
    pub self_coupling: Vec<Coupling>,
    pub external_potential: Vec<f64>,
}

impl WaveState {
    pub fn new(
        grid: Grid,
        psi: Vec<Complex64>,
        mass: f64,
        hbar: f64,
        self_coupling: Vec<Coupling>,
        external: &ExternalPotential,
    ) -> Result<Self, SnError> {
        grid.validate()?;
        if psi.len() != grid.points() {
            return Err(SnError::InvalidInput(format!("{} amplitudes for {} grid points", psi.len(), grid.points())));
        }
        if !(mass > 0.0 && mass.is_finite() && hbar > 0.0 && hbar.is_finite()) {
            return Err(SnError::InvalidInput("mass and hbar must be positive".into()));
        }
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SnError::InvalidInput("non-finite amplitude".into()));
        }
        if self_coupling.iter().any(|c| !c.kappa.is_finite()) {
            return Err(SnError::InvalidInput("non-finite coupling".into()));
        }
        if !grid.is_radial() && self_coupling.iter().any(|c| c.kappa != 0.0) {
            return Err(SnError::Unsupported("self-interaction on a 1-D Cartesian grid".into()));
        }
        let external_potential = external.sample(&grid, mass)?;
        Ok(WaveState { grid, psi, mass, hbar, self_coupling, external_potential })
    }

    /// Real Gaussian `exp(−|x|²/(4σ²))` (position spread σ per axis),
    /// normalised on the grid.
    pub fn gaussian(
        grid: Grid,
        sigma: f64,
        mass: f64,
        hbar: f64,
        self_coupling: Vec<Coupling>,
        external: &ExternalPotential,
    ) -> Result<Self, SnError> {
        if !(sigma > 0.0) {
            return Err(SnError::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        let psi = grid
            .coordinates()
            .iter()
            .map(|x| Complex64::new((-x * x / (4.0 * sigma * sigma)).exp(), 0.0))
            .collect();
        WaveState::new(grid, psi, mass, hbar, self_coupling, external)?.normalized()
    }

    pub fn total_kappa(&self) -> f64 {
        self.self_coupling.iter().map(|c| c.kappa).sum()
    }

    /// Working units for the numerics: lengths in 32 grid spacings.
    pub fn units(&self) -> Units {
        Units::new(32.0 * self.grid.spacing(), self.mass, self.hbar)
    }

    /// Grid measure weights times `|ψ|²`.
    fn weighted_density(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        let x = self.grid.coordinates();
        self.psi
            .iter()
            .zip(&x)
            .map(|(z, r)| {
                let w = if self.grid.is_radial() { 4.0 * std::f64::consts::PI * r * r } else { 1.0 };
                w * h * z.norm_sqr()
            })
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.weighted_density().iter().sum()
    }

    pub fn normalized(mut self) -> Result<Self, SnError> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(SnError::Normalization { norm });
        }
        let s = norm.sqrt();
        self.psi.iter_mut().for_each(|z| *z /= s);
        Ok(self)
    }

    /// `⟨r²⟩^{1/2}` (radial) or `⟨x²⟩^{1/2}` (Cartesian).
    pub fn width(&self) -> f64 {
        let x = self.grid.coordinates();
        let w = self.weighted_density();
        (w.iter().zip(&x).map(|(w, x)| w * x * x).sum::<f64>() / w.iter().sum::<f64>()).sqrt()
    }

    /// Sign changes of the real profile, ignoring numerically zero samples.
    pub fn node_count(&self) -> usize {
        let peak = self.psi.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let mut last = 0.0;
        let mut count = 0;
        for z in &self.psi {
            if z.re.abs() <= 1e-7 * peak {
                continue;
            }
            if last != 0.0 && z.re.signum() != last {
                count += 1;
            }
            last = z.re.signum();
        }
        count
    }

    /// Self-potential `Σ_k κ_k ∫|ψ|²/|x − x′|` on the grid, energy units.
    pub fn self_potential(&self) -> Result<Vec<f64>, SnError> {
        let norm = self.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(SnError::Normalization { norm });
        }
        let kappa = self.total_kappa();
        if kappa == 0.0 || !self.grid.is_radial() {
            return Ok(vec![0.0; self.psi.len()]);
        }
        let r = self.grid.coordinates();
        Ok(unit_potential(&self.weighted_density(), &r).into_iter().map(|p| kappa * p).collect())
    }

    /// `E = T + ½⟨Φ⟩ + ⟨V⟩` in energy units.
    pub fn energy(&self) -> f64 {
        let model = Model::from_state(self);
        let u = model.reduce(&self.psi);
        model.energy(&u) * model.units.energy
    }

    /// Maximum |ψ| at the outermost grid point relative to the peak.
    pub fn edge_ratio(&self) -> f64 {
        let peak = self.psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let edge = match self.grid {
            Grid::Radial { .. } => self.psi.last().map_or(0.0, |z| z.norm()),
            Grid::Cartesian { .. } => self.psi[0].norm().max(self.psi.last().map_or(0.0, |z| z.norm())),
        };
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    }
}

/// `Φ_i = Σ_j w_j / max(r_i, r_j)` for measure weights `w_j = 4π r_j² h |ψ_j|²`.
pub(crate) fn unit_potential(weights: &[f64], r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut outer = vec![0.0; n + 1];
    for i in (0..n).rev() {
        outer[i] = outer[i + 1] + weights[i] / r[i];
    }
    let mut inner = 0.0;
    (0..n)
        .map(|i| {
            inner += weights[i];
            inner / r[i] + outer[i + 1]
        })
        .collect()
}

/// Dimensionless discretisation shared by the eigen and time solvers.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub radial: bool,
    pub h: f64,
    pub x: Vec<f64>,
    pub kappa: f64,
    pub v: Vec<f64>,
    pub units: Units,
}

impl Model {
    pub fn from_state(state: &WaveState) -> Self {
        let units = state.units();
        let grid = state.grid.scaled(units.length);
        Model {
            radial: grid.is_radial(),
            h: grid.spacing(),
            x: grid.coordinates(),
            kappa: state.total_kappa() / (units.energy * units.length),
            v: state.external_potential.iter().map(|v| v / units.energy).collect(),
            units,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `u` amplitudes with `h Σ|u|² = ∫|ψ|²`.
    pub fn reduce(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let scale = self.units.length.powf(if self.radial { 1.5 } else { 0.5 });
        let c = if self.radial { (4.0 * std::f64::consts::PI).sqrt() } else { 1.0 };
        psi.iter()
            .zip(&self.x)
            .map(|(z, x)| z * scale * c * if self.radial { *x } else { 1.0 })
            .collect()
    }

    pub fn expand(&self, u: &[Complex64]) -> Vec<Complex64> {
        let scale = self.units.length.powf(if self.radial { 1.5 } else { 0.5 });
        let c = if self.radial { (4.0 * std::f64::consts::PI).sqrt() } else { 1.0 };
        u.iter()
            .zip(&self.x)
            .map(|(z, x)| z / (scale * c * if self.radial { *x } else { 1.0 }))
            .collect()
    }

    pub fn norm(&self, u: &[Complex64]) -> f64 {
        self.h * u.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Self-potential for density `|u|²`, dimensionless.
    pub fn potential_of(&self, density: &[f64]) -> Vec<f64> {
        if self.kappa == 0.0 || !self.radial {
            return vec![0.0; self.n()];
        }
        let w: Vec<f64> = density.iter().map(|d| d * self.h).collect();
        unit_potential(&w, &self.x).into_iter().map(|p| self.kappa * p).collect()
    }

    pub fn kinetic_off(&self) -> f64 {
        -0.5 / (self.h * self.h)
    }

    pub fn kinetic_diag(&self) -> f64 {
        1.0 / (self.h * self.h)
    }

    pub fn hamiltonian(&self, phi: &[f64]) -> tridiag::SymTridiag {
        tridiag::SymTridiag {
            d: self.v.iter().zip(phi).map(|(v, p)| self.kinetic_diag() + v + p).collect(),
            e: vec![self.kinetic_off(); self.n() - 1],
        }
    }

    pub fn kinetic(&self, u: &[Complex64]) -> f64 {
        let n = u.len();
        let mut sum = u[0].norm_sqr() + u[n - 1].norm_sqr();
        for i in 0..n - 1 {
            sum += (u[i + 1] - u[i]).norm_sqr();
        }
        0.5 * sum / self.h
    }

    pub fn energy(&self, u: &[Complex64]) -> f64 {
        let density: Vec<f64> = u.iter().map(|z| z.norm_sqr()).collect();
        let phi = self.potential_of(&density);
        let pot: f64 = density.iter().zip(self.v.iter().zip(&phi)).map(|(d, (v, p))| d * (v + 0.5 * p)).sum();
        self.kinetic(u) + self.h * pot
    }

    pub fn second_moment(&self, u: &[Complex64]) -> f64 {
        self.h * u.iter().zip(&self.x).map(|(z, x)| z.norm_sqr() * x * x).sum::<f64>()
    }
}

#[cfg(test)]
mod tests;
