//! Stationary states: self-consistent field iteration on the grid and an
//! independent shooting solver for the pure self-gravitating case.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{characteristic_length, Coupling, ExternalPotential, Grid, Model, SnError, WaveState};
use crate::quantities::PhysicalConstants;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const MIN_POINTS_PER_LENGTH: f64 = 32.0;
const EDGE_RATIO: f64 = 1e-8;
const DAMPING: f64 = 0.5;
const PLAIN_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Scf,
    Shooting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnProblem {
    pub mass: f64,
    pub hbar: f64,
    pub couplings: Vec<Coupling>,
    #[serde(default)]
    pub external: ExternalPotential,
    /// Explicit grid. Without one the solver builds a grid from the
    /// characteristic length and widens it until the tail is resolved.
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default = "default_points_per_length")]
    pub points_per_length: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub method: Method,
}

fn default_points_per_length() -> f64 {
    64.0
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}
fn default_max_iterations() -> usize {
    2000
}

impl SnProblem {
    pub fn new(mass: f64, hbar: f64, couplings: Vec<Coupling>, external: ExternalPotential) -> Self {
        SnProblem {
            mass,
            hbar,
            couplings,
            external,
            grid: None,
            points_per_length: default_points_per_length(),
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: default_max_iterations(),
            method: Method::Scf,
        }
    }

    /// `ħ = m = G = 1`: energies come out in `G²m⁵/ħ²`.
    pub fn sn_natural() -> Self {
        SnProblem::new(1.0, 1.0, vec![Coupling::gravitational(1.0, 1.0)], ExternalPotential::None)
    }

    /// Self-gravitating particle of `mass` kilograms in SI units.
    pub fn gravitational(constants: &PhysicalConstants, mass: f64) -> Self {
        SnProblem::new(mass, constants.hbar(), vec![Coupling::gravitational(constants.g(), mass)], ExternalPotential::None)
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn characteristic_length(&self) -> Option<f64> {
        characteristic_length(self.mass, self.hbar, &self.couplings, &self.external)
    }

    pub fn total_kappa(&self) -> f64 {
        self.couplings.iter().map(|c| c.kappa).sum()
    }

    fn validate(&self) -> Result<(), SnError> {
        if !(self.mass > 0.0 && self.mass.is_finite() && self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(SnError::InvalidInput("mass and hbar must be positive".into()));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(SnError::InvalidInput("tolerance and max_iterations must be positive".into()));
        }
        if self.points_per_length < MIN_POINTS_PER_LENGTH {
            return Err(SnError::Grid(format!(
                "points_per_length {} is below the minimum {MIN_POINTS_PER_LENGTH}",
                self.points_per_length
            )));
        }
        Ok(())
    }

    /// Enforces at least 32 points per characteristic length.
    pub fn check_resolution(&self, grid: &Grid) -> Result<(), SnError> {
        grid.validate()?;
        if !grid.is_radial() {
            return Err(SnError::Unsupported("stationary states need a radial grid".into()));
        }
        if let Some(length) = self.characteristic_length() {
            let per_length = length / grid.spacing();
            if per_length < MIN_POINTS_PER_LENGTH * (1.0 - 1e-12) {
                return Err(SnError::Grid(format!(
                    "grid spacing {:e} gives {per_length:.1} points per characteristic length {length:e}; need at least {MIN_POINTS_PER_LENGTH}",
                    grid.spacing()
                )));
            }
        }
        Ok(())
    }

    fn auto_grid(&self, highest: usize) -> Result<Grid, SnError> {
        let length = self.characteristic_length().ok_or_else(|| {
            SnError::Grid("problem has no intrinsic length scale; supply an explicit grid".into())
        })?;
        let extent = 40.0 * length * ((highest + 1) * (highest + 1)) as f64;
        Grid::radial_to(extent, length / self.points_per_length)
    }

    fn empty_state(&self, grid: Grid) -> Result<WaveState, SnError> {
        WaveState::new(
            grid,
            vec![Complex64::new(0.0, 0.0); grid.points()],
            self.mass,
            self.hbar,
            self.couplings.clone(),
            &self.external,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryState {
    pub state: WaveState,
    pub eigenvalue: f64,
    pub node_count: usize,
    pub residual: f64,
    pub rayleigh_quotient: f64,
    pub iterations: usize,
    pub method: Method,
}

impl StationaryState {
    /// Eigenvalue in units of `m κ²/ħ²` (for gravity, `G²m⁵/ħ²`).
    pub fn natural_eigenvalue(&self) -> f64 {
        let kappa: f64 = self.state.total_kappa();
        self.eigenvalue * self.state.hbar * self.state.hbar / (self.state.mass * kappa * kappa)
    }
}

struct ScfOutcome {
    eigenvalue: f64,
    u: Vec<f64>,
    residual: f64,
    rayleigh: f64,
    iterations: usize,
}

fn normalise(model: &Model, u: &mut [f64]) {
    let norm = (model.h * u.iter().map(|v| v * v).sum::<f64>()).sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
}

fn eigenpair(model: &Model, phi: &[f64], k: usize) -> (f64, Vec<f64>) {
    let h = model.hamiltonian(phi);
    let lambda = h.eigenvalue(k);
    let mut u = h.eigenvector(lambda);
    normalise(model, &mut u);
    (lambda, u)
}

fn density(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| v * v).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scf(model: &Model, k: usize, tol: f64, max_iterations: usize) -> Result<ScfOutcome, SnError> {
    if model.kappa == 0.0 {
        let zero = vec![0.0; model.n()];
        let (eigenvalue, u) = eigenpair(model, &zero, k);
        let rayleigh = rayleigh(model, &u, &zero);
        return Ok(ScfOutcome { eigenvalue, u, residual: 0.0, rayleigh, iterations: 1 });
    }
    // Start from the k-th orbital of the attractive part of the kernel
    // treated as a point charge.
    let guess: Vec<f64> = model.x.iter().map(|r| model.kappa.min(0.0) / r).collect();
    let (_, u0) = eigenpair(model, &guess, k);
    let mut phi_in = model.potential_of(&density(&u0));
    let mut history = Vec::new();
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    for iteration in 1..=max_iterations {
        let (_, u) = eigenpair(model, &phi_in, k);
        let phi_out = model.potential_of(&density(&u));
        let r: Vec<f64> = phi_out.iter().zip(&phi_in).map(|(o, i)| o - i).collect();
        let residual = max_abs(&r) / max_abs(&phi_out);
        history.push(residual);
        if !residual.is_finite() {
            break;
        }
        if residual < tol {
            let (eigenvalue, u) = eigenpair(model, &phi_out, k);
            let phi = model.potential_of(&density(&u));
            let rayleigh = rayleigh(model, &u, &phi);
            return Ok(ScfOutcome { eigenvalue, u, residual, rayleigh, iterations: iteration });
        }
        let mut next: Vec<f64> = phi_in.iter().zip(&r).map(|(p, r)| p + DAMPING * r).collect();
        if iteration > PLAIN_ITERATIONS {
            if let Some((phi_prev, r_prev)) = &previous {
                let dr: Vec<f64> = r.iter().zip(r_prev).map(|(a, b)| a - b).collect();
                let dd = dot(&dr, &dr);
                if dd > 0.0 {
                    let theta = dot(&r, &dr) / dd;
                    for i in 0..next.len() {
                        next[i] -= theta * ((phi_in[i] - phi_prev[i]) + DAMPING * dr[i]);
                    }
                }
            }
        }
        previous = Some((phi_in, r));
        phi_in = next;
    }
    Err(SnError::Convergence { iterations: history.len(), residual_history: history })
}

fn rayleigh(model: &Model, u: &[f64], phi: &[f64]) -> f64 {
    let hu = model.hamiltonian(phi).apply(u);
    dot(u, &hu) / dot(u, u)
}

fn scf_state(problem: &SnProblem, grid: Grid, k: usize) -> Result<StationaryState, SnError> {
    let mut state = problem.empty_state(grid)?;
    let model = Model::from_state(&state);
    let out = scf(&model, k, problem.tolerance, problem.max_iterations)?;
    let u: Vec<Complex64> = out.u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    state.psi = model.expand(&u);
    Ok(StationaryState {
        node_count: state.node_count(),
        state,
        eigenvalue: out.eigenvalue * model.units.energy,
        residual: out.residual,
        rayleigh_quotient: out.rayleigh * model.units.energy,
        iterations: out.iterations,
        method: Method::Scf,
    })
}

/// States with node counts `0..n_states`, ordered by node count.
pub fn stationary_states(problem: &SnProblem, n_states: usize) -> Result<Vec<StationaryState>, SnError> {
    problem.validate()?;
    if n_states == 0 {
        return Err(SnError::InvalidInput("n_states must be at least 1".into()));
    }
    let auto = problem.grid.is_none();
    let mut grid = match problem.grid {
        Some(g) => g,
        None => problem.auto_grid(n_states - 1)?,
    };
    problem.check_resolution(&grid)?;
    'grid: loop {
        let mut states = Vec::with_capacity(n_states);
        for k in 0..n_states {
            let state = match problem.method {
                Method::Scf => scf_state(problem, grid, k)?,
                Method::Shooting => shooting_state(problem, grid, k)?,
            };
            if state.state.edge_ratio() > EDGE_RATIO {
                if auto {
                    let Grid::Radial { spacing, points } = grid else { unreachable!() };
                    grid = Grid::radial(spacing, (points as f64 * 1.5) as usize)?;
                    continue 'grid;
                }
                return Err(SnError::Grid(format!(
                    "r_max {:e} too small: |ψ| at the boundary is {:.2e} of its peak for the state with {k} nodes",
                    grid.extent(),
                    state.state.edge_ratio()
                )));
            }
            states.push(state);
        }
        if let Some(w) = states.windows(2).find(|w| !(w[1].eigenvalue > w[0].eigenvalue)) {
            return Err(SnError::InvalidInput(format!(
                "eigenvalues not increasing with node count: {} then {}",
                w[0].eigenvalue, w[1].eigenvalue
            )));
        }
        return Ok(states);
    }
}

pub fn ground_state(problem: &SnProblem) -> Result<StationaryState, SnError> {
    Ok(stationary_states(problem, 1)?.remove(0))
}

// ---------------------------------------------------------------------------
// Shooting. In units ħ = m = |κ| = 1 with W = ε − Φ the pair is
//   ψ'' = −2Wψ − 2ψ'/r,   W'' = −4πψ² − 2W'/r,
// started from ψ(0) = 1, W(0) = w0. Solutions rescale as
// (ψ, W)(r) → λ²(ψ, W)(λr), which fixes the norm after the fact.

const SHOOT_STEP: f64 = 1e-3;
const SHOOT_LIMIT: f64 = 1e4;

struct Shot {
    nodes: usize,
    /// Samples `(r, ψ, ψ', W, W')` up to the turning point of |ψ|.
    samples: Vec<[f64; 5]>,
}

fn derivs(r: f64, y: &[f64; 4]) -> [f64; 4] {
    let [p, dp, w, dw] = *y;
    [dp, -2.0 * w * p - 2.0 * dp / r, dw, -4.0 * std::f64::consts::PI * p * p - 2.0 * dw / r]
}

fn shoot(w0: f64, max_nodes: usize, record: bool) -> Shot {
    let h = SHOOT_STEP;
    let mut r = h;
    let mut y = [1.0 - w0 * r * r / 3.0, -2.0 * w0 * r / 3.0, w0 - 2.0 * std::f64::consts::PI * r * r / 3.0, -4.0 * std::f64::consts::PI * r / 3.0];
    let mut nodes = 0;
    let mut samples = Vec::new();
    if record {
        samples.push([0.0, 1.0, 0.0, w0, 0.0]);
        samples.push([r, y[0], y[1], y[2], y[3]]);
    }
    while r < SHOOT_LIMIT {
        let add = |a: &[f64; 4], b: &[f64; 4], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]];
        let k1 = derivs(r, &y);
        let k2 = derivs(r + 0.5 * h, &add(&y, &k1, 0.5 * h));
        let k3 = derivs(r + 0.5 * h, &add(&y, &k2, 0.5 * h));
        let k4 = derivs(r + h, &add(&y, &k3, h));
        let next: [f64; 4] = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        r += h;
        if next[0] * y[0] < 0.0 {
            nodes += 1;
        }
        y = next;
        if nodes > max_nodes || !y.iter().all(|v| v.is_finite()) {
            break;
        }
        if y[2] < 0.0 && y[0] * y[1] > 0.0 {
            break;
        }
        if record {
            samples.push([r, y[0], y[1], y[2], y[3]]);
        }
    }
    Shot { nodes, samples }
}

struct ShootingSolution {
    epsilon: f64,
    /// `1/N`: normalised state is `λ²ψ(λr)`.
    lambda: f64,
    samples: Vec<[f64; 5]>,
    residual: f64,
}

fn shooting_solution(n: usize) -> Result<ShootingSolution, SnError> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while shoot(hi, n, false).nodes <= n {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(SnError::Convergence { iterations: 0, residual_history: vec![] });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shoot(mid, n, false).nodes > n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let shot = shoot(lo, n, true);
    let last = *shot.samples.last().expect("shot records samples");
    let (r_c, w, dw) = (last[0], last[3], last[4]);
    let mass = -r_c * r_c * dw;
    let epsilon_raw = w - mass / r_c;
    Ok(ShootingSolution {
        epsilon: epsilon_raw / (mass * mass),
        lambda: 1.0 / mass,
        samples: shot.samples,
        residual: (hi - lo) / hi,
    })
}

/// Dimensionless eigenvalue (units `m κ²/ħ²`) of the self-gravitating state
/// with `n` nodes, by shooting.
pub fn shooting_eigenvalue(n: usize) -> Result<f64, SnError> {
    Ok(shooting_solution(n)?.epsilon)
}

fn hermite(samples: &[[f64; 5]], r: f64) -> f64 {
    let h = SHOOT_STEP;
    let last = samples.last().unwrap()[0];
    if r >= last {
        return 0.0;
    }
    // samples[0] is r = 0, then r = i·h.
    let i = ((r / h).floor() as usize).min(samples.len() - 2);
    let (a, b) = (samples[i], samples[i + 1]);
    let t = (r - a[0]) / (b[0] - a[0]);
    let dx = b[0] - a[0];
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * a[1]
        + (t3 - 2.0 * t2 + t) * dx * a[2]
        + (-2.0 * t3 + 3.0 * t2) * b[1]
        + (t3 - t2) * dx * b[2]
}

fn shooting_state(problem: &SnProblem, grid: Grid, k: usize) -> Result<StationaryState, SnError> {
    let kappa = problem.total_kappa();
    if !(kappa < 0.0) || !matches!(problem.external, ExternalPotential::None) {
        return Err(SnError::Unsupported(
            "shooting handles a purely attractive self-coupling without external potential".into(),
        ));
    }
    let sol = shooting_solution(k)?;
    let length = problem.hbar * problem.hbar / (problem.mass * kappa.abs());
    let energy = problem.mass * kappa * kappa / (problem.hbar * problem.hbar);
    let mut state = problem.empty_state(grid)?;
    let lambda = sol.lambda;
    state.psi = grid
        .coordinates()
        .iter()
        .map(|r| Complex64::new(lambda * lambda * hermite(&sol.samples, lambda * r / length) / length.powf(1.5), 0.0))
        .collect();
    let state = state.normalized()?;
    let model = Model::from_state(&state);
    let u: Vec<f64> = model.reduce(&state.psi).iter().map(|z| z.re).collect();
    let phi = model.potential_of(&density(&u));
    let rq = rayleigh(&model, &u, &phi) * model.units.energy;
    Ok(StationaryState {
        node_count: state.node_count(),
        state,
        eigenvalue: sol.epsilon * energy,
        residual: sol.residual,
        rayleigh_quotient: rq,
        iterations: 1,
        method: Method::Shooting,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub node_count: usize,
    pub scf: f64,
    pub shooting: f64,
    pub relative_difference: f64,
}

/// Compares SCF eigenvalues with shooting eigenvalues for each node count.
pub fn cross_check(problem: &SnProblem, n_states: usize) -> Result<Vec<CrossCheck>, SnError> {
    let scf = stationary_states(&problem.clone().with_method(Method::Scf), n_states)?;
    let kappa = problem.total_kappa();
    if !(kappa < 0.0) || !matches!(problem.external, ExternalPotential::None) {
        return Err(SnError::Unsupported("shooting cross-check needs pure attractive self-coupling".into()));
    }
    let energy = problem.mass * kappa * kappa / (problem.hbar * problem.hbar);
    scf.iter()
        .enumerate()
        .map(|(k, s)| {
            let shooting = shooting_eigenvalue(k)? * energy;
            Ok(CrossCheck {
                node_count: k,
                scf: s.eigenvalue,
                shooting,
                relative_difference: ((s.eigenvalue - shooting) / shooting).abs(),
            })
        })
        .collect()
}
