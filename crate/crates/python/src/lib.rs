//! Python bindings: mass distributions, superposition energies, collapse
//! times, Schrödinger–Newton states, collapse ensembles and manifest runs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gravcollapse::cli::{self, RunManifest};
use gravcollapse::collapsesim::{self, CollapseModel};
use gravcollapse::dpcriterion::{self, Lifetime};
use gravcollapse::massdist::{self as md, EnergyEngine, RadialProfile, SuperpositionSpec};
use gravcollapse::quantities;
use gravcollapse::snsolver::{self as sn, Grid, SnProblem, WaveState};
use gravcollapse::Error;

fn err(e: impl Into<Error>) -> PyErr {
    let e: Error = e.into();
    if e.exit_code() == 1 {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PhysicalConstants(quantities::PhysicalConstants);

#[pymethods]
impl PhysicalConstants {
    /// CODATA 2018 values, optionally overriding `hbar`, `G`, `c`,
    /// `e2_coulomb` or `m_e`.
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let base = quantities::PhysicalConstants::default();
        Ok(PhysicalConstants(base.with_overrides(&overrides.unwrap_or_default()).map_err(err)?))
    }

    #[getter]
    fn hbar(&self) -> f64 {
        self.0.hbar()
    }

    #[getter(G)]
    fn g(&self) -> f64 {
        self.0.g()
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.c()
    }

    #[getter]
    fn e2_coulomb(&self) -> f64 {
        self.0.e2_coulomb()
    }

    #[getter]
    fn m_e(&self) -> f64 {
        self.0.m_e()
    }
}

fn constants(c: Option<PhysicalConstants>) -> quantities::PhysicalConstants {
    c.map(|c| c.0).unwrap_or_default()
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct MassDistribution(md::MassDistribution);

#[pymethods]
impl MassDistribution {
    #[staticmethod]
    #[pyo3(signature = (mass, radius, center = [0.0; 3]))]
    fn uniform_sphere(mass: f64, radius: f64, center: [f64; 3]) -> PyResult<Self> {
        Ok(Self(md::MassDistribution::uniform_sphere(mass, radius, center).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (mass, radius, center = [0.0; 3]))]
    fn spherical_shell(mass: f64, radius: f64, center: [f64; 3]) -> PyResult<Self> {
        Ok(Self(md::MassDistribution::spherical_shell(mass, radius, center).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (mass, width, center = [0.0; 3]))]
    fn gaussian(mass: f64, width: f64, center: [f64; 3]) -> PyResult<Self> {
        Ok(Self(md::MassDistribution::gaussian(mass, width, center).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (mass, smearing_length, center = [0.0; 3]))]
    fn point_mass(mass: f64, smearing_length: f64, center: [f64; 3]) -> PyResult<Self> {
        Ok(Self(md::MassDistribution::point_mass(mass, center, smearing_length).map_err(err)?))
    }

    /// Density samples `rho(r)` in kg/m³ at increasing radii in m.
    #[staticmethod]
    #[pyo3(signature = (radii, density, center = [0.0; 3], declared_mass = None))]
    fn radial_profile(radii: Vec<f64>, density: Vec<f64>, center: [f64; 3], declared_mass: Option<f64>) -> PyResult<Self> {
        let p = RadialProfile::new(radii, density, declared_mass).map_err(err)?;
        Ok(Self(md::MassDistribution::radial_profile(p, center)))
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.0.total_mass()
    }

    #[getter]
    fn center(&self) -> [f64; 3] {
        self.0.center()
    }

    fn translated(&self, offset: [f64; 3]) -> Self {
        Self(self.0.translated(offset))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("distribution serialises")
    }

    fn __repr__(&self) -> String {
        format!("MassDistribution({})", self.to_json())
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Superposition(SuperpositionSpec);

#[pymethods]
impl Superposition {
    /// Equal real amplitudes when none are given.
    #[new]
    #[pyo3(signature = (branch_a, branch_b, amp_a = None, amp_b = None))]
    fn new(
        branch_a: MassDistribution,
        branch_b: MassDistribution,
        amp_a: Option<Complex64>,
        amp_b: Option<Complex64>,
    ) -> PyResult<Self> {
        let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let spec = SuperpositionSpec::new(branch_a.0, branch_b.0, amp_a.unwrap_or(half), amp_b.unwrap_or(half))
            .map_err(err)?;
        Ok(Self(spec))
    }

    #[getter]
    fn weights(&self) -> (f64, f64) {
        self.0.weights()
    }

    #[getter]
    fn separation(&self) -> f64 {
        self.0.separation()
    }

    fn digest(&self) -> String {
        self.0.digest()
    }
}

/// Self-energy `U = (G/2)∬ρρ/|x−y|` in joules.
#[pyfunction]
#[pyo3(signature = (distribution, constants = None))]
fn self_energy(distribution: &MassDistribution, constants: Option<PhysicalConstants>) -> PyResult<f64> {
    EnergyEngine::new(self::constants(constants)).self_energy(&distribution.0).map_err(err)
}

/// Superposition energy `E_Δ` in joules.
#[pyfunction]
#[pyo3(signature = (spec, constants = None))]
fn e_delta(spec: &Superposition, constants: Option<PhysicalConstants>) -> PyResult<f64> {
    EnergyEngine::new(self::constants(constants)).e_delta(&spec.0).map_err(err)
}

/// Monte Carlo `(mean, standard error)` of `E_Δ`.
#[pyfunction]
#[pyo3(signature = (spec, samples, seed = 0, constants = None))]
fn e_delta_monte_carlo(
    spec: &Superposition,
    samples: usize,
    seed: u64,
    constants: Option<PhysicalConstants>,
) -> PyResult<(f64, f64)> {
    let est = md::monte_carlo::e_delta_monte_carlo(&spec.0, &self::constants(constants), samples, seed).map_err(err)?;
    Ok((est.mean, est.std_error))
}

/// Collapse time in seconds; `inf` for identical branches.
#[pyfunction]
#[pyo3(signature = (spec, prefactor = 1.0, constants = None))]
fn collapse_time(spec: &Superposition, prefactor: f64, constants: Option<PhysicalConstants>) -> PyResult<f64> {
    let engine = EnergyEngine::new(self::constants(constants));
    let est = dpcriterion::collapse_time(&spec.0, prefactor, &engine).map_err(err)?;
    Ok(match est.collapse_time {
        Lifetime::Finite(t) => t,
        Lifetime::Infinite => f64::INFINITY,
    })
}

/// `√(ħc/G)` in kilograms.
#[pyfunction]
#[pyo3(signature = (constants = None))]
fn feynman_mass_scale(constants: Option<PhysicalConstants>) -> f64 {
    dpcriterion::feynman_mass_scale(&self::constants(constants))
}

#[pyclass(frozen)]
struct StationaryState(sn::StationaryState);

#[pymethods]
impl StationaryState {
    #[getter]
    fn eigenvalue(&self) -> f64 {
        self.0.eigenvalue
    }

    #[getter]
    fn natural_eigenvalue(&self) -> f64 {
        self.0.natural_eigenvalue()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn r(&self) -> Vec<f64> {
        self.0.state.grid.coordinates()
    }

    /// Real part of ψ on the grid.
    #[getter]
    fn psi(&self) -> Vec<f64> {
        self.0.state.psi.iter().map(|z| z.re).collect()
    }

    fn __repr__(&self) -> String {
        format!("StationaryState(nodes={}, eigenvalue={:e})", self.0.node_count, self.0.eigenvalue)
    }
}

/// Lowest self-gravitating states with `ħ = m = G = 1` unless the
/// particle mass (kg) is given, in which case SI units are used.
#[pyfunction]
#[pyo3(signature = (n_states = 1, mass = None, method = "scf"))]
fn sn_spectrum(n_states: usize, mass: Option<f64>, method: &str) -> PyResult<Vec<StationaryState>> {
    let problem = match mass {
        Some(m) => SnProblem::gravitational(&quantities::PhysicalConstants::default(), m),
        None => SnProblem::sn_natural(),
    };
    let method = match method {
        "scf" => sn::Method::Scf,
        "shooting" => sn::Method::Shooting,
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    };
    let states = sn::stationary_states(&problem.with_method(method), n_states).map_err(err)?;
    Ok(states.into_iter().map(StationaryState).collect())
}

/// Evolves a Gaussian of spread `sigma` in SN-natural units on a radial
/// grid; returns `(time, norm, energy, width)` rows.
#[pyfunction]
#[pyo3(signature = (sigma, dt, steps, r_max, spacing, self_gravity = true))]
fn evolve_gaussian(
    sigma: f64,
    dt: f64,
    steps: usize,
    r_max: f64,
    spacing: f64,
    self_gravity: bool,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let grid = Grid::radial_to(r_max, spacing).map_err(err)?;
    let couplings = if self_gravity { SnProblem::sn_natural().couplings } else { Vec::new() };
    let state = WaveState::gaussian(grid, sigma, 1.0, 1.0, couplings, &Default::default()).map_err(err)?;
    let traj = sn::evolve(&state, dt, steps).map_err(err)?;
    Ok(traj.observables.iter().map(|o| (o.time, o.norm, o.energy, o.width)).collect())
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Hydrogen ground state and first-order self-interaction terms (eV).
#[pyfunction]
#[pyo3(signature = (electrostatic = true, gravitational = true))]
fn hydrogen_diagnostic(py: Python<'_>, electrostatic: bool, gravitational: bool) -> PyResult<Bound<'_, PyAny>> {
    let report =
        sn::hydrogen_diagnostic(&quantities::PhysicalConstants::default(), electrostatic, gravitational).map_err(err)?;
    json_to_py(py, &report)
}

/// Collapse ensemble summary; `rate` (s⁻¹) overrides `E_Δ/(kħ)`.
#[pyfunction]
#[pyo3(signature = (spec, trajectories, seed = 0, rate = None, prefactor = 1.0))]
fn simulate_collapse<'py>(
    py: Python<'py>,
    spec: &Superposition,
    trajectories: usize,
    seed: u64,
    rate: Option<f64>,
    prefactor: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let engine = EnergyEngine::new(quantities::PhysicalConstants::default());
    let mut model = CollapseModel::from_spec(spec.0.clone(), &engine, prefactor).map_err(err)?;
    if let Some(r) = rate {
        model = model.with_rate(r);
    }
    let ens = collapsesim::simulate(&model, trajectories, seed).map_err(err)?;
    let out = json_to_py(py, &ens.summary)?;
    let dict = out.cast::<PyDict>()?;
    dict.set_item("rate", model.rate)?;
    dict.set_item("model_digest", &ens.model_digest)?;
    Ok(out)
}

/// Runs a TOML manifest into `output_dir`; returns the bundle as a dict.
#[pyfunction]
fn run_manifest<'py>(py: Python<'py>, manifest: &str, output_dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let m = RunManifest::from_toml(manifest).map_err(err)?;
    let bundle = cli::run(&m, &output_dir).map_err(err)?;
    json_to_py(py, &bundle)
}

#[pymodule]
#[pyo3(name = "gravcollapse")]
pub fn gravcollapse_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PhysicalConstants>()?;
    m.add_class::<MassDistribution>()?;
    m.add_class::<Superposition>()?;
    m.add_class::<StationaryState>()?;
    m.add_function(wrap_pyfunction!(self_energy, m)?)?;
    m.add_function(wrap_pyfunction!(e_delta, m)?)?;
    m.add_function(wrap_pyfunction!(e_delta_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(collapse_time, m)?)?;
    m.add_function(wrap_pyfunction!(feynman_mass_scale, m)?)?;
    m.add_function(wrap_pyfunction!(sn_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(hydrogen_diagnostic, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_collapse, m)?)?;
    m.add_function(wrap_pyfunction!(run_manifest, m)?)?;
    Ok(())
}
