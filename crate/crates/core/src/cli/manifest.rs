//! Run manifests: a TOML document with a `[command]` table naming the
//! command and carrying its parameters.
//!
//! The canonical text (used for the persisted copy and for hashing) is the
//! manifest re-serialised with sorted keys and LF line endings, without
//! `output_dir`, which says where results go rather than what they are.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dpcriterion::SweepFamily;
use crate::error::ManifestError;
use crate::massdist::{MassDistribution, MassError, SuperpositionSpec};
use crate::quantities::ScaleLabel;
use crate::snsolver::{CouplingKind, ExternalPotential, Grid, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance of the energy quadratures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<f64>,
    /// Self-consistency residual for stationary states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestBody {
    #[serde(default = "default_scale")]
    scale_system: ScaleLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass_reference: Option<f64>,
    #[serde(default)]
    constant_overrides: BTreeMap<String, f64>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
}

fn default_scale() -> ScaleLabel {
    ScaleLabel::Si
}

fn default_prefactor() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfEnergyParams {
    pub distribution: MassDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo_samples: Option<usize>,
}

/// Two branches and their amplitudes; equal weights when amplitudes are
/// omitted. Amplitudes are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EDeltaParams {
    pub branch_a: MassDistribution,
    pub branch_b: MassDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp_a: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp_b: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseTimeParams {
    pub branch_a: MassDistribution,
    pub branch_b: MassDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp_a: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp_b: Option<Complex64>,
    #[serde(default = "default_prefactor")]
    pub prefactor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimeSweepParams {
    pub family: SweepFamily,
    #[serde(default = "default_prefactor")]
    pub prefactor: f64,
}

/// A self-interaction term. Gravitational and electrostatic strengths are
/// derived from the constants unless `kappa` is given; custom terms need it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

fn default_couplings() -> Vec<CouplingSpec> {
    vec![CouplingSpec { kind: CouplingKind::Gravitational, kappa: None }]
}

fn default_sn_mass() -> f64 {
    1.0
}

fn default_n_states() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnParams {
    /// Particle mass in units of the scale system's mass.
    #[serde(default = "default_sn_mass")]
    pub mass: f64,
    #[serde(default = "default_couplings")]
    pub couplings: Vec<CouplingSpec>,
    #[serde(default)]
    pub external: ExternalPotential,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_length: Option<f64>,
    #[serde(default)]
    pub method: Method,
}

impl Default for SnParams {
    fn default() -> Self {
        SnParams {
            mass: default_sn_mass(),
            couplings: default_couplings(),
            external: ExternalPotential::None,
            grid: None,
            points_per_length: None,
            method: Method::Scf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnSpectrumParams {
    #[serde(flatten)]
    pub problem: SnParams,
    #[serde(default = "default_n_states")]
    pub n_states: usize,
    #[serde(default)]
    pub cross_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    /// Real Gaussian with spread `sigma` per axis (scale length units).
    Gaussian { sigma: f64 },
    /// The self-consistent ground state on the evolution grid.
    GroundState,
    /// `x, Re ψ, Im ψ` rows; renormalised after loading.
    Csv {
        path: PathBuf,
        #[serde(default = "yes")]
        radial: bool,
    },
}

fn default_initial() -> InitialState {
    InitialState::Gaussian { sigma: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnEvolveParams {
    #[serde(default = "default_sn_mass")]
    pub mass: f64,
    #[serde(default = "default_couplings")]
    pub couplings: Vec<CouplingSpec>,
    #[serde(default)]
    pub external: ExternalPotential,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default = "default_initial")]
    pub initial: InitialState,
    /// Time step in scale time units.
    pub dt: f64,
    pub steps: usize,
    #[serde(default)]
    pub inner_iteration: bool,
    #[serde(default)]
    pub compare_free: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydrogenParams {
    #[serde(default = "yes")]
    pub electrostatic: bool,
    #[serde(default = "yes")]
    pub gravitational: bool,
}

fn default_trajectories() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSimParams {
    pub branch_a: MassDistribution,
    pub branch_b: MassDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp_a: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp_b: Option<Complex64>,
    #[serde(default = "default_prefactor")]
    pub prefactor: f64,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    /// Overrides `E_Δ/(kħ)`; inverse scale time units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// `[E_a, E_b]` in scale energy units.
    #[serde(default)]
    pub branch_energies: [f64; 2],
    #[serde(default)]
    pub interference_energy: f64,
    /// When set, also runs the degenerate / split / interference ledger
    /// scenarios with this energy scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger_scenarios: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Empty {}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    SelfEnergy(SelfEnergyParams),
    EDelta(EDeltaParams),
    CollapseTime(CollapseTimeParams),
    FeynmanScale,
    LifetimeSweep(LifetimeSweepParams),
    SnGround(SnParams),
    SnSpectrum(SnSpectrumParams),
    SnEvolve(SnEvolveParams),
    HydrogenShift(HydrogenParams),
    CollapseSim(CollapseSimParams),
}

pub const COMMAND_NAMES: [&str; 10] = [
    "selfenergy",
    "e-delta",
    "collapse-time",
    "feynman-scale",
    "lifetime-sweep",
    "sn-ground",
    "sn-spectrum",
    "sn-evolve",
    "hydrogen-shift",
    "collapse-sim",
];

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SelfEnergy(_) => "selfenergy",
            Command::EDelta(_) => "e-delta",
            Command::CollapseTime(_) => "collapse-time",
            Command::FeynmanScale => "feynman-scale",
            Command::LifetimeSweep(_) => "lifetime-sweep",
            Command::SnGround(_) => "sn-ground",
            Command::SnSpectrum(_) => "sn-spectrum",
            Command::SnEvolve(_) => "sn-evolve",
            Command::HydrogenShift(_) => "hydrogen-shift",
            Command::CollapseSim(_) => "collapse-sim",
        }
    }

    fn params_value(&self) -> Result<toml::Value, toml::ser::Error> {
        fn v<T: Serialize>(t: &T) -> Result<toml::Value, toml::ser::Error> {
            toml::Value::try_from(t)
        }
        match self {
            Command::SelfEnergy(p) => v(p),
            Command::EDelta(p) => v(p),
            Command::CollapseTime(p) => v(p),
            Command::FeynmanScale => v(&Empty {}),
            Command::LifetimeSweep(p) => v(p),
            Command::SnGround(p) => v(p),
            Command::SnSpectrum(p) => v(p),
            Command::SnEvolve(p) => v(p),
            Command::HydrogenShift(p) => v(p),
            Command::CollapseSim(p) => v(p),
        }
    }

    fn from_table(name: &str, params: toml::Value) -> Result<Self, ManifestError> {
        Ok(match name {
            "selfenergy" => Command::SelfEnergy(parse(params)?),
            "e-delta" => Command::EDelta(parse(params)?),
            "collapse-time" => Command::CollapseTime(parse(params)?),
            "feynman-scale" => {
                let _: Empty = parse(params)?;
                Command::FeynmanScale
            }
            "lifetime-sweep" => Command::LifetimeSweep(parse(params)?),
            "sn-ground" => Command::SnGround(parse(params)?),
            "sn-spectrum" => Command::SnSpectrum(parse(params)?),
            "sn-evolve" => Command::SnEvolve(parse(params)?),
            "hydrogen-shift" => Command::HydrogenShift(parse(params)?),
            "collapse-sim" => Command::CollapseSim(parse(params)?),
            other => {
                return Err(ManifestError::new(
                    "command.name",
                    format!("unknown command `{other}`; expected one of {}", COMMAND_NAMES.join(", ")),
                ))
            }
        })
    }
}

fn join_path(prefix: &str, path: &serde_path_to_error::Path) -> String {
    let tail = path.to_string();
    if tail == "." || tail.is_empty() {
        prefix.to_string()
    } else {
        format!("{prefix}.{tail}")
    }
}

fn parse<T: DeserializeOwned>(params: toml::Value) -> Result<T, ManifestError> {
    serde_path_to_error::deserialize(params).map_err(|e| {
        let path = join_path("command", e.path());
        ManifestError::new(path, first_line(e.into_inner()))
    })
}

fn first_line(e: impl std::fmt::Display) -> String {
    e.to_string().lines().next().unwrap_or_default().trim().to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: Command,
    pub scale_system: ScaleLabel,
    /// Mass unit (kg) of the SN-NATURAL scale; 1 kg when omitted.
    pub mass_reference: Option<f64>,
    pub constant_overrides: BTreeMap<String, f64>,
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl RunManifest {
    pub fn new(command: Command) -> Self {
        RunManifest {
            command,
            scale_system: ScaleLabel::Si,
            mass_reference: None,
            constant_overrides: BTreeMap::new(),
            tolerances: Tolerances::default(),
            output_dir: None,
            seed: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ManifestError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ManifestError::new("", e.to_string()))?;
        let command = match table.remove("command") {
            Some(toml::Value::Table(mut t)) => {
                let name = match t.remove("name") {
                    Some(toml::Value::String(s)) => s,
                    Some(_) => return Err(ManifestError::new("command.name", "must be a string")),
                    None => return Err(ManifestError::new("command.name", "missing command name")),
                };
                Command::from_table(&name, toml::Value::Table(t))?
            }
            Some(_) => return Err(ManifestError::new("command", "must be a table")),
            None => return Err(ManifestError::new("command", "missing [command] table")),
        };
        let body: ManifestBody = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            ManifestError::new(if path == "." { String::new() } else { path }, first_line(e.into_inner()))
        })?;
        let manifest = RunManifest {
            command,
            scale_system: body.scale_system,
            mass_reference: body.mass_reference,
            constant_overrides: body.constant_overrides,
            tolerances: body.tolerances,
            output_dir: body.output_dir,
            seed: body.seed,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::Io(format!("{}: {e}", path.display())))?;
        Ok(RunManifest::from_toml(&text)?)
    }

    fn to_table(&self, include_output_dir: bool) -> toml::Table {
        let body = ManifestBody {
            scale_system: self.scale_system,
            mass_reference: self.mass_reference,
            constant_overrides: self.constant_overrides.clone(),
            tolerances: self.tolerances.clone(),
            output_dir: if include_output_dir { self.output_dir.clone() } else { None },
            seed: self.seed,
        };
        let mut table = match toml::Value::try_from(&body).expect("manifest body serialises") {
            toml::Value::Table(t) => t,
            _ => unreachable!(),
        };
        let mut command = match self.command.params_value().expect("command serialises") {
            toml::Value::Table(t) => t,
            _ => toml::Table::new(),
        };
        command.insert("name".into(), toml::Value::String(self.command.name().into()));
        table.insert("command".into(), toml::Value::Table(command));
        table
    }

    /// Sorted-key TOML without `output_dir`.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(&self.to_table(false)).expect("manifest serialises").replace("\r\n", "\n")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_table(true)).expect("manifest serialises")
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }

    /// Value-level checks, reported with field paths.
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.seed > i64::MAX as u64 {
            return Err(ManifestError::new("seed", format!("must be at most {}, got {}", i64::MAX, self.seed)));
        }
        if let Some(m) = self.mass_reference {
            positive("mass_reference", m)?;
        }
        for (k, v) in &self.constant_overrides {
            positive(&format!("constant_overrides.{k}"), *v)?;
        }
        if let Some(t) = self.tolerances.quadrature {
            positive("tolerances.quadrature", t)?;
        }
        if let Some(t) = self.tolerances.scf {
            positive("tolerances.scf", t)?;
        }
        match &self.command {
            Command::SelfEnergy(p) => {
                distribution("command.distribution", &p.distribution)?;
                if let Some(n) = p.monte_carlo_samples {
                    at_least("command.monte_carlo_samples", n, 2)?;
                }
            }
            Command::EDelta(p) => {
                superposition(&p.branch_a, &p.branch_b, p.amp_a, p.amp_b)?;
                if let Some(n) = p.monte_carlo_samples {
                    at_least("command.monte_carlo_samples", n, 2)?;
                }
            }
            Command::CollapseTime(p) => {
                superposition(&p.branch_a, &p.branch_b, p.amp_a, p.amp_b)?;
                positive("command.prefactor", p.prefactor)?;
            }
            Command::FeynmanScale => {}
            Command::LifetimeSweep(p) => {
                positive("command.prefactor", p.prefactor)?;
                match &p.family {
                    SweepFamily::Separation { shape, separations } => {
                        distribution("command.family.shape", shape)?;
                        nonempty("command.family.separations", separations.len())?;
                    }
                    SweepFamily::MassScale { spec, factors } => {
                        spec_paths("command.family.spec", spec)?;
                        nonempty("command.family.factors", factors.len())?;
                    }
                    SweepFamily::Explicit { members } => {
                        nonempty("command.family.members", members.len())?;
                        for (i, (_, s)) in members.iter().enumerate() {
                            spec_paths(&format!("command.family.members[{i}]"), s)?;
                        }
                    }
                }
            }
            Command::SnGround(p) => sn("command", p)?,
            Command::SnSpectrum(p) => {
                sn("command", &p.problem)?;
                at_least("command.n_states", p.n_states, 1)?;
            }
            Command::SnEvolve(p) => {
                positive("command.mass", p.mass)?;
                couplings("command.couplings", &p.couplings)?;
                if let Some(g) = &p.grid {
                    g.validate().map_err(|e| ManifestError::new("command.grid", e.to_string()))?;
                }
                if let InitialState::Gaussian { sigma } = p.initial {
                    positive("command.initial.sigma", sigma)?;
                }
                positive("command.dt", p.dt)?;
                at_least("command.steps", p.steps, 1)?;
            }
            Command::HydrogenShift(_) => {}
            Command::CollapseSim(p) => {
                superposition(&p.branch_a, &p.branch_b, p.amp_a, p.amp_b)?;
                positive("command.prefactor", p.prefactor)?;
                at_least("command.trajectories", p.trajectories, 1)?;
                if let Some(r) = p.rate {
                    if !(r.is_finite() && r >= 0.0) {
                        return Err(ManifestError::new("command.rate", format!("must be finite and non-negative, got {r}")));
                    }
                }
                if let Some(e) = p.ledger_scenarios {
                    positive("command.ledger_scenarios", e)?;
                }
            }
        }
        Ok(())
    }
}

fn positive(path: &str, v: f64) -> Result<(), ManifestError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ManifestError::new(path, format!("must be finite and positive, got {v}")))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> Result<(), ManifestError> {
    if v >= min {
        Ok(())
    } else {
        Err(ManifestError::new(path, format!("must be at least {min}, got {v}")))
    }
}

fn nonempty(path: &str, len: usize) -> Result<(), ManifestError> {
    if len > 0 {
        Ok(())
    } else {
        Err(ManifestError::new(path, "must not be empty"))
    }
}

fn distribution(path: &str, d: &MassDistribution) -> Result<(), ManifestError> {
    d.validate().map_err(|e| match e {
        MassError::NonPositive { field, .. } => ManifestError::new(format!("{path}.{field}"), e.to_string()),
        MassError::NonPositiveMass(_) => ManifestError::new(format!("{path}.profile"), e.to_string()),
        other => ManifestError::new(path, other.to_string()),
    })
}

/// Builds the superposition, defaulting to equal real amplitudes.
pub fn build_spec(
    a: &MassDistribution,
    b: &MassDistribution,
    amp_a: Option<Complex64>,
    amp_b: Option<Complex64>,
) -> Result<SuperpositionSpec, MassError> {
    let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    SuperpositionSpec::new(a.clone(), b.clone(), amp_a.unwrap_or(half), amp_b.unwrap_or(half))
}

fn superposition(
    a: &MassDistribution,
    b: &MassDistribution,
    amp_a: Option<Complex64>,
    amp_b: Option<Complex64>,
) -> Result<(), ManifestError> {
    distribution("command.branch_a", a)?;
    distribution("command.branch_b", b)?;
    build_spec(a, b, amp_a, amp_b).map(|_| ()).map_err(|e| match e {
        MassError::AmplitudeNorm(_) => ManifestError::new("command.amp_a", e.to_string()),
        other => ManifestError::new("command.branch_b", other.to_string()),
    })
}

fn spec_paths(path: &str, s: &SuperpositionSpec) -> Result<(), ManifestError> {
    distribution(&format!("{path}.branch_a"), &s.branch_a)?;
    distribution(&format!("{path}.branch_b"), &s.branch_b)?;
    s.validate().map_err(|e| ManifestError::new(path, e.to_string()))
}

fn couplings(path: &str, cs: &[CouplingSpec]) -> Result<(), ManifestError> {
    for (i, c) in cs.iter().enumerate() {
        match (c.kind, c.kappa) {
            (CouplingKind::Custom, None) => {
                return Err(ManifestError::new(format!("{path}[{i}].kappa"), "custom couplings need kappa"))
            }
            (_, Some(k)) if !k.is_finite() => {
                return Err(ManifestError::new(format!("{path}[{i}].kappa"), "must be finite"))
            }
            _ => {}
        }
    }
    Ok(())
}

fn sn(path: &str, p: &SnParams) -> Result<(), ManifestError> {
    positive(&format!("{path}.mass"), p.mass)?;
    couplings(&format!("{path}.couplings"), &p.couplings)?;
    if let Some(g) = &p.grid {
        g.validate().map_err(|e| ManifestError::new(format!("{path}.grid"), e.to_string()))?;
    }
    if let Some(ppl) = p.points_per_length {
        positive(&format!("{path}.points_per_length"), ppl)?;
    }
    Ok(())
}
