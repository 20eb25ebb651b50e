//! Command-line front end: flags, manifests, dispatch and persistence.
//!
//! Every flag maps onto a manifest field; when both are given the flag wins.
//! A run writes `manifest.toml` (canonical form), `result.json`,
//! `summary.txt`, command-specific CSV tables and gnuplot scripts, and a
//! `bundle.json` listing every file with its SHA-256.

pub mod bundle;
pub mod commands;
pub mod manifest;

use std::io::Write;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::dpcriterion::SweepFamily;
use crate::error::Error;
use crate::massdist::{MassDistribution, SuperpositionSpec, Vec3};
use crate::quantities::ScaleLabel;
use crate::snsolver::{CouplingKind, ExternalPotential, Grid, Method};

pub use bundle::{render_summary, ResultBundle};
pub use commands::run;
pub use manifest::{Command, RunManifest};

pub const OUTPUT_DIR_ENV: &str = "GRAVCOLLAPSE_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "gravcollapse-out";

#[derive(Debug, Parser)]
#[command(name = "gravcollapse", version, about = "Gravitational self-energy, collapse times and Schrödinger–Newton states")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run manifest (TOML). Flags override its values.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory [default: $GRAVCOLLAPSE_OUTPUT_DIR or ./gravcollapse-out]
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Unit system for inputs and reported values.
    #[arg(long, global = true, value_parser = parse_scale)]
    pub scale: Option<ScaleLabel>,
    /// Mass unit of the sn-natural scale, kg (default 1).
    #[arg(long, global = true)]
    pub mass_reference: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Relative tolerance for quadratures and self-consistency.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Constant override such as `g=6.67e-11` (hbar, g, c, e2_coulomb, m_e).
    #[arg(long = "constant", value_name = "NAME=VALUE", global = true)]
    pub constants: Vec<String>,
}

fn parse_scale(s: &str) -> Result<ScaleLabel, String> {
    s.parse().map_err(|e: crate::quantities::QuantityError| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Self-energy U of one mass distribution.
    Selfenergy(SelfEnergyArgs),
    /// Superposition energy E_Δ of two branches.
    EDelta(EDeltaArgs),
    /// Collapse time T = k ħ/E_Δ.
    CollapseTime(CollapseTimeArgs),
    /// Feynman mass scale √(ħc/G).
    FeynmanScale,
    /// Collapse times over a family of superpositions.
    LifetimeSweep(SweepArgs),
    /// Schrödinger–Newton ground state.
    SnGround(SnArgs),
    /// Lowest Schrödinger–Newton states.
    SnSpectrum(SpectrumArgs),
    /// Time evolution of a Schrödinger–Newton wave packet.
    SnEvolve(EvolveArgs),
    /// Hydrogen ground state with and without self-interaction terms.
    HydrogenShift(HydrogenArgs),
    /// Stochastic collapse trajectories and the energy ledger.
    CollapseSim(SimArgs),
    /// Runs whatever command the manifest names.
    Run,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    UniformSphere,
    SphericalShell,
    Gaussian,
    PointMass,
}

#[derive(Debug, Args, Default)]
pub struct ShapeArgs {
    #[arg(long, value_enum)]
    pub shape: Option<ShapeArg>,
    /// Body mass (scale units).
    #[arg(long)]
    pub mass: Option<f64>,
    /// Radius, Gaussian width or smearing length (scale units).
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct PairArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Displacement of branch b along x (scale units).
    #[arg(long)]
    pub separation: Option<f64>,
    /// Born weight of branch a; amplitudes become √w and √(1−w).
    #[arg(long)]
    pub weight_a: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SelfEnergyArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[arg(long)]
    pub monte_carlo_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EDeltaArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long)]
    pub monte_carlo_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CollapseTimeArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long)]
    pub prefactor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Separation family: comma-separated displacements (scale units).
    #[arg(long, value_delimiter = ',', conflicts_with = "mass_factors")]
    pub separations: Option<Vec<f64>>,
    /// Mass-scale family: comma-separated factors.
    #[arg(long, value_delimiter = ',')]
    pub mass_factors: Option<Vec<f64>>,
    /// Separation of the base pair of a mass-scale family.
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub prefactor: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct SnArgs {
    /// Particle mass (scale units).
    #[arg(long)]
    pub mass: Option<f64>,
    /// Self-interaction `KIND[=KAPPA]`, KIND one of gravitational,
    /// electrostatic, custom. Repeatable.
    #[arg(long = "coupling", value_name = "KIND[=KAPPA]")]
    pub couplings: Vec<String>,
    /// External harmonic trap frequency.
    #[arg(long, conflicts_with = "coulomb_kappa")]
    pub harmonic_omega: Option<f64>,
    /// External Coulomb strength κ in κ/r.
    #[arg(long)]
    pub coulomb_kappa: Option<f64>,
    /// Grid extent (requires --spacing).
    #[arg(long, requires = "spacing")]
    pub r_max: Option<f64>,
    #[arg(long, requires = "r_max")]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub points_per_length: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Scf,
    Shooting,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub sn: SnArgs,
    #[arg(long)]
    pub n_states: Option<usize>,
    /// Also solve by shooting and compare (pure attractive coupling only).
    #[arg(long)]
    pub cross_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialArg {
    Gaussian,
    GroundState,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub sn: SnArgs,
    /// Use a 1-D Cartesian grid on [−r_max, r_max] (no self-interaction).
    #[arg(long)]
    pub cartesian: bool,
    #[arg(long, value_enum, conflicts_with = "initial_csv")]
    pub initial: Option<InitialArg>,
    /// Gaussian spread per axis (scale units).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Initial state from `r, Re ψ, Im ψ` rows.
    #[arg(long)]
    pub initial_csv: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub inner_iteration: bool,
    /// Also evolve without self-interaction and compare widths.
    #[arg(long)]
    pub compare_free: bool,
}

#[derive(Debug, Args)]
pub struct HydrogenArgs {
    #[arg(long)]
    pub no_electrostatic: bool,
    #[arg(long)]
    pub no_gravitational: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long)]
    pub prefactor: Option<f64>,
    #[arg(long, short = 'n')]
    pub trajectories: Option<usize>,
    /// Collapse rate override (inverse scale time units).
    #[arg(long)]
    pub rate: Option<f64>,
    /// Branch energies `E_a,E_b` (scale units).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub branch_energies: Option<Vec<f64>>,
    #[arg(long)]
    pub interference_energy: Option<f64>,
    /// Run the three energy-ledger scenarios at this energy scale.
    #[arg(long)]
    pub ledger_scenarios: Option<f64>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn shape_parts(d: &MassDistribution) -> Option<(ShapeArg, f64, f64)> {
    match *d {
        MassDistribution::UniformSphere { mass, radius, .. } => Some((ShapeArg::UniformSphere, mass, radius)),
        MassDistribution::SphericalShell { mass, radius, .. } => Some((ShapeArg::SphericalShell, mass, radius)),
        MassDistribution::Gaussian { mass, width, .. } => Some((ShapeArg::Gaussian, mass, width)),
        MassDistribution::PointMass { mass, smearing_length, .. } => Some((ShapeArg::PointMass, mass, smearing_length)),
        MassDistribution::RadialProfile { .. } => None,
    }
}

fn make_shape(shape: ShapeArg, mass: f64, size: f64, center: Vec3) -> MassDistribution {
    match shape {
        ShapeArg::UniformSphere => MassDistribution::UniformSphere { mass, radius: size, center },
        ShapeArg::SphericalShell => MassDistribution::SphericalShell { mass, radius: size, center },
        ShapeArg::Gaussian => MassDistribution::Gaussian { mass, width: size, center },
        ShapeArg::PointMass => MassDistribution::PointMass { mass, center, smearing_length: size },
    }
}

impl ShapeArgs {
    fn any(&self) -> bool {
        self.shape.is_some() || self.mass.is_some() || self.radius.is_some()
    }

    /// Applies the flags to `base`; a unit sphere at the origin without one.
    fn apply(&self, base: Option<&MassDistribution>) -> Result<MassDistribution, Error> {
        let (shape, mass, size, center) = match base {
            None => (ShapeArg::UniformSphere, 1.0, 1.0, [0.0; 3]),
            Some(d) if !self.any() => return Ok(d.clone()),
            Some(d) => {
                let (s, m, r) = shape_parts(d)
                    .ok_or_else(|| usage("--shape/--mass/--radius cannot modify a radial-profile distribution"))?;
                (s, m, r, d.center())
            }
        };
        Ok(make_shape(
            self.shape.unwrap_or(shape),
            self.mass.unwrap_or(mass),
            self.radius.unwrap_or(size),
            center,
        ))
    }
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

type Pair = (MassDistribution, MassDistribution, Option<Complex64>, Option<Complex64>);

impl PairArgs {
    fn apply(&self, base: Option<Pair>) -> Result<Pair, Error> {
        let (a, b, amp_a, amp_b) = match base {
            Some((a, b, pa, pb)) => {
                let a2 = self.shape.apply(Some(&a))?;
                let b2 = match self.separation {
                    Some(d) => a2.recentered(add(a2.center(), [d, 0.0, 0.0])),
                    None if self.shape.any() => a2.recentered(add(a2.center(), sub(b.center(), a.center()))),
                    None => b,
                };
                (a2, b2, pa, pb)
            }
            None => {
                let d = self
                    .separation
                    .ok_or_else(|| usage("give --manifest or --separation to define the two branches"))?;
                let a = self.shape.apply(None)?;
                let b = a.recentered(add(a.center(), [d, 0.0, 0.0]));
                (a, b, None, None)
            }
        };
        let (amp_a, amp_b) = match self.weight_a {
            Some(w) if (0.0..=1.0).contains(&w) => {
                (Some(Complex64::new(w.sqrt(), 0.0)), Some(Complex64::new((1.0 - w).sqrt(), 0.0)))
            }
            Some(w) => return Err(usage(format!("--weight-a must lie in [0, 1], got {w}"))),
            None => (amp_a, amp_b),
        };
        Ok((a, b, amp_a, amp_b))
    }
}

fn parse_coupling(s: &str) -> Result<manifest::CouplingSpec, Error> {
    let (kind, kappa) = match s.split_once('=') {
        Some((k, v)) => {
            (k, Some(v.trim().parse::<f64>().map_err(|e| usage(format!("--coupling {s}: {e}")))?))
        }
        None => (s, None),
    };
    let kind = match kind.trim() {
        "gravitational" => CouplingKind::Gravitational,
        "electrostatic" => CouplingKind::Electrostatic,
        "custom" => CouplingKind::Custom,
        other => return Err(usage(format!("unknown coupling kind `{other}`"))),
    };
    Ok(manifest::CouplingSpec { kind, kappa })
}

impl SnArgs {
    fn grid(&self, cartesian: bool) -> Result<Option<Grid>, Error> {
        match (self.r_max, self.spacing) {
            (Some(r), Some(h)) if cartesian => {
                let points = (2.0 * r / h).round() as usize + 1;
                Ok(Some(Grid::cartesian(-r, h, points)?))
            }
            (Some(r), Some(h)) => Ok(Some(Grid::radial_to(r, h)?)),
            _ => Ok(None),
        }
    }

    fn apply(&self, p: &mut manifest::SnParams, cartesian: bool) -> Result<(), Error> {
        if let Some(m) = self.mass {
            p.mass = m;
        }
        if !self.couplings.is_empty() {
            p.couplings = self.couplings.iter().map(|s| parse_coupling(s)).collect::<Result<_, _>>()?;
        }
        if let Some(omega) = self.harmonic_omega {
            p.external = ExternalPotential::Harmonic { omega };
        }
        if let Some(kappa) = self.coulomb_kappa {
            p.external = ExternalPotential::Coulomb { kappa };
        }
        if let Some(g) = self.grid(cartesian)? {
            p.grid = Some(g);
        }
        if let Some(ppl) = self.points_per_length {
            p.points_per_length = Some(ppl);
        }
        if let Some(m) = self.method {
            p.method = match m {
                MethodArg::Scf => Method::Scf,
                MethodArg::Shooting => Method::Shooting,
            };
        }
        Ok(())
    }
}

fn mismatch(expected: &str, found: &str) -> Error {
    usage(format!("manifest is for `{found}`, not `{expected}`; use `gravcollapse run --manifest ...`"))
}

/// Builds the manifest for `sub`, starting from `base` when one was loaded.
fn command_from_args(sub: &Sub, base: Option<Command>) -> Result<Command, Error> {
    use manifest::*;
    let found = base.as_ref().map(Command::name).unwrap_or("");
    Ok(match sub {
        Sub::Run => base.ok_or_else(|| usage("`run` needs --manifest"))?,
        Sub::FeynmanScale => match base {
            None | Some(Command::FeynmanScale) => Command::FeynmanScale,
            Some(_) => return Err(mismatch("feynman-scale", found)),
        },
        Sub::Selfenergy(a) => {
            let mut p = match base {
                Some(Command::SelfEnergy(p)) => p,
                None => SelfEnergyParams { distribution: a.shape.apply(None)?, monte_carlo_samples: None },
                Some(_) => return Err(mismatch("selfenergy", found)),
            };
            p.distribution = a.shape.apply(Some(&p.distribution))?;
            if a.monte_carlo_samples.is_some() {
                p.monte_carlo_samples = a.monte_carlo_samples;
            }
            Command::SelfEnergy(p)
        }
        Sub::EDelta(a) => {
            let base = match base {
                Some(Command::EDelta(p)) => Some(p),
                None => None,
                Some(_) => return Err(mismatch("e-delta", found)),
            };
            let mc = base.as_ref().and_then(|p| p.monte_carlo_samples);
            let (branch_a, branch_b, amp_a, amp_b) =
                a.pair.apply(base.map(|p| (p.branch_a, p.branch_b, p.amp_a, p.amp_b)))?;
            Command::EDelta(EDeltaParams {
                branch_a,
                branch_b,
                amp_a,
                amp_b,
                monte_carlo_samples: a.monte_carlo_samples.or(mc),
            })
        }
        Sub::CollapseTime(a) => {
            let base = match base {
                Some(Command::CollapseTime(p)) => Some(p),
                None => None,
                Some(_) => return Err(mismatch("collapse-time", found)),
            };
            let prefactor = a.prefactor.or(base.as_ref().map(|p| p.prefactor)).unwrap_or(1.0);
            let (branch_a, branch_b, amp_a, amp_b) =
                a.pair.apply(base.map(|p| (p.branch_a, p.branch_b, p.amp_a, p.amp_b)))?;
            Command::CollapseTime(CollapseTimeParams { branch_a, branch_b, amp_a, amp_b, prefactor })
        }
        Sub::LifetimeSweep(a) => {
            let base = match base {
                Some(Command::LifetimeSweep(p)) => Some(p),
                None => None,
                Some(_) => return Err(mismatch("lifetime-sweep", found)),
            };
            let prefactor = a.prefactor.or(base.as_ref().map(|p| p.prefactor)).unwrap_or(1.0);
            let family = sweep_family(a, base.map(|p| p.family))?;
            Command::LifetimeSweep(LifetimeSweepParams { family, prefactor })
        }
        Sub::SnGround(a) => {
            let mut p = match base {
                Some(Command::SnGround(p)) => p,
                None => SnParams::default(),
                Some(_) => return Err(mismatch("sn-ground", found)),
            };
            a.apply(&mut p, false)?;
            Command::SnGround(p)
        }
        Sub::SnSpectrum(a) => {
            let mut p = match base {
                Some(Command::SnSpectrum(p)) => p,
                None => SnSpectrumParams { problem: SnParams::default(), n_states: 3, cross_check: false },
                Some(_) => return Err(mismatch("sn-spectrum", found)),
            };
            a.sn.apply(&mut p.problem, false)?;
            if let Some(n) = a.n_states {
                p.n_states = n;
            }
            p.cross_check |= a.cross_check;
            Command::SnSpectrum(p)
        }
        Sub::SnEvolve(a) => {
            let base = match base {
                Some(Command::SnEvolve(p)) => Some(p),
                None => None,
                Some(_) => return Err(mismatch("sn-evolve", found)),
            };
            let mut sn = SnParams::default();
            if let Some(b) = &base {
                sn.mass = b.mass;
                sn.couplings = b.couplings.clone();
                sn.external = b.external.clone();
                sn.grid = b.grid;
            }
            a.sn.apply(&mut sn, a.cartesian)?;
            let mut initial = base.as_ref().map(|b| b.initial.clone()).unwrap_or(InitialState::Gaussian { sigma: 1.0 });
            if let Some(path) = &a.initial_csv {
                initial = InitialState::Csv { path: path.clone(), radial: !a.cartesian };
            }
            match a.initial {
                Some(InitialArg::GroundState) => initial = InitialState::GroundState,
                Some(InitialArg::Gaussian) if !matches!(initial, InitialState::Gaussian { .. }) => {
                    initial = InitialState::Gaussian { sigma: 1.0 }
                }
                _ => {}
            }
            if let Some(s) = a.sigma {
                match &mut initial {
                    InitialState::Gaussian { sigma } => *sigma = s,
                    _ => return Err(usage("--sigma applies to a Gaussian initial state")),
                }
            }
            let dt = a.dt.or(base.as_ref().map(|b| b.dt)).ok_or_else(|| usage("sn-evolve needs --dt"))?;
            let steps = a.steps.or(base.as_ref().map(|b| b.steps)).ok_or_else(|| usage("sn-evolve needs --steps"))?;
            Command::SnEvolve(SnEvolveParams {
                mass: sn.mass,
                couplings: sn.couplings,
                external: sn.external,
                grid: sn.grid,
                initial,
                dt,
                steps,
                inner_iteration: a.inner_iteration || base.as_ref().is_some_and(|b| b.inner_iteration),
                compare_free: a.compare_free || base.as_ref().is_some_and(|b| b.compare_free),
            })
        }
        Sub::HydrogenShift(a) => {
            let mut p = match base {
                Some(Command::HydrogenShift(p)) => p,
                None => HydrogenParams { electrostatic: true, gravitational: true },
                Some(_) => return Err(mismatch("hydrogen-shift", found)),
            };
            p.electrostatic &= !a.no_electrostatic;
            p.gravitational &= !a.no_gravitational;
            Command::HydrogenShift(p)
        }
        Sub::CollapseSim(a) => {
            let base = match base {
                Some(Command::CollapseSim(p)) => Some(p),
                None => None,
                Some(_) => return Err(mismatch("collapse-sim", found)),
            };
            let old = base.clone();
            let (branch_a, branch_b, amp_a, amp_b) =
                a.pair.apply(base.map(|p| (p.branch_a, p.branch_b, p.amp_a, p.amp_b)))?;
            let energies = match &a.branch_energies {
                Some(v) => [v[0], v[1]],
                None => old.as_ref().map_or([0.0, 0.0], |p| p.branch_energies),
            };
            Command::CollapseSim(CollapseSimParams {
                branch_a,
                branch_b,
                amp_a,
                amp_b,
                prefactor: a.prefactor.or(old.as_ref().map(|p| p.prefactor)).unwrap_or(1.0),
                trajectories: a.trajectories.or(old.as_ref().map(|p| p.trajectories)).unwrap_or(100_000),
                rate: a.rate.or(old.as_ref().and_then(|p| p.rate)),
                branch_energies: energies,
                interference_energy: a
                    .interference_energy
                    .or(old.as_ref().map(|p| p.interference_energy))
                    .unwrap_or(0.0),
                ledger_scenarios: a.ledger_scenarios.or(old.as_ref().and_then(|p| p.ledger_scenarios)),
            })
        }
    })
}

fn sweep_family(a: &SweepArgs, base: Option<SweepFamily>) -> Result<SweepFamily, Error> {
    if let Some(seps) = &a.separations {
        let shape = match &base {
            Some(SweepFamily::Separation { shape, .. }) => a.shape.apply(Some(shape))?,
            _ => a.shape.apply(None)?,
        };
        return Ok(SweepFamily::Separation { shape, separations: seps.clone() });
    }
    if let Some(factors) = &a.mass_factors {
        let spec = match &base {
            Some(SweepFamily::MassScale { spec, .. }) if a.separation.is_none() && !a.shape.any() => spec.clone(),
            _ => {
                let pair = PairArgs {
                    shape: ShapeArgs { shape: a.shape.shape, mass: a.shape.mass, radius: a.shape.radius },
                    separation: a.separation,
                    weight_a: None,
                };
                let (x, y, _, _) = pair.apply(None)?;
                SuperpositionSpec::equal_weights(x, y).map_err(|e| usage(e.to_string()))?
            }
        };
        return Ok(SweepFamily::MassScale { spec, factors: factors.clone() });
    }
    match base {
        Some(SweepFamily::Separation { shape, separations }) => {
            Ok(SweepFamily::Separation { shape: a.shape.apply(Some(&shape))?, separations })
        }
        Some(f) if !a.shape.any() => Ok(f),
        Some(_) => Err(usage("--shape/--mass/--radius only modify separation families")),
        None => Err(usage("give --manifest, --separations or --mass-factors")),
    }
}

fn parse_constants(items: &[String]) -> Result<Vec<(String, f64)>, Error> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("--constant expects NAME=VALUE, got `{s}`")))?;
            let v = v.trim().parse::<f64>().map_err(|e| usage(format!("--constant {s}: {e}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// The manifest a command line describes: the `--manifest` file (if any)
/// with every given flag applied on top.
pub fn resolve_manifest(cli: &Cli) -> Result<RunManifest, Error> {
    let loaded = match &cli.common.manifest {
        Some(path) => Some(RunManifest::from_path(path)?),
        None => None,
    };
    let command = command_from_args(&cli.command, loaded.as_ref().map(|m| m.command.clone()))?;
    let mut m = match loaded {
        Some(mut m) => {
            m.command = command;
            m
        }
        None => RunManifest::new(command),
    };
    let c = &cli.common;
    if let Some(s) = c.scale {
        m.scale_system = s;
    }
    if c.mass_reference.is_some() {
        m.mass_reference = c.mass_reference;
    }
    if let Some(s) = c.seed {
        m.seed = s;
    }
    if let Some(t) = c.tolerance {
        m.tolerances.quadrature = Some(t);
        m.tolerances.scf = Some(t);
    }
    for (k, v) in parse_constants(&c.constants)? {
        m.constant_overrides.insert(k, v);
    }
    if c.output_dir.is_some() {
        m.output_dir = c.output_dir.clone();
    }
    m.validate()?;
    Ok(m)
}

/// Flag, then manifest, then environment, then `./gravcollapse-out`.
pub fn output_dir(m: &RunManifest) -> PathBuf {
    m.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Parses `args`, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let manifest = match resolve_manifest(&cli) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let dir = output_dir(&manifest);
    match run(&manifest, &dir) {
        Ok(bundle) => {
            // stdout may already be closed by a pipe reader
            let mut out = std::io::stdout().lock();
            let _ = write!(out, "{}results: {}\n", bundle.summary, dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if dir.join(bundle::BUNDLE_FILE).exists() {
                eprintln!("partial results: {}", dir.display());
            }
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
