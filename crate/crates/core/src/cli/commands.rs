//! Dispatch of a validated manifest to the owning module, and the files each
//! command writes.

use std::path::Path;

use serde_json::{json, Map, Value};

use super::bundle::{self, csv_bytes, item, sci, Plot, ResultBundle, Sink};
use super::manifest::{
    build_spec, CollapseSimParams, CollapseTimeParams, Command, CouplingSpec, EDeltaParams, HydrogenParams,
    InitialState, LifetimeSweepParams, RunManifest, SelfEnergyParams, SnEvolveParams, SnParams, SnSpectrumParams,
};
use crate::collapsesim::{energy_ledger, ledger_scenarios, simulate, Branch, CollapseModel};
use crate::dpcriterion::{collapse_time, feynman_mass_scale, lifetime_sweep, Lifetime, SweepFamily};
use crate::error::Error;
use crate::massdist::monte_carlo::{e_delta_monte_carlo, self_energy_monte_carlo};
use crate::massdist::{EnergyEngine, MassDistribution, SuperpositionSpec};
use crate::quantities::{Dimension, PhysicalConstants, ScaleLabel, ScaleSystem};
use crate::snsolver::{
    cross_check, dispersion_comparison, evolve_with, free_gaussian_width, hydrogen_diagnostic, read_wave_csv,
    stationary_states, write_profile_csv, write_trajectory_csv, Coupling, CouplingKind, EvolveOptions, Grid,
    SnProblem, StationaryState, WaveState,
};

/// Constants, unit system and engine resolved from a manifest.
#[derive(Debug, Clone)]
pub struct Context {
    pub constants: PhysicalConstants,
    pub scale: ScaleSystem,
    pub engine: EnergyEngine,
    pub seed: u64,
    pub scf_tolerance: Option<f64>,
}

impl Context {
    pub fn from_manifest(m: &RunManifest) -> Result<Self, Error> {
        let constants = PhysicalConstants::default().with_overrides(&m.constant_overrides)?;
        let scale = ScaleSystem::from_label(m.scale_system, &constants, Some(m.mass_reference.unwrap_or(1.0)))?;
        let mut engine = EnergyEngine::new(constants);
        if let Some(t) = m.tolerances.quadrature {
            engine = engine.with_tolerance(t);
        }
        Ok(Context { constants, scale, engine, seed: m.seed, scf_tolerance: m.tolerances.scf })
    }

    fn unit(&self, d: Dimension) -> f64 {
        self.scale.unit_of(d)
    }

    /// A distribution given in scale units, re-expressed in SI.
    fn distribution_si(&self, d: &MassDistribution) -> Result<MassDistribution, Error> {
        if self.scale.label == ScaleLabel::Si {
            return Ok(d.clone());
        }
        Ok(d.scaled_mass(self.unit(Dimension::Mass))?.dilated(self.unit(Dimension::Length))?)
    }

    fn spec_si(&self, s: &SuperpositionSpec) -> Result<SuperpositionSpec, Error> {
        Ok(SuperpositionSpec::new(
            self.distribution_si(&s.branch_a)?,
            self.distribution_si(&s.branch_b)?,
            s.amp_a,
            s.amp_b,
        )?)
    }

    fn family_si(&self, f: &SweepFamily) -> Result<SweepFamily, Error> {
        Ok(match f {
            SweepFamily::Separation { shape, separations } => SweepFamily::Separation {
                shape: self.distribution_si(shape)?,
                separations: separations.iter().map(|d| d * self.unit(Dimension::Length)).collect(),
            },
            SweepFamily::MassScale { spec, factors } => {
                SweepFamily::MassScale { spec: self.spec_si(spec)?, factors: factors.clone() }
            }
            SweepFamily::Explicit { members } => SweepFamily::Explicit {
                members: members.iter().map(|(p, s)| Ok((*p, self.spec_si(s)?))).collect::<Result<_, Error>>()?,
            },
        })
    }

    fn unit_name(&self, d: Dimension) -> &'static str {
        match (self.scale.label, d) {
            (ScaleLabel::Si, Dimension::Length) => "m",
            (ScaleLabel::Si, Dimension::Time) => "s",
            (ScaleLabel::Si, Dimension::Energy) => "J",
            (ScaleLabel::Si, Dimension::Mass) => "kg",
            (ScaleLabel::SnNatural, Dimension::Length) => "hbar^2/(G m^3)",
            (ScaleLabel::SnNatural, Dimension::Time) => "hbar^3/(G^2 m^5)",
            (ScaleLabel::SnNatural, Dimension::Energy) => "G^2 m^5/hbar^2",
            (ScaleLabel::SnNatural, Dimension::Mass) => "m",
            (ScaleLabel::Atomic, Dimension::Length) => "a0",
            (ScaleLabel::Atomic, Dimension::Time) => "hbar/Eh",
            (ScaleLabel::Atomic, Dimension::Energy) => "Eh",
            (ScaleLabel::Atomic, Dimension::Mass) => "m_e",
            (_, Dimension::Action) => "hbar",
            (_, Dimension::Dimensionless) => "",
        }
    }

    fn scale_json(&self) -> Value {
        json!({
            "label": self.scale.label,
            "length_m": self.unit(Dimension::Length),
            "time_s": self.unit(Dimension::Time),
            "energy_J": self.unit(Dimension::Energy),
            "mass_kg": self.unit(Dimension::Mass),
        })
    }

    /// Headline entry for an SI energy, in scale units (SI-only when the
    /// scale is SI).
    fn energy_items(&self, name: &str, joules: f64) -> Vec<Value> {
        let mut v = vec![item(&format!("{name}_J"), joules, "J")];
        if self.scale.label != ScaleLabel::Si {
            v.push(item(name, joules / self.unit(Dimension::Energy), self.unit_name(Dimension::Energy)));
        }
        v
    }

    fn time_items(&self, name: &str, t: Lifetime) -> Vec<Value> {
        match t {
            Lifetime::Infinite => vec![item(&format!("{name}_s"), "InfiniteLifetime", "")],
            Lifetime::Finite(s) => {
                let mut v = vec![item(&format!("{name}_s"), s, "s")];
                if self.scale.label != ScaleLabel::Si {
                    v.push(item(name, s / self.unit(Dimension::Time), self.unit_name(Dimension::Time)));
                }
                v
            }
        }
    }

    /// SN couplings with strengths in scale units.
    fn couplings(&self, specs: &[CouplingSpec], mass: f64) -> Vec<Coupling> {
        let (g, _, _) = self.scale.constants_in_units();
        let e2 = self.constants.e2_coulomb() / (self.unit(Dimension::Energy) * self.unit(Dimension::Length));
        specs
            .iter()
            .map(|c| match (c.kind, c.kappa) {
                (kind, Some(kappa)) => Coupling { kind, kappa },
                (CouplingKind::Gravitational, None) => Coupling::gravitational(g, mass),
                (CouplingKind::Electrostatic, None) => Coupling::electrostatic(e2),
                (CouplingKind::Custom, None) => Coupling::custom(0.0),
            })
            .collect()
    }

    fn sn_problem(&self, p: &SnParams) -> SnProblem {
        let (_, hbar, _) = self.scale.constants_in_units();
        let mut problem = SnProblem::new(p.mass, hbar, self.couplings(&p.couplings, p.mass), p.external.clone());
        problem.grid = p.grid;
        problem.method = p.method;
        if let Some(ppl) = p.points_per_length {
            problem.points_per_length = ppl;
        }
        if let Some(t) = self.scf_tolerance {
            problem.tolerance = t;
        }
        problem
    }
}

/// What a command reports besides the files it writes itself.
#[derive(Debug, Default)]
struct Report {
    headline: Vec<Value>,
    details: Map<String, Value>,
    notes: Vec<String>,
}

impl Report {
    fn head(&mut self, items: impl IntoIterator<Item = Value>) {
        self.headline.extend(items);
    }

    fn detail(&mut self, key: &str, value: impl serde::Serialize) {
        self.details.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json serialises");
    s.push('\n');
    s.into_bytes()
}

/// Runs the manifest, writing all outputs and `bundle.json` into `out`.
///
/// Computational failures still produce a bundle (status `error`); the
/// error is returned so the caller can pick the exit status.
pub fn run(manifest: &RunManifest, out: &Path) -> Result<ResultBundle, Error> {
    manifest.validate()?;
    let ctx = Context::from_manifest(manifest)?;
    let digest = manifest.digest();
    let mut sink = Sink::create(out)?;
    sink.write(bundle::MANIFEST_FILE, manifest.canonical_toml())?;
    let name = manifest.command.name();
    match dispatch(&manifest.command, &ctx, &mut sink) {
        Ok(report) => {
            let result = json!({
                "command": name,
                "scale": ctx.scale.label,
                "units": ctx.scale_json(),
                "manifest_sha256": digest,
                "headline": report.headline,
                "details": report.details,
                "notes": report.notes,
            });
            sink.write(bundle::RESULT_FILE, json_bytes(&result))?;
            let summary = bundle::render_summary(&result);
            sink.write(bundle::SUMMARY_FILE, &summary)?;
            bundle::write_bundle(&sink, name, &digest, &summary, None)
        }
        Err(e) => {
            let summary = format!("gravcollapse {name}: failed\n  {e}\n");
            sink.write(bundle::SUMMARY_FILE, &summary)?;
            bundle::write_bundle(&sink, name, &digest, &summary, Some(&e))?;
            Err(e)
        }
    }
}

fn dispatch(command: &Command, ctx: &Context, sink: &mut Sink) -> Result<Report, Error> {
    match command {
        Command::SelfEnergy(p) => self_energy(p, ctx),
        Command::EDelta(p) => e_delta(p, ctx),
        Command::CollapseTime(p) => collapse(p, ctx),
        Command::FeynmanScale => feynman(ctx),
        Command::LifetimeSweep(p) => sweep(p, ctx, sink),
        Command::SnGround(p) => spectrum(
            &SnSpectrumParams { problem: p.clone(), n_states: 1, cross_check: false },
            ctx,
            sink,
        ),
        Command::SnSpectrum(p) => spectrum(p, ctx, sink),
        Command::SnEvolve(p) => sn_evolve(p, ctx, sink),
        Command::HydrogenShift(p) => hydrogen(p, ctx),
        Command::CollapseSim(p) => collapse_sim(p, ctx, sink),
    }
}

fn self_energy(p: &SelfEnergyParams, ctx: &Context) -> Result<Report, Error> {
    let d = ctx.distribution_si(&p.distribution)?;
    let u = ctx.engine.self_energy(&d)?;
    let mut r = Report::default();
    r.head(ctx.energy_items("self_energy", u));
    if let Some(n) = p.monte_carlo_samples {
        let est = self_energy_monte_carlo(&d, &ctx.constants, n, ctx.seed)?;
        r.head([
            item("monte_carlo_J", est.mean, "J"),
            item("monte_carlo_std_error_J", est.std_error, "J"),
            item("monte_carlo_z", (est.mean - u) / est.std_error, ""),
        ]);
        r.detail("monte_carlo_samples", est.samples);
    }
    r.detail("distribution_si", &d);
    Ok(r)
}

fn e_delta(p: &EDeltaParams, ctx: &Context) -> Result<Report, Error> {
    let spec = ctx.spec_si(&build_spec(&p.branch_a, &p.branch_b, p.amp_a, p.amp_b)?)?;
    let e = ctx.engine.e_delta(&spec)?;
    let mut r = Report::default();
    r.head(ctx.energy_items("e_delta", e));
    r.head([item("separation_m", spec.separation(), "m")]);
    if let Some(n) = p.monte_carlo_samples {
        let est = e_delta_monte_carlo(&spec, &ctx.constants, n, ctx.seed)?;
        let z = (est.mean - e) / est.std_error;
        r.head([
            item("monte_carlo_J", est.mean, "J"),
            item("monte_carlo_std_error_J", est.std_error, "J"),
            item("monte_carlo_within_3_sigma", z.abs() <= 3.0, ""),
        ]);
        r.detail("monte_carlo_samples", est.samples);
    }
    r.detail("spec_si", &spec);
    r.detail("inputs_digest", spec.digest());
    Ok(r)
}

fn collapse(p: &CollapseTimeParams, ctx: &Context) -> Result<Report, Error> {
    let spec = ctx.spec_si(&build_spec(&p.branch_a, &p.branch_b, p.amp_a, p.amp_b)?)?;
    let est = collapse_time(&spec, p.prefactor, &ctx.engine)?;
    let mut r = Report::default();
    r.head(ctx.energy_items("e_delta", est.e_delta));
    r.head(ctx.time_items("collapse_time", est.collapse_time));
    r.head([item("rate_per_s", est.rate(), "1/s"), item("prefactor", est.prefactor, "")]);
    if est.collapse_time.is_infinite() {
        r.notes.push("branches are identical: E_delta = 0, the superposition never collapses".into());
    }
    r.detail("estimate", &est);
    Ok(r)
}

fn feynman(ctx: &Context) -> Result<Report, Error> {
    let m = feynman_mass_scale(&ctx.constants);
    let mut r = Report::default();
    r.head([item("feynman_mass", m * 1e3, "g"), item("feynman_mass_kg", m, "kg")]);
    if ctx.scale.label != ScaleLabel::Si {
        r.head([item("feynman_mass_scale_units", m / ctx.unit(Dimension::Mass), ctx.unit_name(Dimension::Mass))]);
    }
    let c = &ctx.constants;
    r.detail("g_m2_over_hbar_c", c.g() * m * m / (c.hbar() * c.c()));
    Ok(r)
}

fn sweep(p: &LifetimeSweepParams, ctx: &Context, sink: &mut Sink) -> Result<Report, Error> {
    let family = ctx.family_si(&p.family)?;
    let length = ctx.unit(Dimension::Length);
    let back = |x: f64| match family {
        SweepFamily::Separation { .. } => x / length,
        _ => x,
    };
    let rows = lifetime_sweep(&family, p.prefactor, &ctx.engine);
    let csv = csv_bytes(
        &["parameter", "E_delta_J", "T_s", "error"],
        rows.iter().map(|row| match &row.result {
            Ok(e) => {
                let t = match e.collapse_time {
                    Lifetime::Finite(t) => sci(t),
                    Lifetime::Infinite => "inf".into(),
                };
                vec![sci(back(row.parameter)), sci(e.e_delta), t, String::new()]
            }
            Err(msg) => vec![sci(back(row.parameter)), String::new(), String::new(), msg.clone()],
        }),
    )?;
    sink.write("sweep.csv", csv)?;
    let xlabel = match p.family {
        SweepFamily::Separation { .. } => format!("separation [{}]", ctx.unit_name(Dimension::Length)),
        SweepFamily::MassScale { .. } => "mass factor".into(),
        SweepFamily::Explicit { .. } => "parameter".into(),
    };
    let plot = Plot {
        data: "sweep.csv",
        title: "collapse time",
        xlabel: &xlabel,
        ylabel: "T [s]",
        logx: false,
        logy: true,
        series: vec![(1, 3, "T")],
    };
    sink.write("sweep.gp", plot.script())?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    let mut r = Report::default();
    r.head([
        item("rows", rows.len() as u64, ""),
        item("failed_rows", failed as u64, ""),
        item("parameter", family.parameter_name(), ""),
    ]);
    if let Some(Ok(first)) = rows.first().map(|r| &r.result) {
        r.head(ctx.time_items("first_collapse_time", first.collapse_time));
    }
    if let Some(Ok(last)) = rows.last().map(|r| &r.result) {
        r.head(ctx.time_items("last_collapse_time", last.collapse_time));
    }
    Ok(r)
}

fn state_summary(s: &StationaryState, ctx: &Context) -> Value {
    json!({
        "node_count": s.node_count,
        "eigenvalue": s.eigenvalue,
        "eigenvalue_J": s.eigenvalue * ctx.unit(Dimension::Energy),
        "natural_eigenvalue": s.natural_eigenvalue(),
        "energy_functional": s.state.energy(),
        "residual": s.residual,
        "rayleigh_quotient": s.rayleigh_quotient,
        "iterations": s.iterations,
        "method": s.method,
        "grid": { "kind": "radial", "spacing": s.state.grid.spacing(), "points": s.state.grid.points(),
                  "extent": s.state.grid.extent() },
    })
}

fn spectrum(p: &SnSpectrumParams, ctx: &Context, sink: &mut Sink) -> Result<Report, Error> {
    let problem = ctx.sn_problem(&p.problem);
    let states = stationary_states(&problem, p.n_states)?;
    let energy = ctx.unit(Dimension::Energy);
    let csv = csv_bytes(
        &["node_count", "eigenvalue", "eigenvalue_J", "natural_eigenvalue", "residual", "iterations"],
        states.iter().map(|s| {
            vec![
                s.node_count.to_string(),
                sci(s.eigenvalue),
                sci(s.eigenvalue * energy),
                sci(s.natural_eigenvalue()),
                sci(s.residual),
                s.iterations.to_string(),
            ]
        }),
    )?;
    sink.write("spectrum.csv", csv)?;
    let mut names = Vec::new();
    for s in &states {
        let name = format!("state_{}.csv", s.node_count);
        write_profile_csv(&sink.path(&name), &s.state)?;
        names.push(name);
    }
    let length = format!("r [{}]", ctx.unit_name(Dimension::Length));
    let mut script = String::new();
    for (i, name) in names.iter().enumerate() {
        let plot = Plot {
            data: name,
            title: "stationary state density",
            xlabel: &length,
            ylabel: "|psi|^2",
            logx: false,
            logy: false,
            series: vec![(1, 4, name)],
        };
        let text = plot.script();
        if i == 0 {
            script.push_str(&text);
        } else {
            script.push_str(&text.replace("plot ", "replot "));
        }
    }
    sink.write("profiles.gp", script)?;

    let mut r = Report::default();
    let unit = ctx.unit_name(Dimension::Energy);
    for s in &states {
        r.head([
            item(&format!("eigenvalue_n{}", s.node_count), s.eigenvalue, unit),
            item(&format!("natural_eigenvalue_n{}", s.node_count), s.natural_eigenvalue(), "m kappa^2/hbar^2"),
        ]);
    }
    r.head([item("max_residual", states.iter().map(|s| s.residual).fold(0.0, f64::max), "")]);
    r.detail("states", states.iter().map(|s| state_summary(s, ctx)).collect::<Vec<_>>());
    r.detail("couplings", &problem.couplings);
    if p.cross_check {
        let checks = cross_check(&problem, p.n_states)?;
        let csv = csv_bytes(
            &["node_count", "scf", "shooting", "relative_difference"],
            checks.iter().map(|c| {
                vec![c.node_count.to_string(), sci(c.scf), sci(c.shooting), sci(c.relative_difference)]
            }),
        )?;
        sink.write("cross_check.csv", csv)?;
        let worst = checks.iter().map(|c| c.relative_difference).fold(0.0, f64::max);
        r.head([item("scf_shooting_max_relative_difference", worst, "")]);
        r.detail("cross_check", &checks);
    }
    Ok(r)
}

fn default_evolution_grid(sigma: f64, problem: &SnProblem) -> Result<Grid, Error> {
    let length = problem.characteristic_length().map_or(sigma, |l| l.min(sigma));
    Ok(Grid::radial_to(20.0 * sigma, length / 32.0)?)
}

fn sn_evolve(p: &SnEvolveParams, ctx: &Context, sink: &mut Sink) -> Result<Report, Error> {
    let params = SnParams {
        mass: p.mass,
        couplings: p.couplings.clone(),
        external: p.external.clone(),
        grid: p.grid,
        ..SnParams::default()
    };
    let problem = ctx.sn_problem(&params);
    let mut r = Report::default();
    let initial = match &p.initial {
        InitialState::Gaussian { sigma } => {
            let grid = match p.grid {
                Some(g) => g,
                None => default_evolution_grid(*sigma, &problem)?,
            };
            WaveState::gaussian(grid, *sigma, problem.mass, problem.hbar, problem.couplings.clone(), &problem.external)?
        }
        InitialState::GroundState => stationary_states(&problem, 1)?.remove(0).state,
        InitialState::Csv { path, radial } => {
            let (grid, psi) = read_wave_csv(path, *radial)?;
            if p.grid.is_some() {
                r.notes.push("grid taken from the initial-state CSV; the manifest grid is ignored".into());
            }
            WaveState::new(grid, psi, problem.mass, problem.hbar, problem.couplings.clone(), &problem.external)?
                .normalized()?
        }
    };
    write_profile_csv(&sink.path("initial_state.csv"), &initial)?;
    let options = EvolveOptions { inner_iteration: p.inner_iteration, ..EvolveOptions::default() };
    let traj = evolve_with(&initial, p.dt, p.steps, &options)?;
    write_trajectory_csv(&sink.path("trajectory.csv"), &traj.observables)?;
    write_profile_csv(&sink.path("final_state.csv"), &traj.final_state)?;
    let time = format!("t [{}]", ctx.unit_name(Dimension::Time));
    let plot = Plot {
        data: "trajectory.csv",
        title: "wave-packet width",
        xlabel: &time,
        ylabel: "width",
        logx: false,
        logy: false,
        series: vec![(2, 5, "width")],
    };
    sink.write("trajectory.gp", plot.script())?;
    let last = traj.observables.last().copied();
    r.head([
        item("steps", p.steps as u64, ""),
        item("max_norm_drift", traj.max_norm_drift(), ""),
        item("max_relative_energy_drift", traj.max_relative_energy_drift(), ""),
        item("max_relative_width_drift", traj.max_relative_width_drift(), ""),
        item("final_width", last.map_or(f64::NAN, |o| o.width), ctx.unit_name(Dimension::Length)),
    ]);
    if p.compare_free {
        let cmp = dispersion_comparison(&initial, p.dt, p.steps)?;
        let radial = initial.grid.is_radial();
        let closed: Vec<Option<f64>> = cmp
            .times
            .iter()
            .map(|&t| match p.initial {
                InitialState::Gaussian { sigma } => {
                    Some(free_gaussian_width(sigma, problem.mass, problem.hbar, t, radial))
                }
                _ => None,
            })
            .collect();
        let csv = csv_bytes(
            &["time", "width_interacting", "width_free", "width_free_closed_form"],
            cmp.times.iter().enumerate().map(|(i, t)| {
                vec![
                    sci(*t),
                    sci(cmp.width_interacting[i]),
                    sci(cmp.width_free[i]),
                    closed[i].map(sci).unwrap_or_default(),
                ]
            }),
        )?;
        sink.write("dispersion.csv", csv)?;
        let plot = Plot {
            data: "dispersion.csv",
            title: "dispersion with and without self-gravity",
            xlabel: &time,
            ylabel: "width",
            logx: false,
            logy: false,
            series: vec![(1, 2, "interacting"), (1, 3, "free")],
        };
        sink.write("dispersion.gp", plot.script())?;
        r.head([item("dispersion_inhibited", cmp.dispersion_inhibited(), "")]);
    }
    r.detail("options", options);
    r.detail("dt", p.dt);
    r.detail(
        "grid",
        json!({ "radial": initial.grid.is_radial(), "spacing": initial.grid.spacing(), "points": initial.grid.points() }),
    );
    r.detail("final", last);
    Ok(r)
}

fn hydrogen(p: &HydrogenParams, ctx: &Context) -> Result<Report, Error> {
    let h = hydrogen_diagnostic(&ctx.constants, p.electrostatic, p.gravitational)?;
    let mut r = Report::default();
    r.head([
        item("ground_energy", h.ground_energy_ev, "eV"),
        item("coulomb_expectation", h.coulomb_expectation_ev, "eV"),
    ]);
    if let Some(es) = &h.electrostatic {
        r.head([
            item("electrostatic_self_first_order", es.first_order_ev, "eV"),
            item("electrostatic_over_coulomb", es.ratio_to_coulomb, ""),
            item("electrostatic_self_consistent_energy", es.self_consistent_energy_ev, "eV"),
        ]);
    }
    if let Some(gr) = &h.gravitational {
        r.head([
            item("gravitational_self_first_order", gr.first_order_ev, "eV"),
            item("gravitational_over_coulomb", gr.ratio_to_coulomb, ""),
        ]);
    }
    if let (Some(es), Some(gr)) = (&h.electrostatic, &h.gravitational) {
        let orders = (es.first_order_ev.abs() / gr.first_order_ev.abs()).log10();
        r.head([item("electrostatic_to_gravitational_orders", orders, "")]);
    }
    r.detail("report", &h);
    Ok(r)
}

fn collapse_sim(p: &CollapseSimParams, ctx: &Context, sink: &mut Sink) -> Result<Report, Error> {
    let spec = ctx.spec_si(&build_spec(&p.branch_a, &p.branch_b, p.amp_a, p.amp_b)?)?;
    let energy = ctx.unit(Dimension::Energy);
    let mut model = CollapseModel::from_spec(spec, &ctx.engine, p.prefactor)?.with_energies(
        p.branch_energies[0] * energy,
        p.branch_energies[1] * energy,
        p.interference_energy * energy,
    );
    if let Some(rate) = p.rate {
        model = model.with_rate(rate / ctx.unit(Dimension::Time));
    }
    let ens = simulate(&model, p.trajectories, ctx.seed)?;
    let events = csv_bytes(
        &["trajectory", "collapse_time_s", "outcome"],
        ens.events.iter().enumerate().map(|(i, e)| {
            let t = match e.collapse_time {
                Lifetime::Finite(t) => sci(t),
                Lifetime::Infinite => "inf".into(),
            };
            let o = match e.outcome {
                Some(Branch::A) => "a",
                Some(Branch::B) => "b",
                None => "",
            };
            vec![i.to_string(), t, o.to_string()]
        }),
    )?;
    sink.write("events.csv", events)?;
    let s = &ens.summary;
    let survival = csv_bytes(
        &["time_s", "empirical", "expected"],
        s.survival_curve.iter().map(|pt| vec![sci(pt.time), sci(pt.empirical), sci(pt.expected)]),
    )?;
    sink.write("survival.csv", survival)?;
    let plot = Plot {
        data: "survival.csv",
        title: "survival probability",
        xlabel: "t [s]",
        ylabel: "surviving fraction",
        logx: false,
        logy: true,
        series: vec![(1, 2, "simulated"), (1, 3, "exp(-t E_delta/hbar)")],
    };
    sink.write("survival.gp", plot.script())?;

    let mut r = Report::default();
    r.head([
        item("trajectories", ens.n_trajectories as u64, ""),
        item("collapsed", s.collapsed as u64, ""),
        item("rate_per_s", model.rate, "1/s"),
    ]);
    if s.collapsed == 0 {
        r.head([item("collapse_time_s", "InfiniteLifetime", "")]);
        r.notes.push("rate is zero: every trajectory survives".into());
    }
    r.head([
        item("mean_collapse_time", s.mean_collapse_time, "s"),
        item("median_collapse_time", s.median_collapse_time, "s"),
        item("ks_statistic", s.ks_statistic, ""),
        item("ks_critical_1pct", s.ks_critical_1pct, ""),
        item("ks_passed", s.ks_passed(), ""),
    ]);
    if let Some((fa, _)) = s.outcome_frequencies {
        let (wa, wb) = model.outcome_weights;
        let sigma = (wa * wb / s.collapsed as f64).sqrt();
        r.head([
            item("frequency_a", fa, ""),
            item("born_weight_a", wa, ""),
            item("born_within_3_sigma", (fa - wa).abs() <= 3.0 * sigma + 1e-15, ""),
        ]);
    }
    let ledger = energy_ledger(&ens, &model)?;
    r.head([item("energy_residual", ledger.residual, "J")]);
    r.detail("summary", s);
    r.detail("ledger", &ledger);
    r.detail("model", &model);
    r.detail("model_digest", &ens.model_digest);
    r.detail("seed", ctx.seed);
    r.notes.push("outcomes follow Born weights; the collapse rule itself does not fix them".into());

    if let Some(scale) = p.ledger_scenarios {
        let scale_j = scale * energy;
        let mut rows = Vec::new();
        let mut all = true;
        for (name, m) in ledger_scenarios(&model, scale_j) {
            let e = simulate(&m, p.trajectories, ctx.seed)?;
            let l = energy_ledger(&e, &m)?;
            let ok = l.within_3_sigma(scale_j).unwrap_or(false);
            all &= ok;
            rows.push((name, l, ok));
        }
        let csv = csv_bytes(
            &["scenario", "pre_J", "post_J", "residual_J", "expected_residual_J", "std_error_J", "within_3_sigma"],
            rows.iter().map(|(name, l, ok)| {
                vec![
                    name.to_string(),
                    sci(l.pre_collapse_energy),
                    l.post_collapse_energy.map(sci).unwrap_or_default(),
                    l.residual.map(sci).unwrap_or_default(),
                    sci(l.expected_residual),
                    sci(l.std_error),
                    ok.to_string(),
                ]
            }),
        )?;
        sink.write("ledger.csv", csv)?;
        r.head([item("ledger_scenarios_within_3_sigma", all, "")]);
        let mut scen = Map::new();
        for (name, l, ok) in rows {
            scen.insert(name.into(), json!({ "ledger": l, "within_3_sigma": ok }));
        }
        r.detail("scenarios", scen);
    }
    Ok(r)
}
