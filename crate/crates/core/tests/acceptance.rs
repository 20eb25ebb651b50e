//! Acceptance criteria, one line each with runtime. Exits non-zero if any
//! criterion fails or overruns its time budget.

use std::path::Path;
use std::time::{Duration, Instant};

use gravcollapse::cli::commands::run;
use gravcollapse::cli::manifest::{
    CollapseSimParams, CollapseTimeParams, Command, EDeltaParams, HydrogenParams, InitialState, LifetimeSweepParams,
    RunManifest, SelfEnergyParams, SnEvolveParams, SnParams, SnSpectrumParams,
};
use gravcollapse::collapsesim::{energy_ledger, ledger_scenarios, simulate, CollapseModel};
use gravcollapse::dpcriterion::{feynman_mass_scale, SweepFamily};
use gravcollapse::massdist::monte_carlo::e_delta_monte_carlo;
use gravcollapse::massdist::{EnergyEngine, MassDistribution, RadialProfile, SuperpositionSpec};
use gravcollapse::quantities::{PhysicalConstants, ScaleLabel, ScaleSystem};
use gravcollapse::snsolver::{
    cross_check, evolve, free_gaussian_width, hydrogen_diagnostic, stationary_states, Grid, SnProblem, WaveState,
};
use num_complex::Complex64;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRng, TestRunner};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn k() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn sphere(m: f64, r: f64, x: f64) -> MassDistribution {
    MassDistribution::uniform_sphere(m, r, [x, 0.0, 0.0]).unwrap()
}

// 1 -------------------------------------------------------------------------

fn feynman_scale() -> Outcome {
    let expected = (1.054_571_817e-34 * 299_792_458.0 / 6.674_30e-11_f64).sqrt();
    let m = feynman_mass_scale(&k());
    let rel = (m - expected).abs() / expected;
    check(rel < 1e-3, format!("M = {m:e} kg, expected {expected:e}"))?;
    let dir = tempfile::tempdir().unwrap();
    let bundle = run(&RunManifest::new(Command::FeynmanScale), dir.path()).map_err(|e| e.to_string())?;
    check(bundle.summary.contains("2.176e-5 g"), format!("summary lacks 2.176e-5 g:\n{}", bundle.summary))?;
    Ok(format!("M = {:.4e} g, rel. err {rel:.1e}", m * 1e3))
}

// 2 -------------------------------------------------------------------------

fn e_delta_oracle() -> Outcome {
    let c = k();
    let (m, r, d) = (1.0, 1.0, 4.0);
    let analytic = c.g() * m * m * (6.0 / (5.0 * r) - 1.0 / d);
    let spec = SuperpositionSpec::equal_weights(sphere(m, r, 0.0), sphere(m, r, d)).unwrap();
    let engine = EnergyEngine::new(c);
    let (a, b) = (&spec.branch_a, &spec.branch_b);
    let err = |e: gravcollapse::massdist::MassError| e.to_string();
    let quad = engine.self_energy_quadrature(a).map_err(err)? + engine.self_energy_quadrature(b).map_err(err)?
        - engine.mutual_energy_quadrature(a, b).map_err(err)?;
    let rel = (quad - analytic).abs() / analytic;
    check(rel < 5e-3, format!("quadrature {quad:e} vs {analytic:e}"))?;
    let field = engine.e_delta_field_energy(&spec).map_err(err)?;
    let rel_field = (field - analytic).abs() / analytic;
    check(rel_field < 5e-3, format!("field-energy form {field:e} vs {analytic:e}"))?;
    let mc = e_delta_monte_carlo(&spec, &c, 400_000, 2024).map_err(|e| e.to_string())?;
    let z = (mc.mean - analytic) / mc.std_error;
    check(z.abs() <= 3.0, format!("Monte Carlo {:e} ± {:e}, z = {z:.2}", mc.mean, mc.std_error))?;
    Ok(format!("quad rel {rel:.1e}, field form rel {rel_field:.1e}, MC z = {z:+.2} ({} samples)", mc.samples))
}

// 3 -------------------------------------------------------------------------

fn shape() -> impl Strategy<Value = MassDistribution> {
    let center = proptest::array::uniform3(-2.0f64..2.0);
    proptest::prop_oneof![
        (0.2f64..2.0, center.clone()).prop_map(|(r, c)| MassDistribution::uniform_sphere(1.0, r, c).unwrap()),
        (0.2f64..2.0, center.clone()).prop_map(|(r, c)| MassDistribution::spherical_shell(1.0, r, c).unwrap()),
        (0.1f64..1.0, center.clone()).prop_map(|(w, c)| MassDistribution::gaussian(1.0, w, c).unwrap()),
        (0.1f64..1.0, center.clone()).prop_map(|(s, c)| MassDistribution::point_mass(1.0, c, s).unwrap()),
        (0.3f64..1.5, 0.5f64..3.0, center).prop_map(|(r, steep, c)| {
            let radii: Vec<f64> = (0..=12).map(|i| r * i as f64 / 12.0).collect();
            let density: Vec<f64> = radii.iter().map(|x| (1.0 - (x / r).powf(steep)).max(0.0)).collect();
            let p = RadialProfile::new(radii, density, None).unwrap();
            let scale = 1.0 / p.total_mass();
            MassDistribution::radial_profile(p, c).scaled_mass(scale).unwrap()
        }),
    ]
}

fn kernel_properties() -> Outcome {
    const PAIRS: usize = 128;
    let engine = EnergyEngine::new(k());
    let mut runner = TestRunner::new_with_rng(Config::default(), TestRng::deterministic_rng(Default::default()));
    let strategy = (shape(), shape(), 0.25f64..4.0, 0.25f64..4.0);
    let mut worst_mass = 0.0f64;
    let mut worst_length = 0.0f64;
    for i in 0..PAIRS {
        let (a, b, lambda, s) = strategy.new_tree(&mut runner).unwrap().current();
        let spec = SuperpositionSpec::equal_weights(a.clone(), b).unwrap();
        let e = engine.e_delta(&spec).map_err(|e| e.to_string())?;
        check(e > 0.0, format!("pair {i}: E_Δ = {e:e} for {spec:?}"))?;

        let same = SuperpositionSpec::equal_weights(a.clone(), a.clone()).unwrap();
        let e0 = engine.e_delta(&same).map_err(|e| e.to_string())?;
        let u = engine.self_energy(&a).map_err(|e| e.to_string())?;
        check(e0 >= 0.0 && e0 <= 1e-12 * u, format!("pair {i}: identical branches give {e0:e}"))?;

        let heavy = SuperpositionSpec::equal_weights(
            spec.branch_a.scaled_mass(lambda).unwrap(),
            spec.branch_b.scaled_mass(lambda).unwrap(),
        )
        .unwrap();
        let em = engine.e_delta(&heavy).map_err(|e| e.to_string())?;
        let dev = (em / (lambda * lambda * e) - 1.0).abs();
        worst_mass = worst_mass.max(dev);
        check(dev < 1e-9, format!("pair {i}: mass scaling off by {dev:e}"))?;

        let wide = SuperpositionSpec::equal_weights(
            spec.branch_a.dilated(s).unwrap(),
            spec.branch_b.dilated(s).unwrap(),
        )
        .unwrap();
        let el = engine.e_delta(&wide).map_err(|e| e.to_string())?;
        let dev = (el * s / e - 1.0).abs();
        worst_length = worst_length.max(dev);
        check(dev < engine.rel_tol, format!("pair {i}: length scaling off by {dev:e}"))?;
    }
    Ok(format!(
        "{PAIRS} pairs; worst mass-scaling dev {worst_mass:.1e}, length-scaling dev {worst_length:.1e}"
    ))
}

// 4 -------------------------------------------------------------------------

/// Ground eigenvalue in `G²m⁵/ħ²`, fixed after SCF and shooting agreed.
const FROZEN_GROUND: f64 = -0.16277;

fn sn_ground() -> Outcome {
    let problem = SnProblem::sn_natural();
    let cc = cross_check(&problem, 1).map_err(|e| e.to_string())?;
    let c = &cc[0];
    check(c.relative_difference < 1e-3, format!("SCF {} vs shooting {}", c.scf, c.shooting))?;
    let frozen = (c.scf - FROZEN_GROUND).abs() / FROZEN_GROUND.abs();
    check(frozen < 1e-3, format!("ground eigenvalue {} drifted from {FROZEN_GROUND}", c.scf))?;

    let eig = |ppl: f64| {
        let h = 1.0 / ppl;
        let p = SnProblem::sn_natural().with_grid(Grid::radial_to(60.0, h).unwrap());
        stationary_states(&p, 1).map(|s| s[0].eigenvalue)
    };
    let e: Vec<f64> = [32.0, 64.0, 128.0].iter().map(|&p| eig(p)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let ratio = (e[1] - e[0]) / (e[2] - e[1]);
    check((3.5..4.5).contains(&ratio), format!("refinement ratio {ratio:.3} (eigenvalues {e:?})"))?;
    Ok(format!(
        "SCF {:.6}, shooting {:.6}, rel diff {:.1e}, refinement ratio {ratio:.2}",
        c.scf, c.shooting, c.relative_difference
    ))
}

// 5 -------------------------------------------------------------------------

fn sn_scaling() -> Outcome {
    let c = k();
    let m = 1e-17;
    let l_m = c.hbar() * c.hbar() / (c.g() * m * m * m);
    // One SI grid for both masses: 32 points per length of the heavier one.
    let grid = Grid::radial_to(200.0 * l_m, l_m / 256.0).map_err(|e| e.to_string())?;
    let spectrum = |mass: f64, n: usize| -> Result<Vec<f64>, String> {
        let scale = ScaleSystem::sn_natural(&c, mass).map_err(|e| e.to_string())?;
        let problem = SnProblem::gravitational(&c, mass).with_grid(grid);
        let states = stationary_states(&problem, n).map_err(|e| e.to_string())?;
        Ok(states.iter().map(|s| s.eigenvalue / scale.energy_scale).collect())
    };
    let a = spectrum(m, 2)?;
    let b = spectrum(2.0 * m, 2)?;
    let worst = a.iter().zip(&b).map(|(x, y)| ((x - y) / x).abs()).fold(0.0, f64::max);
    check(worst < 1e-3, format!("natural spectra differ: {a:?} vs {b:?}"))?;
    Ok(format!("2 states on a shared SI grid, worst rel diff {worst:.1e}"))
}

// 6 -------------------------------------------------------------------------

fn evolution() -> Outcome {
    let natural = SnProblem::sn_natural();
    let (m, hbar) = (1.0, 1.0);

    let sigma = 1.0;
    let grid = Grid::radial_to(30.0, 1.0 / 32.0).unwrap();
    let free = WaveState::gaussian(grid, sigma, m, hbar, Vec::new(), &Default::default()).map_err(|e| e.to_string())?;
    let traj = evolve(&free, 0.01, 300).map_err(|e| e.to_string())?;
    let worst_free = traj
        .observables
        .iter()
        .map(|o| (o.width / free_gaussian_width(sigma, m, hbar, o.time, true) - 1.0).abs())
        .fold(0.0, f64::max);
    check(worst_free < 5e-3, format!("free spreading off by {worst_free:e}"))?;

    let grid = Grid::radial_to(60.0, 1.0 / 16.0).unwrap();
    let packet = WaveState::gaussian(grid, 2.0, m, hbar, natural.couplings.clone(), &Default::default())
        .map_err(|e| e.to_string())?;
    let traj = evolve(&packet, 0.01, 1000).map_err(|e| e.to_string())?;
    let norm = traj.max_norm_drift();
    let energy = traj.max_relative_energy_drift();
    check(norm < 1e-8, format!("norm drift {norm:e}"))?;
    check(energy < 1e-5, format!("energy drift {energy:e}"))?;

    let ground = stationary_states(&natural, 1).map_err(|e| e.to_string())?.remove(0);
    let traj = evolve(&ground.state, 0.05, 1000).map_err(|e| e.to_string())?;
    let width = traj.max_relative_width_drift();
    let e_stat = traj.max_relative_energy_drift();
    let n_stat = traj.max_norm_drift();
    check(width < 1e-6 && e_stat < 1e-6 && n_stat < 1e-6, format!("stationary drifts: width {width:e}, energy {e_stat:e}, norm {n_stat:e}"))?;
    Ok(format!(
        "free width dev {worst_free:.1e}; packet norm {norm:.1e}, energy {energy:.1e}; stationary width {width:.1e}"
    ))
}

// 7 -------------------------------------------------------------------------

fn hydrogen() -> Outcome {
    let h = hydrogen_diagnostic(&k(), true, true).map_err(|e| e.to_string())?;
    let e0 = (h.ground_energy_ev + 13.606).abs() / 13.606;
    check(e0 < 1e-3, format!("E0 = {} eV", h.ground_energy_ev))?;
    let es = h.electrostatic.as_ref().unwrap();
    let hartree_integral = 0.625 * 27.211;
    let rel = (es.first_order_ev - hartree_integral).abs() / hartree_integral;
    check(rel < 1e-2, format!("electrostatic first order {} eV vs {hartree_integral}", es.first_order_ev))?;
    check(es.ratio_to_coulomb > 0.1, format!("electrostatic/Coulomb = {}", es.ratio_to_coulomb))?;
    let gr = h.gravitational.as_ref().unwrap();
    let orders = (es.first_order_ev / gr.first_order_ev.abs()).log10();
    check(orders >= 40.0, format!("gravitational term only {orders:.1} orders smaller"))?;
    Ok(format!(
        "E0 = {:.4} eV, ES self = {:.4} eV ({:.3} of |<V_C>|), gravity {orders:.1} orders smaller",
        h.ground_energy_ev, es.first_order_ev, es.ratio_to_coulomb
    ))
}

// 8 -------------------------------------------------------------------------

fn collapse_statistics() -> Outcome {
    let n = 100_000;
    let amp_a = Complex64::new(0.3f64.sqrt(), 0.0);
    let amp_b = Complex64::new(0.0, 0.7f64.sqrt());
    let spec = SuperpositionSpec::new(sphere(1e-3, 1e-2, 0.0), sphere(1e-3, 1e-2, 3e-2), amp_a, amp_b).unwrap();
    let engine = EnergyEngine::new(k());
    let model = CollapseModel::from_spec(spec, &engine, 1.0).map_err(|e| e.to_string())?;
    let ens = simulate(&model, n, 7).map_err(|e| e.to_string())?;
    let s = &ens.summary;
    check(s.ks_passed() == Some(true), format!("KS {:?} vs {}", s.ks_statistic, s.ks_critical_1pct))?;
    let (fa, _) = s.outcome_frequencies.unwrap();
    let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
    check((fa - 0.3).abs() <= 3.0 * sigma, format!("frequency {fa} vs Born 0.3 (σ = {sigma:e})"))?;

    let scale = 1e-20;
    for (name, m) in ledger_scenarios(&model, scale) {
        let e = simulate(&m, n, 7).map_err(|e| e.to_string())?;
        let l = energy_ledger(&e, &m).map_err(|e| e.to_string())?;
        check(l.within_3_sigma(scale) == Some(true), format!("{name}: residual {:?} vs {}", l.residual, l.expected_residual))?;
    }
    let again = simulate(&model, n, 7).map_err(|e| e.to_string())?;
    check(again == ens, "re-simulation with the same seed differs")?;
    Ok(format!(
        "KS {:.2e} < {:.2e}, f_a = {fa:.4} (Born 0.3), ledgers within 3σ, bit-exact rerun",
        s.ks_statistic.unwrap(),
        s.ks_critical_1pct
    ))
}

// 9 -------------------------------------------------------------------------

fn manifests() -> Vec<RunManifest> {
    let pair = |d: f64| (sphere(1.0, 1.0, 0.0), sphere(1.0, 1.0, d));
    let (a, b) = pair(4.0);
    let natural = |c: Command| {
        let mut m = RunManifest::new(c);
        m.scale_system = ScaleLabel::SnNatural;
        m
    };
    let mut list = vec![
        RunManifest::new(Command::SelfEnergy(SelfEnergyParams { distribution: a.clone(), monte_carlo_samples: Some(20_000) })),
        RunManifest::new(Command::EDelta(EDeltaParams {
            branch_a: a.clone(),
            branch_b: b.clone(),
            amp_a: None,
            amp_b: None,
            monte_carlo_samples: Some(20_000),
        })),
        RunManifest::new(Command::CollapseTime(CollapseTimeParams {
            branch_a: a.clone(),
            branch_b: b.clone(),
            amp_a: None,
            amp_b: None,
            prefactor: 1.0,
        })),
        RunManifest::new(Command::FeynmanScale),
        RunManifest::new(Command::LifetimeSweep(LifetimeSweepParams {
            family: SweepFamily::Separation { shape: a.clone(), separations: vec![2.0, 4.0, 6.0, 8.0, 10.0] },
            prefactor: 1.0,
        })),
        natural(Command::SnGround(SnParams::default())),
        natural(Command::SnSpectrum(SnSpectrumParams { problem: SnParams::default(), n_states: 2, cross_check: true })),
        natural(Command::SnEvolve(SnEvolveParams {
            mass: 1.0,
            couplings: SnParams::default().couplings,
            external: Default::default(),
            grid: Some(Grid::radial_to(40.0, 1.0 / 16.0).unwrap()),
            initial: InitialState::Gaussian { sigma: 2.0 },
            dt: 0.02,
            steps: 200,
            inner_iteration: false,
            compare_free: true,
        })),
        RunManifest::new(Command::HydrogenShift(HydrogenParams { electrostatic: true, gravitational: true })),
        RunManifest::new(Command::CollapseSim(CollapseSimParams {
            branch_a: a,
            branch_b: b,
            amp_a: None,
            amp_b: None,
            prefactor: 1.0,
            trajectories: 20_000,
            rate: None,
            branch_energies: [0.0, 0.0],
            interference_energy: 0.0,
            ledger_scenarios: Some(1.0),
        })),
    ];
    for (i, m) in list.iter_mut().enumerate() {
        m.seed = 11 + i as u64;
    }
    list
}

fn reproducibility() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut files = 0;
    for (i, m) in manifests().into_iter().enumerate() {
        let name = m.command.name();
        let first = root.path().join(format!("{i}-first"));
        let second = root.path().join(format!("{i}-second"));
        let b1 = run(&m, &first).map_err(|e| format!("{name}: {e}"))?;
        let text = std::fs::read_to_string(first.join("manifest.toml")).unwrap();
        let persisted = RunManifest::from_toml(&text).map_err(|e| format!("{name}: {e}"))?;
        check(persisted == m, format!("{name}: persisted manifest does not parse back to the original"))?;
        let b2 = run(&persisted, &second).map_err(|e| format!("{name}: {e}"))?;
        check(b1.files == b2.files, format!("{name}: content hashes differ between runs"))?;
        check(b1.manifest_sha256 == b2.manifest_sha256, format!("{name}: manifest digest changed"))?;
        files += b1.files.len();
        check(same_summary(&first)?, format!("{name}: summary not regenerable from result.json"))?;
    }
    Ok(format!("10 commands, {files} files hash-identical on re-run"))
}

fn same_summary(dir: &Path) -> Result<bool, String> {
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("result.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let summary = std::fs::read_to_string(dir.join("summary.txt")).map_err(|e| e.to_string())?;
    Ok(gravcollapse::cli::render_summary(&result) == summary)
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("Feynman mass scale", Duration::from_secs(1), feynman_scale),
        ("E_delta analytic oracle", Duration::from_secs(30), e_delta_oracle),
        ("Kernel positive-definiteness and scaling", Duration::from_secs(120), kernel_properties),
        ("SN ground state, two methods, refinement", Duration::from_secs(120), sn_ground),
        ("SN m^5 scaling law", Duration::from_secs(120), sn_scaling),
        ("Evolution sanity", Duration::from_secs(300), evolution),
        ("Hydrogen self-interaction critique", Duration::from_secs(120), hydrogen),
        ("Collapse statistics", Duration::from_secs(60), collapse_statistics),
        ("Manifest reproducibility", Duration::from_secs(60), reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(_) if elapsed > *budget => ("FAIL", format!("over budget of {:.0} s", budget.as_secs_f64())),
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {}. {name} [{:.2} s] {detail}", i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
