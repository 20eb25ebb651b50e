use std::f64::consts::PI;

use num_complex::Complex64;

use super::*;
use crate::quantities::PhysicalConstants;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn sn_grid(r_max: f64, h: f64) -> Grid {
    Grid::radial_to(r_max, h).unwrap()
}

fn hydrogenic_1s(grid: Grid, coupling: Coupling) -> WaveState {
    let psi = grid.coordinates().iter().map(|r| Complex64::new((-r).exp(), 0.0)).collect();
    WaveState::new(grid, psi, 1.0, 1.0, vec![coupling], &ExternalPotential::None).unwrap().normalized().unwrap()
}

#[test]
fn thin_shell_potential_is_flat_inside() {
    let grid = Grid::radial(0.1, 100).unwrap();
    let a_index = 39;
    let a = grid.coordinates()[a_index];
    let mut psi = vec![Complex64::new(0.0, 0.0); 100];
    psi[a_index] = Complex64::new(1.0, 0.0);
    let kappa = -2.5;
    let state = WaveState::new(grid, psi, 1.0, 1.0, vec![Coupling::custom(kappa)], &ExternalPotential::None)
        .unwrap()
        .normalized()
        .unwrap();
    let phi = state.self_potential().unwrap();
    for (r, p) in grid.coordinates().iter().zip(&phi) {
        let expect = kappa / r.max(a);
        assert!(rel(*p, expect) < 1e-12, "r={r} {p} vs {expect}");
    }
}

#[test]
fn zero_coupling_gives_zero_potential() {
    let state = hydrogenic_1s(Grid::radial(0.01, 3000).unwrap(), Coupling::custom(0.0));
    assert!(state.self_potential().unwrap().iter().all(|&p| p == 0.0));
}

#[test]
fn hartree_integral_of_1s_orbital() {
    let state = hydrogenic_1s(Grid::radial(0.005, 8000).unwrap(), Coupling::electrostatic(1.0));
    let phi = state.self_potential().unwrap();
    assert!(phi[0].is_finite());
    // Φ(0) = ⟨1/r⟩ = 1 for the 1s density.
    assert!(rel(phi[0], 1.0) < 1e-3, "{}", phi[0]);
    let r = state.grid.coordinates();
    let j: f64 = state
        .psi
        .iter()
        .zip(&r)
        .zip(&phi)
        .map(|((z, r), p)| 4.0 * PI * r * r * state.grid.spacing() * z.norm_sqr() * p)
        .sum();
    assert!(rel(j, 5.0 / 8.0) < 1e-4, "{j}");
    // Far field tends to κ/r.
    let last = r.len() - 1;
    assert!(rel(phi[last], 1.0 / r[last]) < 1e-9);
    // |Φ'| stays below 1/2 for this density.
    for w in phi.windows(2) {
        assert!((w[1] - w[0]).abs() < 0.5 * state.grid.spacing());
    }
}

#[test]
fn unnormalised_state_is_rejected() {
    let grid = Grid::radial(0.1, 50).unwrap();
    let psi = vec![Complex64::new(1.0, 0.0); 50];
    let state = WaveState::new(grid, psi, 1.0, 1.0, vec![Coupling::custom(-1.0)], &ExternalPotential::None).unwrap();
    assert!(matches!(state.self_potential(), Err(SnError::Normalization { .. })));
}

#[test]
fn harmonic_oscillator_s_states() {
    let omega = 1.3;
    let mut problem = SnProblem::new(1.0, 1.0, vec![], ExternalPotential::Harmonic { omega });
    problem.points_per_length = 128.0;
    let states = stationary_states(&problem, 3).unwrap();
    for (n, s) in states.iter().enumerate() {
        let exact = (2.0 * n as f64 + 1.5) * omega;
        assert!(rel(s.eigenvalue, exact) < 1e-4, "n={n} {} vs {exact}", s.eigenvalue);
        assert_eq!(s.node_count, n);
    }
}

#[test]
fn sn_ground_state_methods_agree() {
    let checks = cross_check(&SnProblem::sn_natural(), 3).unwrap();
    for c in &checks {
        assert!(c.relative_difference < 1e-3, "{c:?}");
    }
    let e0 = checks[0].scf;
    assert!((e0 - (-0.163)).abs() < 5e-4, "{e0}");
    assert!((checks[0].shooting - (-0.16277)).abs() < 1e-5);
    assert!(checks.windows(2).all(|w| w[1].scf > w[0].scf));
}

#[test]
fn stationary_state_invariants() {
    let problem = SnProblem::sn_natural();
    let states = stationary_states(&problem, 2).unwrap();
    for (n, s) in states.iter().enumerate() {
        assert_eq!(s.node_count, n);
        assert_eq!(s.state.node_count(), n);
        assert!(s.residual <= problem.tolerance);
        assert!((s.eigenvalue - s.rayleigh_quotient).abs() <= 10.0 * problem.tolerance * s.eigenvalue.abs(), "{s:?}");
        assert!((s.state.norm() - 1.0).abs() < 1e-10);
        assert!(s.state.edge_ratio() < 1e-8);
    }
}

#[test]
fn shooting_state_on_grid() {
    let problem = SnProblem::sn_natural().with_method(Method::Shooting).with_grid(sn_grid(60.0, 1.0 / 64.0));
    let s = ground_state(&problem).unwrap();
    assert_eq!(s.method, Method::Shooting);
    assert_eq!(s.node_count, 0);
    assert!(rel(s.rayleigh_quotient, s.eigenvalue) < 1e-4, "{} {}", s.rayleigh_quotient, s.eigenvalue);
    let harmonic = SnProblem::new(1.0, 1.0, vec![], ExternalPotential::Harmonic { omega: 1.0 }).with_method(Method::Shooting);
    assert!(matches!(stationary_states(&harmonic, 1), Err(SnError::Unsupported(_))));
}

#[test]
fn grid_refinement_is_second_order() {
    let eps: Vec<f64> = [32.0, 64.0, 128.0]
        .iter()
        .map(|ppl| ground_state(&SnProblem::sn_natural().with_grid(sn_grid(60.0, 1.0 / ppl))).unwrap().eigenvalue)
        .collect();
    let ratio = (eps[1] - eps[0]) / (eps[2] - eps[1]);
    assert!((3.5..4.5).contains(&ratio), "{eps:?} ratio {ratio}");
}

#[test]
fn si_spectrum_scales_as_mass_to_the_fifth() {
    let k = PhysicalConstants::default();
    let m: f64 = 1e-17;
    let length = k.hbar().powi(2) / (k.g() * m.powi(3));
    // One SI grid for both masses: 32 points per length at 2m, 256 at m.
    let grid = sn_grid(45.0 * length, length / 256.0);
    let e1 = stationary_states(&SnProblem::gravitational(&k, m).with_grid(grid), 1).unwrap();
    let e2 = stationary_states(&SnProblem::gravitational(&k, 2.0 * m).with_grid(grid), 1).unwrap();
    assert!(rel(e2[0].eigenvalue / e1[0].eigenvalue, 32.0) < 1e-3);
    assert!(rel(e2[0].natural_eigenvalue(), e1[0].natural_eigenvalue()) < 1e-3);
    assert!(rel(e1[0].natural_eigenvalue(), -0.16277) < 1e-3);
}

#[test]
fn validators() {
    let coarse = SnProblem::sn_natural().with_grid(sn_grid(60.0, 1.0 / 16.0));
    assert!(matches!(ground_state(&coarse), Err(SnError::Grid(_))));
    let short = SnProblem::sn_natural().with_grid(sn_grid(8.0, 1.0 / 32.0));
    assert!(matches!(ground_state(&short), Err(SnError::Grid(_))));
    let mut stubborn = SnProblem::sn_natural();
    stubborn.max_iterations = 3;
    match ground_state(&stubborn) {
        Err(SnError::Convergence { iterations, residual_history }) => {
            assert_eq!(iterations, 3);
            assert_eq!(residual_history.len(), 3);
        }
        other => panic!("{other:?}"),
    }
    let free = SnProblem::new(1.0, 1.0, vec![], ExternalPotential::None);
    assert!(matches!(ground_state(&free), Err(SnError::Grid(_))));
    assert!(stationary_states(&SnProblem::sn_natural(), 0).is_err());
}

#[test]
fn free_gaussian_spreads_by_closed_form() {
    let grid = Grid::radial_to(40.0, 0.02).unwrap();
    let state = WaveState::gaussian(grid, 1.0, 1.0, 1.0, vec![], &ExternalPotential::None).unwrap();
    let traj = evolve(&state, 0.004, 1000).unwrap();
    for o in traj.observables.iter().step_by(50) {
        let exact = free_gaussian_width(1.0, 1.0, 1.0, o.time, true);
        assert!(rel(o.width, exact) < 5e-3, "t={} {} vs {exact}", o.time, o.width);
    }
    let last = traj.observables.last().unwrap();
    assert!((last.time - 4.0).abs() < 1e-12);
    assert!(traj.max_norm_drift() < 1e-8);
}

#[test]
fn cartesian_free_gaussian() {
    let grid = Grid::cartesian(-30.0, 0.02, 3001).unwrap();
    let state = WaveState::gaussian(grid, 1.0, 1.0, 1.0, vec![], &ExternalPotential::None).unwrap();
    let traj = evolve(&state, 0.004, 500).unwrap();
    let last = traj.observables.last().unwrap();
    assert!(rel(last.width, free_gaussian_width(1.0, 1.0, 1.0, last.time, false)) < 5e-3);
    let err = WaveState::new(grid, state.psi.clone(), 1.0, 1.0, vec![Coupling::custom(-1.0)], &ExternalPotential::None);
    assert!(matches!(err, Err(SnError::Unsupported(_))));
}

#[test]
fn self_gravitating_packet_conserves_norm_and_energy() {
    let grid = Grid::radial_to(60.0, 1.0 / 32.0).unwrap();
    let state =
        WaveState::gaussian(grid, 2.0, 1.0, 1.0, vec![Coupling::gravitational(1.0, 1.0)], &ExternalPotential::None).unwrap();
    let traj = evolve(&state, 0.01, 1000).unwrap();
    assert!(traj.max_norm_drift() < 1e-8, "{}", traj.max_norm_drift());
    assert!(traj.max_relative_energy_drift() < 1e-5, "{}", traj.max_relative_energy_drift());
    let exact = evolve_with(&state, 0.01, 200, &EvolveOptions { inner_iteration: true, ..Default::default() }).unwrap();
    assert!(exact.max_relative_energy_drift() < 1e-10, "{}", exact.max_relative_energy_drift());
}

#[test]
fn stationary_state_stays_put() {
    let ground = ground_state(&SnProblem::sn_natural().with_grid(sn_grid(50.0, 1.0 / 32.0))).unwrap();
    let traj = evolve(&ground.state, 0.05, 1000).unwrap();
    assert!(traj.max_norm_drift() < 1e-8);
    assert!(traj.max_relative_energy_drift() < 1e-6, "{}", traj.max_relative_energy_drift());
    assert!(traj.max_relative_width_drift() < 1e-6, "{}", traj.max_relative_width_drift());
}

#[test]
fn gravity_inhibits_dispersion() {
    let grid = Grid::radial_to(60.0, 1.0 / 32.0).unwrap();
    let state =
        WaveState::gaussian(grid, 2.0, 1.0, 1.0, vec![Coupling::gravitational(1.0, 1.0)], &ExternalPotential::None).unwrap();
    let cmp = dispersion_comparison(&state, 0.02, 300).unwrap();
    assert!(cmp.dispersion_inhibited());
}

#[test]
fn step_size_validator() {
    let grid = Grid::radial_to(20.0, 1.0 / 32.0).unwrap();
    let state = WaveState::gaussian(grid, 1.0, 1.0, 1.0, vec![], &ExternalPotential::Coulomb { kappa: -1.0 }).unwrap();
    assert!(matches!(evolve(&state, 0.1, 5), Err(SnError::StepSize { .. })));
    assert!(evolve(&state, 0.01, 5).is_ok());
    assert!(evolve(&state, -1.0, 5).is_err());
}

#[test]
fn hydrogen_report() {
    let k = PhysicalConstants::default();
    let r = hydrogen_diagnostic(&k, true, true).unwrap();
    assert!(rel(r.ground_energy_ev, -13.606) < 1e-3, "{}", r.ground_energy_ev);
    let es = r.electrostatic.unwrap();
    assert!(rel(es.first_order_ev, 5.0 / 8.0 * 27.211) < 1e-2);
    assert!(rel(es.ratio_to_coulomb, 5.0 / 8.0) < 1e-2);
    assert!(es.self_consistent_energy_ev > r.ground_energy_ev);
    let gr = r.gravitational.unwrap();
    assert!(gr.first_order_ev < 0.0);
    let magnitude = gr.first_order_ev.abs().log10();
    assert!((-43.0..-41.0).contains(&magnitude), "{}", gr.first_order_ev);
    assert!(es.first_order_ev / gr.first_order_ev.abs() >= 1e40);
    let plain = hydrogen_diagnostic(&k, false, false).unwrap();
    assert!(plain.electrostatic.is_none() && plain.gravitational.is_none());
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("psi.csv");
    let state = hydrogenic_1s(Grid::radial(0.05, 400).unwrap(), Coupling::custom(0.0));
    write_profile_csv(&path, &state).unwrap();
    let (grid, psi) = read_wave_csv(&path, true).unwrap();
    assert!(rel(grid.spacing(), 0.05) < 1e-9);
    assert_eq!(grid.points(), 400);
    for (a, b) in psi.iter().zip(&state.psi) {
        assert!((a - b).norm() <= 1e-11 * b.norm().max(1e-300));
    }
    assert!(matches!(read_wave_csv(&path, false), Ok((Grid::Cartesian { .. }, _))));
}
