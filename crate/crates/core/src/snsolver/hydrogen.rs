//! Hydrogen with the electron's own field added as a self-interaction.
//!
//! Everything runs in atomic units (ħ = m_e = e² = 1, external −1/r); the
//! gravitational term enters as `κ = −G m_e²/e²`.

use serde::{Deserialize, Serialize};

use super::{stationary_states, Coupling, ExternalPotential, Model, SnError, SnProblem, StationaryState};
use crate::quantities::{PhysicalConstants, JOULES_PER_EV};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTermReport {
    /// Coupling in atomic units (`e²` = 1).
    pub kappa: f64,
    /// `⟨ψ₀|Φ_self|ψ₀⟩` on the unperturbed orbital, eV.
    pub first_order_ev: f64,
    /// `|⟨Φ_self⟩| / |⟨V_Coulomb⟩|`.
    pub ratio_to_coulomb: f64,
    /// Self-consistent energy functional `T + V + ½⟨Φ⟩`, eV.
    pub self_consistent_energy_ev: f64,
    /// Self-consistent orbital eigenvalue, eV.
    pub self_consistent_eigenvalue_ev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydrogenReport {
    pub hartree_ev: f64,
    pub grid_spacing_bohr: f64,
    pub grid_points: usize,
    pub ground_energy_ev: f64,
    pub coulomb_expectation_ev: f64,
    pub electrostatic: Option<SelfTermReport>,
    pub gravitational: Option<SelfTermReport>,
}

fn problem(couplings: Vec<Coupling>) -> SnProblem {
    SnProblem::new(1.0, 1.0, couplings, ExternalPotential::Coulomb { kappa: -1.0 })
}

fn self_term(
    kappa: f64,
    unperturbed: &StationaryState,
    coulomb: f64,
    hartree_ev: f64,
) -> Result<SelfTermReport, SnError> {
    let mut probe = unperturbed.state.clone();
    probe.self_coupling = vec![Coupling::custom(kappa)];
    let phi = probe.self_potential()?;
    let model = Model::from_state(&probe);
    let u = model.reduce(&probe.psi);
    let first_order: f64 = model.h * u.iter().zip(&phi).map(|(z, p)| z.norm_sqr() * p).sum::<f64>();
    let sc = stationary_states(&problem(vec![Coupling::custom(kappa)]), 1)?.remove(0);
    Ok(SelfTermReport {
        kappa,
        first_order_ev: first_order * hartree_ev,
        ratio_to_coulomb: (first_order / coulomb).abs(),
        self_consistent_energy_ev: sc.state.energy() * hartree_ev,
        self_consistent_eigenvalue_ev: sc.eigenvalue * hartree_ev,
    })
}

pub fn hydrogen_diagnostic(
    constants: &PhysicalConstants,
    include_electrostatic_self: bool,
    include_gravitational_self: bool,
) -> Result<HydrogenReport, SnError> {
    let hartree_ev = constants.hartree() / JOULES_PER_EV;
    let ground = stationary_states(&problem(Vec::new()), 1)?.remove(0);
    let model = Model::from_state(&ground.state);
    let u = model.reduce(&ground.state.psi);
    let coulomb: f64 = model.h * u.iter().zip(&model.v).map(|(z, v)| z.norm_sqr() * v).sum::<f64>() * model.units.energy;
    let electrostatic = include_electrostatic_self.then(|| self_term(1.0, &ground, coulomb, hartree_ev)).transpose()?;
    let g_kappa = -constants.g() * constants.m_e() * constants.m_e() / constants.e2_coulomb();
    let gravitational = include_gravitational_self.then(|| self_term(g_kappa, &ground, coulomb, hartree_ev)).transpose()?;
    Ok(HydrogenReport {
        hartree_ev,
        grid_spacing_bohr: ground.state.grid.spacing(),
        grid_points: ground.state.grid.points(),
        ground_energy_ev: ground.eigenvalue * hartree_ev,
        coulomb_expectation_ev: coulomb * hartree_ev,
        electrostatic,
        gravitational,
    })
}
