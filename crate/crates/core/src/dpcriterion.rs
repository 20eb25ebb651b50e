//! Collapse-time estimates `T = k·ħ/E_Δ` and the Feynman mass scale.
//!
//! `k` is an explicit dimensionless prefactor (default 1) standing in for the
//! order-of-magnitude "≈" of the criterion. A different factor convention for
//! `E_Δ` (for instance dropping the ½) only rescales `T` by a constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::massdist::{EnergyEngine, MassDistribution, MassError, SuperpositionSpec};
use crate::quantities::PhysicalConstants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriterionError {
    #[error(transparent)]
    Mass(#[from] MassError),
    #[error("prefactor must be finite and positive, got {0}")]
    InvalidPrefactor(f64),
}

/// Lifetime of a superposition. Identical branches never collapse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "seconds", rename_all = "snake_case")]
pub enum Lifetime {
    Finite(f64),
    Infinite,
}

impl Lifetime {
    pub fn seconds(&self) -> f64 {
        match self {
            Lifetime::Finite(t) => *t,
            Lifetime::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Lifetime::Infinite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseEstimate {
    /// Joules.
    pub e_delta: f64,
    pub collapse_time: Lifetime,
    pub prefactor: f64,
    pub inputs_digest: String,
}

impl CollapseEstimate {
    /// Collapse rate `1/T` in s⁻¹ (zero for an infinite lifetime).
    pub fn rate(&self) -> f64 {
        match self.collapse_time {
            Lifetime::Finite(t) => 1.0 / t,
            Lifetime::Infinite => 0.0,
        }
    }
}

fn check_prefactor(prefactor: f64) -> Result<(), CriterionError> {
    if prefactor.is_finite() && prefactor > 0.0 {
        Ok(())
    } else {
        Err(CriterionError::InvalidPrefactor(prefactor))
    }
}

/// `T` for a given `E_Δ`.
pub fn lifetime_from_energy(e_delta: f64, prefactor: f64, constants: &PhysicalConstants) -> Lifetime {
    if e_delta > 0.0 {
        Lifetime::Finite(prefactor * constants.hbar() / e_delta)
    } else {
        Lifetime::Infinite
    }
}

pub fn collapse_time(
    spec: &SuperpositionSpec,
    prefactor: f64,
    engine: &EnergyEngine,
) -> Result<CollapseEstimate, CriterionError> {
    check_prefactor(prefactor)?;
    let e_delta = engine.e_delta(spec)?;
    Ok(CollapseEstimate {
        e_delta,
        collapse_time: lifetime_from_energy(e_delta, prefactor, &engine.constants),
        prefactor,
        inputs_digest: spec.digest(),
    })
}

/// `M = √(ħc/G)`, the mass at which `G M²/(ħ c) = 1`.
pub fn feynman_mass_scale(constants: &PhysicalConstants) -> f64 {
    (constants.hbar() * constants.c() / constants.g()).sqrt()
}

/// A one-parameter family of superpositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepFamily {
    /// Branch `b` is the shape moved to `shape.center + (d, 0, 0)` for each `d`.
    Separation { shape: MassDistribution, separations: Vec<f64> },
    /// Both branches of `spec` with every mass multiplied by each factor.
    MassScale { spec: SuperpositionSpec, factors: Vec<f64> },
    /// Explicit members, each tagged with its parameter value.
    Explicit { members: Vec<(f64, SuperpositionSpec)> },
}

impl SweepFamily {
    pub fn parameter_name(&self) -> &'static str {
        match self {
            SweepFamily::Separation { .. } => "separation_m",
            SweepFamily::MassScale { .. } => "mass_factor",
            SweepFamily::Explicit { .. } => "parameter",
        }
    }

    /// Materialises each member; construction errors are kept per row.
    pub fn members(&self) -> Vec<(f64, Result<SuperpositionSpec, MassError>)> {
        match self {
            SweepFamily::Separation { shape, separations } => separations
                .iter()
                .map(|&d| (d, SuperpositionSpec::equal_weights(shape.clone(), shape.translated([d, 0.0, 0.0]))))
                .collect(),
            SweepFamily::MassScale { spec, factors } => factors
                .iter()
                .map(|&f| {
                    let member = spec.branch_a.scaled_mass(f).and_then(|a| {
                        spec.branch_b
                            .scaled_mass(f)
                            .and_then(|b| SuperpositionSpec::new(a, b, spec.amp_a, spec.amp_b))
                    });
                    (f, member)
                })
                .collect(),
            SweepFamily::Explicit { members } => members.iter().map(|(p, s)| (*p, Ok(s.clone()))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub result: Result<CollapseEstimate, String>,
}

/// Evaluates every member concurrently; rows come back sorted by parameter.
/// A failing member records its error and the sweep continues.
pub fn lifetime_sweep(family: &SweepFamily, prefactor: f64, engine: &EnergyEngine) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = family
        .members()
        .into_par_iter()
        .map(|(parameter, member)| {
            let result = member
                .map_err(CriterionError::from)
                .and_then(|spec| collapse_time(&spec, prefactor, engine))
                .map_err(|e| e.to_string());
            SweepRow { parameter, result }
        })
        .collect();
    rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> EnergyEngine {
        EnergyEngine::new(PhysicalConstants::default())
    }

    fn unit_sphere() -> MassDistribution {
        MassDistribution::uniform_sphere(1.0, 1.0, [0.0; 3]).unwrap()
    }

    #[test]
    fn definitional_arithmetic() {
        let k = PhysicalConstants::default();
        let t = lifetime_from_energy(k.hbar(), 1.0, &k);
        assert_eq!(t, Lifetime::Finite(1.0));
        assert!(lifetime_from_energy(0.0, 1.0, &k).is_infinite());
    }

    #[test]
    fn identical_branches_never_collapse() {
        let spec = SuperpositionSpec::equal_weights(unit_sphere(), unit_sphere()).unwrap();
        let est = collapse_time(&spec, 1.0, &engine()).unwrap();
        assert_eq!(est.collapse_time, Lifetime::Infinite);
        assert_eq!(est.rate(), 0.0);
        assert_eq!(est.inputs_digest, spec.digest());
    }

    #[test]
    fn spheres_four_radii_apart() {
        let k = PhysicalConstants::default();
        let spec = SuperpositionSpec::equal_weights(unit_sphere(), unit_sphere().translated([4.0, 0.0, 0.0])).unwrap();
        let est = collapse_time(&spec, 1.0, &engine()).unwrap();
        let t = est.collapse_time.seconds();
        assert!(((t - k.hbar() / (0.95 * k.g())) / t).abs() < 1e-12);
        assert!((t - 1.66e-24).abs() < 0.01e-24, "{t}");
        // T·E_Δ = k·ħ
        for prefactor in [0.5, 1.0, 3.0] {
            let est = collapse_time(&spec, prefactor, &engine()).unwrap();
            let product = est.collapse_time.seconds() * est.e_delta;
            assert!(((product - prefactor * k.hbar()) / product).abs() < 1e-12);
        }
        let swapped = collapse_time(&spec.swapped(), 1.0, &engine()).unwrap();
        assert_eq!(swapped.collapse_time, est.collapse_time);
        assert!(collapse_time(&spec, 0.0, &engine()).is_err());
    }

    #[test]
    fn lifetime_scales_inversely_with_energy() {
        let k = PhysicalConstants::default();
        let e = 3.7e-20;
        for lambda in [0.1, 2.0, 1e6] {
            let a = lifetime_from_energy(e, 1.0, &k).seconds();
            let b = lifetime_from_energy(lambda * e, 1.0, &k).seconds();
            assert!(((b - a / lambda) / b).abs() < 1e-15);
        }
    }

    #[test]
    fn feynman_scale() {
        let k = PhysicalConstants::default();
        let m = feynman_mass_scale(&k);
        assert!((m * 1e3 - 2.176e-5).abs() / 2.176e-5 < 1e-3, "{m}");
        assert_eq!((m * 1e3).log10().floor(), -5.0);
        assert!((m * m * k.g() / (k.hbar() * k.c()) - 1.0).abs() < 1e-12);
        let mut o = std::collections::BTreeMap::new();
        o.insert("G".to_string(), 4.0 * k.g());
        let m4 = feynman_mass_scale(&k.with_overrides(&o).unwrap());
        assert!((m4 / m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn separation_sweep_decreases() {
        let family = SweepFamily::Separation {
            shape: unit_sphere(),
            separations: (2..=10).rev().map(|d| d as f64).collect(),
        };
        let rows = lifetime_sweep(&family, 1.0, &engine());
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].parameter, 2.0);
        let times: Vec<f64> = rows.iter().map(|r| r.result.as_ref().unwrap().collapse_time.seconds()).collect();
        assert!(times.windows(2).all(|w| w[1] < w[0]), "{times:?}");
    }

    #[test]
    fn single_member_and_mass_sweeps() {
        let spec = SuperpositionSpec::equal_weights(unit_sphere(), unit_sphere().translated([0.5, 0.0, 0.0])).unwrap();
        let rows = lifetime_sweep(&SweepFamily::Explicit { members: vec![(1.0, spec.clone())] }, 1.0, &engine());
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].result.as_ref().unwrap(), &collapse_time(&spec, 1.0, &engine()).unwrap());

        let rows = lifetime_sweep(&SweepFamily::MassScale { spec, factors: vec![4.0, 1.0, 2.0] }, 1.0, &engine());
        let t: Vec<f64> = rows.iter().map(|r| r.result.as_ref().unwrap().collapse_time.seconds()).collect();
        assert!((t[1] / t[0] - 0.25).abs() < 1e-9);
        assert!((t[2] / t[0] - 1.0 / 16.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_keeps_going_past_bad_rows() {
        let point = MassDistribution::point_mass(1.0, [0.0; 3], 0.0).unwrap();
        let family = SweepFamily::Separation { shape: point, separations: vec![1.0, 2.0] };
        let rows = lifetime_sweep(&family, 1.0, &engine());
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.result.as_ref().unwrap_err().contains("smearing_length")));
    }
}
