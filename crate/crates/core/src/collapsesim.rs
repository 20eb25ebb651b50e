//! Stochastic two-branch collapse: one Poisson event per trajectory, outcome
//! drawn with Born weights, plus an ensemble energy ledger.
//!
//! Trajectory `i` draws from Philox stream `i` under the run seed, so an
//! ensemble is a pure function of `(model, n, seed)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dpcriterion::{collapse_time, CriterionError, Lifetime};
use crate::massdist::{EnergyEngine, SuperpositionSpec};
use crate::rng::PhiloxStream;

/// Asymptotic Kolmogorov–Smirnov coefficient for the 1% level.
pub const KS_COEFFICIENT_1PCT: f64 = 1.628;
const SURVIVAL_SAMPLES: usize = 101;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid collapse model: {0}")]
    InvalidModel(String),
    #[error("ensemble was produced from model {found}, not {expected}")]
    Provenance { expected: String, found: String },
    #[error(transparent)]
    Criterion(#[from] CriterionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseModel {
    pub spec: SuperpositionSpec,
    /// Collapse rate, s⁻¹.
    pub rate: f64,
    pub outcome_weights: (f64, f64),
    /// Branch energy expectation values, J.
    pub branch_energies: (f64, f64),
    /// Cross-term contribution to the pre-collapse energy, J.
    #[serde(default)]
    pub interference_energy: f64,
}

impl CollapseModel {
    /// Rate `E_Δ/(kħ)` from the superposition, Born weights, zero energies.
    pub fn from_spec(spec: SuperpositionSpec, engine: &EnergyEngine, prefactor: f64) -> Result<Self, SimError> {
        let estimate = collapse_time(&spec, prefactor, engine)?;
        let outcome_weights = spec.weights();
        Ok(CollapseModel {
            spec,
            rate: estimate.rate(),
            outcome_weights,
            branch_energies: (0.0, 0.0),
            interference_energy: 0.0,
        })
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    pub fn with_energies(mut self, e_a: f64, e_b: f64, interference: f64) -> Self {
        self.branch_energies = (e_a, e_b);
        self.interference_energy = interference;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(SimError::InvalidModel(format!("rate must be finite and non-negative, got {}", self.rate)));
        }
        let (wa, wb) = self.outcome_weights;
        if !(wa >= 0.0 && wb >= 0.0) || (wa + wb - 1.0).abs() > 1e-12 {
            return Err(SimError::InvalidModel(format!("outcome weights ({wa}, {wb}) must be non-negative and sum to 1")));
        }
        let (ea, eb) = self.branch_energies;
        if !(ea.is_finite() && eb.is_finite() && self.interference_energy.is_finite()) {
            return Err(SimError::InvalidModel("energies must be finite".into()));
        }
        Ok(())
    }

    /// `w_a E_a + w_b E_b + interference`.
    pub fn pre_collapse_energy(&self) -> f64 {
        let (wa, wb) = self.outcome_weights;
        let (ea, eb) = self.branch_energies;
        neumaier(&[wa * ea, wb * eb, self.interference_energy])
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("model serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Three ledger configurations on one superposition: degenerate branches,
/// split branch energies, and split energies with an interference term.
pub fn ledger_scenarios(base: &CollapseModel, energy_scale: f64) -> Vec<(&'static str, CollapseModel)> {
    let e = energy_scale;
    vec![
        ("degenerate", base.clone().with_energies(e, e, 0.0)),
        ("split", base.clone().with_energies(-e, 2.0 * e, 0.0)),
        ("interference", base.clone().with_energies(-e, 2.0 * e, 0.25 * e)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub collapse_time: Lifetime,
    pub outcome: Option<Branch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub time: f64,
    pub empirical: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub collapsed: usize,
    pub mean_collapse_time: Option<f64>,
    pub mean_std_error: Option<f64>,
    pub median_collapse_time: Option<f64>,
    /// Asymptotic standard error of the median, `1/(rate·√n)`.
    pub median_std_error: Option<f64>,
    pub outcome_frequencies: Option<(f64, f64)>,
    pub ks_statistic: Option<f64>,
    pub ks_critical_1pct: f64,
    pub survival_curve: Vec<SurvivalPoint>,
    pub mean_post_collapse_energy: Option<f64>,
    pub energy_residual: Option<f64>,
}

impl EnsembleSummary {
    pub fn ks_passed(&self) -> Option<bool> {
        self.ks_statistic.map(|d| d < self.ks_critical_1pct)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub n_trajectories: usize,
    pub seed: u64,
    pub model_digest: String,
    pub events: Vec<CollapseEvent>,
    pub summary: EnsembleSummary,
}

fn neumaier(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn draw(model: &CollapseModel, seed: u64, index: u64) -> CollapseEvent {
    if model.rate == 0.0 {
        return CollapseEvent { collapse_time: Lifetime::Infinite, outcome: None };
    }
    let mut rng = PhiloxStream::new(seed, index);
    let t = -rng.next_f64_open0().ln() / model.rate;
    let outcome = if rng.next_f64() < model.outcome_weights.0 { Branch::A } else { Branch::B };
    CollapseEvent { collapse_time: Lifetime::Finite(t), outcome: Some(outcome) }
}

pub fn simulate(model: &CollapseModel, n: usize, seed: u64) -> Result<TrajectoryEnsemble, SimError> {
    model.validate()?;
    if n == 0 {
        return Err(SimError::InvalidModel("need at least one trajectory".into()));
    }
    let events: Vec<CollapseEvent> = (0..n as u64).into_par_iter().map(|i| draw(model, seed, i)).collect();
    let summary = summarise(model, &events);
    Ok(TrajectoryEnsemble { n_trajectories: n, seed, model_digest: model.digest(), events, summary })
}

fn summarise(model: &CollapseModel, events: &[CollapseEvent]) -> EnsembleSummary {
    let n = events.len();
    let mut times: Vec<f64> = events
        .iter()
        .filter_map(|e| match e.collapse_time {
            Lifetime::Finite(t) => Some(t),
            Lifetime::Infinite => None,
        })
        .collect();
    let collapsed = times.len();
    let ks_critical_1pct = KS_COEFFICIENT_1PCT / (n as f64).sqrt();
    if collapsed == 0 {
        let survival_curve = vec![SurvivalPoint { time: 0.0, empirical: 1.0, expected: 1.0 }];
        return EnsembleSummary {
            collapsed,
            mean_collapse_time: None,
            mean_std_error: None,
            median_collapse_time: None,
            median_std_error: None,
            outcome_frequencies: None,
            ks_statistic: None,
            ks_critical_1pct,
            survival_curve,
            mean_post_collapse_energy: None,
            energy_residual: None,
        };
    }
    let c = collapsed as f64;
    let mean = neumaier(&times) / c;
    let deviations: Vec<f64> = times.iter().map(|t| (t - mean) * (t - mean)).collect();
    let variance = if collapsed > 1 { neumaier(&deviations) / (c - 1.0) } else { 0.0 };
    times.sort_by(f64::total_cmp);
    let median = if collapsed % 2 == 1 {
        times[collapsed / 2]
    } else {
        0.5 * (times[collapsed / 2 - 1] + times[collapsed / 2])
    };
    let rate = model.rate;
    let cdf = |t: f64| -(-rate * t).exp_m1();
    let ks = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = cdf(t);
            ((i + 1) as f64 / c - f).max(f - i as f64 / c)
        })
        .fold(0.0, f64::max);
    let t_max = 5.0 / rate;
    let survival_curve = (0..SURVIVAL_SAMPLES)
        .map(|k| {
            let t = t_max * k as f64 / (SURVIVAL_SAMPLES - 1) as f64;
            let alive = collapsed - times.partition_point(|&x| x <= t);
            SurvivalPoint { time: t, empirical: alive as f64 / c, expected: (-rate * t).exp() }
        })
        .collect();
    let count_a = events.iter().filter(|e| e.outcome == Some(Branch::A)).count() as f64;
    let frequencies = (count_a / c, (c - count_a) / c);
    let (ea, eb) = model.branch_energies;
    let post = neumaier(&[frequencies.0 * ea, frequencies.1 * eb]);
    EnsembleSummary {
        collapsed,
        mean_collapse_time: Some(mean),
        mean_std_error: Some((variance / c).sqrt()),
        median_collapse_time: Some(median),
        median_std_error: Some(1.0 / (rate * c.sqrt())),
        outcome_frequencies: Some(frequencies),
        ks_statistic: Some(ks),
        ks_critical_1pct,
        survival_curve,
        mean_post_collapse_energy: Some(post),
        energy_residual: Some(post - model.pre_collapse_energy()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub pre_collapse_energy: f64,
    pub post_collapse_energy: Option<f64>,
    /// `post − pre`; tends to `−interference_energy` under Born weights.
    pub residual: Option<f64>,
    pub expected_residual: f64,
    /// Standard error of the post-collapse mean, `|E_a − E_b|·√(w_a w_b/n)`.
    pub std_error: f64,
    pub collapsed: usize,
}

impl EnergyLedger {
    /// Residual within three standard errors of its expectation (with a
    /// rounding allowance for the degenerate case).
    pub fn within_3_sigma(&self, energy_scale: f64) -> Option<bool> {
        self.residual
            .map(|r| (r - self.expected_residual).abs() <= 3.0 * self.std_error + 1e-12 * energy_scale.abs())
    }
}

pub fn energy_ledger(ensemble: &TrajectoryEnsemble, model: &CollapseModel) -> Result<EnergyLedger, SimError> {
    let expected = model.digest();
    if ensemble.model_digest != expected {
        return Err(SimError::Provenance { expected, found: ensemble.model_digest.clone() });
    }
    let (wa, wb) = model.outcome_weights;
    let (ea, eb) = model.branch_energies;
    let collapsed = ensemble.summary.collapsed;
    Ok(EnergyLedger {
        pre_collapse_energy: model.pre_collapse_energy(),
        post_collapse_energy: ensemble.summary.mean_post_collapse_energy,
        residual: ensemble.summary.energy_residual,
        expected_residual: 0.0 - model.interference_energy,
        std_error: if collapsed > 0 { (ea - eb).abs() * (wa * wb / collapsed as f64).sqrt() } else { 0.0 },
        collapsed,
    })
}
