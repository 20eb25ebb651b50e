//! Mass distributions and Newtonian self-energies.
//!
//! All energies use the convention `U[ρ] = (G/2)∬ ρ(x)ρ(y)/|x−y|`, reported
//! as a positive binding magnitude. The superposition energy is the same
//! functional applied to the branch difference,
//! `E_Δ = (G/2)∬ Δρ(x)Δρ(y)/|x−y|` with `Δρ = ρ_a − ρ_b`.
//!
//! Every shape is spherically symmetric about its centre, so all pairwise
//! integrals reduce to nested one-dimensional radial quadratures. Three
//! routes exist and are cross-checked in tests:
//!
//! * closed forms (self-energies, shell theorem, Gaussian pairs),
//! * nested radial quadrature ([`EnergyEngine::mutual_energy_quadrature`]),
//! * the field-energy form `E_Δ = (1/8πG)∫|g_a − g_b|² d³x`, manifestly
//!   non-negative ([`EnergyEngine::e_delta_field_energy`]),
//!
//! plus a stratified six-dimensional Monte Carlo sampler in [`monte_carlo`].

pub mod monte_carlo;
mod profile;

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::quadrature::{integrate_to_infinity, integrate_with_breaks, Tolerance};
use crate::quantities::PhysicalConstants;

pub use monte_carlo::McEstimate;
pub use profile::{ProfileSamples, RadialProfile};

/// Gaussian tails are cut here (in units of σ); the neglected mass fraction
/// is below 1e-45.
const GAUSSIAN_CUTOFF: f64 = 15.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MassError {
    #[error(
        "divergent self-energy: {0}; give the point mass a positive smearing_length \
         (it is then treated as a uniform ball of that radius)"
    )]
    DivergentSelfEnergy(String),
    #[error("{field} must be finite and positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("total mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("negative or non-finite density {value} at r = {radius}")]
    NegativeDensity { radius: f64, value: f64 },
    #[error("declared mass {declared} differs from integrated mass {integrated}")]
    MassMismatch { declared: f64, integrated: f64 },
    #[error("invalid radial profile: {0}")]
    InvalidProfile(String),
    #[error("branch amplitudes are not normalised: |a|² + |b|² = {0}")]
    AmplitudeNorm(f64),
    #[error("branches differ in total mass: {0} vs {1}")]
    BranchMassMismatch(f64, f64),
    #[error("quadrature did not reach tolerance (estimate {value}, error {error})")]
    Quadrature { value: f64, error: f64 },
    #[error("{0}")]
    Io(String),
}

pub type Vec3 = [f64; 3];

fn distance(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn positive(field: &'static str, value: f64) -> Result<(), MassError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(MassError::NonPositive { field, value })
    }
}

/// A spherically symmetric mass density about `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MassDistribution {
    UniformSphere { mass: f64, radius: f64, center: Vec3 },
    SphericalShell { mass: f64, radius: f64, center: Vec3 },
    Gaussian { mass: f64, width: f64, center: Vec3 },
    RadialProfile { center: Vec3, profile: RadialProfile },
    /// A point mass; with `smearing_length > 0` it is a uniform ball of that
    /// radius, with `smearing_length == 0` it is singular.
    PointMass { mass: f64, center: Vec3, smearing_length: f64 },
}

impl MassDistribution {
    pub fn uniform_sphere(mass: f64, radius: f64, center: Vec3) -> Result<Self, MassError> {
        let d = Self::UniformSphere { mass, radius, center };
        d.validate()?;
        Ok(d)
    }

    pub fn spherical_shell(mass: f64, radius: f64, center: Vec3) -> Result<Self, MassError> {
        let d = Self::SphericalShell { mass, radius, center };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian(mass: f64, width: f64, center: Vec3) -> Result<Self, MassError> {
        let d = Self::Gaussian { mass, width, center };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(mass: f64, center: Vec3, smearing_length: f64) -> Result<Self, MassError> {
        let d = Self::PointMass { mass, center, smearing_length };
        d.validate()?;
        Ok(d)
    }

    pub fn radial_profile(profile: RadialProfile, center: Vec3) -> Self {
        Self::RadialProfile { center, profile }
    }

    pub fn validate(&self) -> Result<(), MassError> {
        if self.center().iter().any(|c| !c.is_finite()) {
            return Err(MassError::NonPositive { field: "center", value: f64::NAN });
        }
        match self {
            Self::UniformSphere { mass, radius, .. } | Self::SphericalShell { mass, radius, .. } => {
                positive("mass", *mass)?;
                positive("radius", *radius)
            }
            Self::Gaussian { mass, width, .. } => {
                positive("mass", *mass)?;
                positive("width", *width)
            }
            Self::PointMass { mass, smearing_length, .. } => {
                positive("mass", *mass)?;
                if smearing_length.is_finite() && *smearing_length >= 0.0 {
                    Ok(())
                } else {
                    Err(MassError::NonPositive { field: "smearing_length", value: *smearing_length })
                }
            }
            Self::RadialProfile { profile, .. } => {
                let m = profile.total_mass();
                if m > 0.0 {
                    Ok(())
                } else {
                    Err(MassError::NonPositiveMass(m))
                }
            }
        }
    }

    pub fn center(&self) -> Vec3 {
        match self {
            Self::UniformSphere { center, .. }
            | Self::SphericalShell { center, .. }
            | Self::Gaussian { center, .. }
            | Self::RadialProfile { center, .. }
            | Self::PointMass { center, .. } => *center,
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Self::UniformSphere { mass, .. }
            | Self::SphericalShell { mass, .. }
            | Self::Gaussian { mass, .. }
            | Self::PointMass { mass, .. } => *mass,
            Self::RadialProfile { profile, .. } => profile.total_mass(),
        }
    }

    /// True for an unsmeared point mass.
    pub fn is_singular(&self) -> bool {
        matches!(self, Self::PointMass { smearing_length, .. } if *smearing_length == 0.0)
    }

    /// Radius beyond which the density vanishes (or is negligible, for Gaussians).
    pub fn outer_radius(&self) -> f64 {
        match self {
            Self::UniformSphere { radius, .. } | Self::SphericalShell { radius, .. } => *radius,
            Self::Gaussian { width, .. } => GAUSSIAN_CUTOFF * width,
            Self::RadialProfile { profile, .. } => profile.outer_radius(),
            Self::PointMass { smearing_length, .. } => *smearing_length,
        }
    }

    /// Whether the density has bounded support (Gaussians do not).
    pub fn is_compact(&self) -> bool {
        !matches!(self, Self::Gaussian { .. })
    }

    /// Radii where the density or its derivative jumps.
    fn radial_breaks(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { .. } => Vec::new(),
            Self::RadialProfile { profile, .. } => {
                let r = &profile.samples().radii;
                vec![r[0], profile.outer_radius()]
            }
            _ => vec![self.outer_radius()],
        }
    }

    /// Density at distance `r` from the centre (0 for shells and unsmeared points).
    pub fn density(&self, r: f64) -> f64 {
        match self {
            Self::UniformSphere { mass, radius, .. } => uniform_density(*mass, *radius, r),
            Self::PointMass { mass, smearing_length, .. } if *smearing_length > 0.0 => {
                uniform_density(*mass, *smearing_length, r)
            }
            Self::Gaussian { mass, width, .. } => {
                mass / (2.0 * PI * width * width).powf(1.5) * (-0.5 * (r / width).powi(2)).exp()
            }
            Self::RadialProfile { profile, .. } => profile.density(r),
            _ => 0.0,
        }
    }

    /// Mass inside radius `r`.
    pub fn enclosed_mass(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self {
            Self::UniformSphere { mass, radius, .. } => mass * (r / radius).min(1.0).powi(3),
            Self::SphericalShell { mass, radius, .. } => {
                if r >= *radius {
                    *mass
                } else {
                    0.0
                }
            }
            Self::Gaussian { mass, width, .. } => {
                let x = r / width;
                mass * (libm::erf(x / SQRT_2) - (2.0 / PI).sqrt() * x * (-0.5 * x * x).exp())
            }
            Self::RadialProfile { profile, .. } => profile.enclosed_mass(r),
            Self::PointMass { mass, smearing_length, .. } => {
                if *smearing_length > 0.0 {
                    mass * (r / smearing_length).min(1.0).powi(3)
                } else {
                    *mass
                }
            }
        }
    }

    /// `∫ρ(y)/|x−y| d³y` at distance `s` from the centre (the potential per unit G,
    /// sign dropped).
    pub fn potential(&self, s: f64) -> f64 {
        match self {
            Self::UniformSphere { mass, radius, .. } => uniform_potential(*mass, *radius, s),
            Self::PointMass { mass, smearing_length, .. } => {
                if *smearing_length > 0.0 {
                    uniform_potential(*mass, *smearing_length, s)
                } else {
                    mass / s
                }
            }
            Self::SphericalShell { mass, radius, .. } => mass / s.max(*radius),
            Self::Gaussian { mass, width, .. } => {
                let x = s / (SQRT_2 * width);
                if x < 1e-4 {
                    // erf(x)/x series
                    mass * (2.0 / PI).sqrt() / width * (1.0 - x * x / 3.0)
                } else {
                    mass * libm::erf(x) / s
                }
            }
            Self::RadialProfile { profile, .. } => profile.potential(s),
        }
    }

    /// Radius enclosing mass fraction `u ∈ [0, 1]`; used by the samplers.
    pub fn radial_quantile(&self, u: f64) -> f64 {
        match self {
            Self::UniformSphere { radius, .. } => radius * u.cbrt(),
            Self::PointMass { smearing_length, .. } => smearing_length * u.cbrt(),
            Self::SphericalShell { radius, .. } => *radius,
            Self::RadialProfile { profile, .. } => profile.quantile(u),
            Self::Gaussian { mass, .. } => {
                let target = u * mass;
                let (mut lo, mut hi) = (0.0, self.outer_radius());
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if self.enclosed_mass(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// `∫ f(r) dM(r)` over the radial mass measure.
    fn integrate_radial<F: FnMut(f64) -> f64>(&self, mut f: F, tol: Tolerance) -> Result<f64, MassError> {
        match self {
            Self::SphericalShell { mass, radius, .. } => Ok(mass * f(*radius)),
            Self::PointMass { mass, smearing_length, .. } if *smearing_length == 0.0 => Ok(mass * f(0.0)),
            _ => {
                let outer = self.outer_radius();
                let r = integrate_with_breaks(
                    |r| {
                        let w = 4.0 * PI * r * r * self.density(r);
                        if w == 0.0 {
                            0.0
                        } else {
                            w * f(r)
                        }
                    },
                    0.0,
                    outer,
                    &self.radial_breaks(),
                    tol,
                );
                checked(r)
            }
        }
    }

    /// The same distribution with every mass multiplied by `factor`.
    pub fn scaled_mass(&self, factor: f64) -> Result<Self, MassError> {
        positive("mass factor", factor)?;
        let mut out = self.clone();
        match &mut out {
            Self::UniformSphere { mass, .. }
            | Self::SphericalShell { mass, .. }
            | Self::Gaussian { mass, .. }
            | Self::PointMass { mass, .. } => *mass *= factor,
            Self::RadialProfile { profile, .. } => *profile = profile.scaled(factor, 1.0)?,
        }
        Ok(out)
    }

    /// Dilates every length (sizes and centre) by `factor`, keeping the mass.
    pub fn dilated(&self, factor: f64) -> Result<Self, MassError> {
        positive("length factor", factor)?;
        let mut out = self.clone();
        match &mut out {
            Self::UniformSphere { radius, center, .. } | Self::SphericalShell { radius, center, .. } => {
                *radius *= factor;
                center.iter_mut().for_each(|c| *c *= factor);
            }
            Self::Gaussian { width, center, .. } => {
                *width *= factor;
                center.iter_mut().for_each(|c| *c *= factor);
            }
            Self::PointMass { smearing_length, center, .. } => {
                *smearing_length *= factor;
                center.iter_mut().for_each(|c| *c *= factor);
            }
            Self::RadialProfile { profile, center } => {
                *profile = profile.scaled(1.0, factor)?;
                center.iter_mut().for_each(|c| *c *= factor);
            }
        }
        Ok(out)
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        let mut out = self.clone();
        let c = match &mut out {
            Self::UniformSphere { center, .. }
            | Self::SphericalShell { center, .. }
            | Self::Gaussian { center, .. }
            | Self::RadialProfile { center, .. }
            | Self::PointMass { center, .. } => center,
        };
        for i in 0..3 {
            c[i] += offset[i];
        }
        out
    }

    /// The same shape moved so its centre is `center`.
    pub fn recentered(&self, center: Vec3) -> Self {
        let c = self.center();
        self.translated([center[0] - c[0], center[1] - c[1], center[2] - c[2]])
    }
}

fn uniform_density(mass: f64, radius: f64, r: f64) -> f64 {
    if r <= radius {
        mass / (4.0 / 3.0 * PI * radius.powi(3))
    } else {
        0.0
    }
}

fn uniform_potential(mass: f64, radius: f64, s: f64) -> f64 {
    if s >= radius {
        mass / s
    } else {
        mass * (3.0 * radius * radius - s * s) / (2.0 * radius.powi(3))
    }
}

/// Orders two branches by their serialised form so that every energy route
/// is exactly symmetric under branch exchange.
fn canonical_pair<'a>(
    a: &'a MassDistribution,
    b: &'a MassDistribution,
) -> (&'a MassDistribution, &'a MassDistribution) {
    let key = |d: &MassDistribution| serde_json::to_string(d).expect("distribution serialises");
    if key(a) <= key(b) {
        (a, b)
    } else {
        (b, a)
    }
}

fn checked(r: crate::quadrature::Integral) -> Result<f64, MassError> {
    if r.converged && r.value.is_finite() {
        Ok(r.value)
    } else {
        Err(MassError::Quadrature { value: r.value, error: r.error })
    }
}

/// Two configurations of one body in quantum superposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperpositionSpec {
    pub branch_a: MassDistribution,
    pub branch_b: MassDistribution,
    pub amp_a: Complex64,
    pub amp_b: Complex64,
}

impl SuperpositionSpec {
    pub fn new(
        branch_a: MassDistribution,
        branch_b: MassDistribution,
        amp_a: Complex64,
        amp_b: Complex64,
    ) -> Result<Self, MassError> {
        let spec = Self { branch_a, branch_b, amp_a, amp_b };
        spec.validate()?;
        Ok(spec)
    }

    /// Equal-weight superposition `(|a⟩ + |b⟩)/√2`.
    pub fn equal_weights(branch_a: MassDistribution, branch_b: MassDistribution) -> Result<Self, MassError> {
        let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(branch_a, branch_b, amp, amp)
    }

    pub fn validate(&self) -> Result<(), MassError> {
        self.branch_a.validate()?;
        self.branch_b.validate()?;
        let norm = self.amp_a.norm_sqr() + self.amp_b.norm_sqr();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(MassError::AmplitudeNorm(norm));
        }
        let (ma, mb) = (self.branch_a.total_mass(), self.branch_b.total_mass());
        if ((ma - mb) / ma.max(mb)).abs() > 1e-9 {
            return Err(MassError::BranchMassMismatch(ma, mb));
        }
        Ok(())
    }

    /// Born weights `(|a|², |b|²)`.
    pub fn weights(&self) -> (f64, f64) {
        (self.amp_a.norm_sqr(), self.amp_b.norm_sqr())
    }

    pub fn swapped(&self) -> Self {
        Self {
            branch_a: self.branch_b.clone(),
            branch_b: self.branch_a.clone(),
            amp_a: self.amp_b,
            amp_b: self.amp_a,
        }
    }

    pub fn separation(&self) -> f64 {
        distance(&self.branch_a.center(), &self.branch_b.center())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serialises");
        hex::encode(Sha256::digest(&json))
    }
}

/// Evaluates Newtonian energies of mass distributions.
#[derive(Debug, Clone, Copy)]
pub struct EnergyEngine {
    pub constants: PhysicalConstants,
    /// Requested relative accuracy of radial quadratures.
    pub rel_tol: f64,
}

impl EnergyEngine {
    pub const DEFAULT_TOLERANCE: f64 = 1e-6;

    pub fn new(constants: PhysicalConstants) -> Self {
        Self { constants, rel_tol: Self::DEFAULT_TOLERANCE }
    }

    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    fn tol(&self) -> Tolerance {
        Tolerance::relative(self.rel_tol * 1e-2)
    }

    /// Gravitational self-energy `U[ρ]` in joules.
    pub fn self_energy(&self, d: &MassDistribution) -> Result<f64, MassError> {
        d.validate()?;
        let g = self.constants.g();
        match d {
            MassDistribution::UniformSphere { mass, radius, .. } => Ok(0.6 * g * mass * mass / radius),
            MassDistribution::SphericalShell { mass, radius, .. } => Ok(0.5 * g * mass * mass / radius),
            MassDistribution::Gaussian { mass, width, .. } => Ok(g * mass * mass / (2.0 * PI.sqrt() * width)),
            MassDistribution::PointMass { mass, smearing_length, .. } => {
                if *smearing_length > 0.0 {
                    Ok(0.6 * g * mass * mass / smearing_length)
                } else {
                    Err(MassError::DivergentSelfEnergy("point mass with zero smearing length".into()))
                }
            }
            MassDistribution::RadialProfile { .. } => self.self_energy_quadrature(d),
        }
    }

    /// `U = (G/2)∫₀^∞ M(r)²/r² dr`, evaluated numerically for any shape.
    pub fn self_energy_quadrature(&self, d: &MassDistribution) -> Result<f64, MassError> {
        if d.is_singular() {
            return Err(MassError::DivergentSelfEnergy("point mass with zero smearing length".into()));
        }
        let outer = d.outer_radius();
        let m = d.total_mass();
        let inner = integrate_with_breaks(
            |r| {
                if r == 0.0 {
                    0.0
                } else {
                    (d.enclosed_mass(r) / r).powi(2)
                }
            },
            0.0,
            outer,
            &d.radial_breaks(),
            self.tol(),
        );
        let inner = checked(inner)?;
        Ok(0.5 * self.constants.g() * (inner + m * m / outer))
    }

    /// `G∬ρ₁(x)ρ₂(y)/|x−y|` in joules, using closed forms where they exist.
    pub fn mutual_energy(&self, d1: &MassDistribution, d2: &MassDistribution) -> Result<f64, MassError> {
        d1.validate()?;
        d2.validate()?;
        let g = self.constants.g();
        let sep = distance(&d1.center(), &d2.center());
        let (m1, m2) = (d1.total_mass(), d2.total_mass());
        if d1.is_singular() && d2.is_singular() && sep == 0.0 {
            return Err(MassError::DivergentSelfEnergy("coincident point masses".into()));
        }
        if d1.is_compact() && d2.is_compact() && sep > 0.0 && d1.outer_radius() + d2.outer_radius() <= sep {
            return Ok(g * m1 * m2 / sep);
        }
        if d1.is_singular() {
            return Ok(g * m1 * d2.potential(sep));
        }
        if d2.is_singular() {
            return Ok(g * m2 * d1.potential(sep));
        }
        if let (
            MassDistribution::Gaussian { width: s1, .. },
            MassDistribution::Gaussian { width: s2, .. },
        ) = (d1, d2)
        {
            // the pair integral is the potential of a Gaussian of width √(σ₁² + σ₂²)
            let combined = (s1 * s1 + s2 * s2).sqrt();
            let unit = MassDistribution::Gaussian { mass: 1.0, width: combined, center: [0.0; 3] };
            return Ok(g * m1 * m2 * unit.potential(sep));
        }
        self.mutual_energy_quadrature(d1, d2)
    }

    /// Mutual energy by nested radial quadrature: the outer integral runs over
    /// the radial mass measure of `d1`, the inner one averages the potential of
    /// `d2` over the sphere of that radius about `d1`'s centre.
    pub fn mutual_energy_quadrature(&self, d1: &MassDistribution, d2: &MassDistribution) -> Result<f64, MassError> {
        let sep = distance(&d1.center(), &d2.center());
        if d1.is_singular() && d2.is_singular() && sep == 0.0 {
            return Err(MassError::DivergentSelfEnergy("coincident point masses".into()));
        }
        let tol = self.tol();
        let inner_tol = Tolerance::relative(tol.rel * 1e-2);
        let r2 = d2.outer_radius();
        let inner_breaks: Vec<f64> = d2.radial_breaks();
        let mut failure = None;
        let mut shell_average = |r: f64| -> f64 {
            if sep == 0.0 {
                return d2.potential(r);
            }
            if r == 0.0 {
                return d2.potential(sep);
            }
            let lo = (r - sep).abs();
            let hi = r + sep;
            let res = integrate_with_breaks(|s| d2.potential(s) * s, lo, hi, &inner_breaks, inner_tol);
            if !res.converged {
                failure = Some(res);
            }
            res.value / (2.0 * r * sep)
        };
        let mut outer_breaks = d1.radial_breaks();
        outer_breaks.extend([sep + r2, (sep - r2).abs(), r2 - sep].iter().filter(|x| **x > 0.0));
        let value = match d1 {
            MassDistribution::SphericalShell { .. } => d1.integrate_radial(shell_average, tol)?,
            MassDistribution::PointMass { smearing_length, .. } if *smearing_length == 0.0 => {
                d1.integrate_radial(shell_average, tol)?
            }
            _ => {
                let outer = d1.outer_radius();
                let res = integrate_with_breaks(
                    |r| {
                        let w = 4.0 * PI * r * r * d1.density(r);
                        if w == 0.0 {
                            0.0
                        } else {
                            w * shell_average(r)
                        }
                    },
                    0.0,
                    outer,
                    &outer_breaks,
                    tol,
                );
                checked(res)?
            }
        };
        if let Some(res) = failure {
            return Err(MassError::Quadrature { value: res.value, error: res.error });
        }
        Ok(self.constants.g() * value)
    }

    /// `E_Δ` for a superposition, in joules. Always non-negative; exactly zero
    /// for identical branches.
    pub fn e_delta(&self, spec: &SuperpositionSpec) -> Result<f64, MassError> {
        spec.validate()?;
        let (a, b) = canonical_pair(&spec.branch_a, &spec.branch_b);
        for d in [a, b] {
            if d.is_singular() {
                return Err(MassError::DivergentSelfEnergy(
                    "superposition branch is an unsmeared point mass".into(),
                ));
            }
        }
        if a == b {
            return Ok(0.0);
        }
        if spec.separation() == 0.0 {
            return self.e_delta_concentric(a, b);
        }
        let ua = self.self_energy(a)?;
        let ub = self.self_energy(b)?;
        let cross = self.mutual_energy(a, b)?;
        let value = ua + ub - cross;
        // Below this level the difference is dominated by quadrature error.
        let noise = 10.0 * self.rel_tol * (ua + ub);
        if value > noise {
            Ok(value)
        } else {
            self.e_delta_field_energy(spec)
        }
    }

    /// `E_Δ = (G/2)∫ (M_a(r) − M_b(r))²/r² dr` for branches sharing a centre.
    fn e_delta_concentric(&self, a: &MassDistribution, b: &MassDistribution) -> Result<f64, MassError> {
        let outer = a.outer_radius().max(b.outer_radius());
        let mut breaks = a.radial_breaks();
        breaks.extend(b.radial_breaks());
        let res = integrate_with_breaks(
            |r| {
                if r == 0.0 {
                    0.0
                } else {
                    ((a.enclosed_mass(r) - b.enclosed_mass(r)) / r).powi(2)
                }
            },
            0.0,
            outer,
            &breaks,
            Tolerance { rel: self.tol().rel, abs: 0.0 },
        );
        let tail = (a.total_mass() - b.total_mass()).powi(2) / outer;
        Ok(0.5 * self.constants.g() * (checked(res)? + tail))
    }

    /// `E_Δ = (1/8πG)∫|g_a − g_b|² d³x`, integrated in cylindrical coordinates
    /// about the axis joining the two centres. Independent of the pairwise
    /// route and non-negative by construction.
    pub fn e_delta_field_energy(&self, spec: &SuperpositionSpec) -> Result<f64, MassError> {
        spec.validate()?;
        let (a, b) = canonical_pair(&spec.branch_a, &spec.branch_b);
        if a.is_singular() || b.is_singular() {
            return Err(MassError::DivergentSelfEnergy("superposition branch is an unsmeared point mass".into()));
        }
        let d = spec.separation();
        if d == 0.0 {
            return self.e_delta_concentric(a, b);
        }
        let (ra, rb) = (a.outer_radius(), b.outer_radius());
        let reach = ra.max(rb) + d;
        let tol = self.tol();
        let inner_tol = Tolerance::relative(tol.rel * 1e-2);
        let mut failure = None;

        // |f_a − f_b|² with f(x) = M(|x−c|)·(x−c)/|x−c|³, a at z = 0, b at z = d.
        let field2 = |s: f64, z: f64| -> f64 {
            let ra2 = s * s + z * z;
            let rb2 = s * s + (z - d) * (z - d);
            let fa = if ra2 > 0.0 {
                let r = ra2.sqrt();
                a.enclosed_mass(r) / (ra2 * r)
            } else {
                0.0
            };
            let fb = if rb2 > 0.0 {
                let r = rb2.sqrt();
                b.enclosed_mass(r) / (rb2 * r)
            } else {
                0.0
            };
            let ds = fa * s - fb * s;
            let dz = fa * z - fb * (z - d);
            ds * ds + dz * dz
        };
        let slab = |z: f64| -> f64 {
            let mut breaks = Vec::new();
            for (rad, zc) in [(ra, 0.0), (rb, d)] {
                let h = rad * rad - (z - zc) * (z - zc);
                if h > 0.0 {
                    breaks.push(h.sqrt());
                }
            }
            let near = integrate_with_breaks(|s| 2.0 * PI * s * field2(s, z), 0.0, reach, &breaks, inner_tol);
            let far = integrate_to_infinity(|s| 2.0 * PI * s * field2(s, z), reach, inner_tol);
            if !(near.converged && far.converged) {
                failure = Some(if near.converged { far } else { near });
            }
            near.value + far.value
        };
        let slab = std::cell::RefCell::new(slab);
        let breaks = [-ra, ra, d - rb, d + rb];
        let mid = integrate_with_breaks(|z| (slab.borrow_mut())(z), -reach, d + reach, &breaks, tol);
        let upper = integrate_to_infinity(|z| (slab.borrow_mut())(z), d + reach, tol);
        let lower = integrate_to_infinity(|t| (slab.borrow_mut())(-t), reach, tol);
        drop(slab);
        if let Some(res) = failure {
            return Err(MassError::Quadrature { value: res.value, error: res.error });
        }
        let total = checked(mid)? + checked(upper)? + checked(lower)?;
        Ok(self.constants.g() * total / (8.0 * PI))
    }
}

/// Self-energy with default tolerance.
pub fn self_energy(d: &MassDistribution, constants: &PhysicalConstants) -> Result<f64, MassError> {
    EnergyEngine::new(*constants).self_energy(d)
}

/// Mutual energy with default tolerance.
pub fn mutual_energy(
    d1: &MassDistribution,
    d2: &MassDistribution,
    constants: &PhysicalConstants,
) -> Result<f64, MassError> {
    EnergyEngine::new(*constants).mutual_energy(d1, d2)
}

/// `E_Δ` with default tolerance.
pub fn e_delta(spec: &SuperpositionSpec, constants: &PhysicalConstants) -> Result<f64, MassError> {
    EnergyEngine::new(*constants).e_delta(spec)
}
