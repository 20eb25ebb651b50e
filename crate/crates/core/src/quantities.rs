//! Physical constants, unit systems and dimension-tagged rescaling.
//!
//! Every solver in this crate works internally in a dimensionless system and
//! converts at its boundary through a [`ScaleSystem`]. Three systems exist:
//! plain SI, the Schrödinger–Newton natural system of a particle of mass `m`
//! (lengths in `ħ²/(G m³)`, energies in `G² m⁵/ħ²`), and Hartree atomic units.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Joules per electronvolt (exact in SI 2019).
pub const JOULES_PER_EV: f64 = 1.602_176_634e-19;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantityError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionError { expected: Dimension, found: Dimension },
    #[error("constant `{name}` must be finite and strictly positive, got {value}")]
    InvalidConstant { name: String, value: f64 },
    #[error("unknown constant override `{0}`")]
    UnknownConstant(String),
    #[error("scale systems were built from different physical constants")]
    InconsistentConstants,
    #[error("mass reference must be finite and positive, got {0}")]
    InvalidMassReference(f64),
    #[error("unknown scale system `{0}` (expected si, sn-natural or atomic)")]
    UnknownScale(String),
}

/// Fundamental constants used across the crate. Defaults are CODATA 2018.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    hbar: f64,
    g: f64,
    c: f64,
    e2_coulomb: f64,
    m_e: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata2018()
    }
}

impl PhysicalConstants {
    pub fn codata2018() -> Self {
        let elementary_charge = 1.602_176_634e-19;
        let epsilon_0 = 8.854_187_8128e-12;
        Self {
            hbar: 1.054_571_817e-34,
            g: 6.674_30e-11,
            c: 299_792_458.0,
            e2_coulomb: elementary_charge * elementary_charge
                / (4.0 * std::f64::consts::PI * epsilon_0),
            m_e: 9.109_383_7015e-31,
        }
    }

    /// Builds a constant set explicitly. All values must be finite and positive.
    pub fn new(hbar: f64, g: f64, c: f64, e2_coulomb: f64, m_e: f64) -> Result<Self, QuantityError> {
        let out = Self { hbar, g, c, e2_coulomb, m_e };
        out.validate()?;
        Ok(out)
    }

    /// Applies named overrides (`hbar`, `G`, `c`, `e2_coulomb`, `m_e`).
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self, QuantityError> {
        let mut out = *self;
        for (name, &value) in overrides {
            match name.as_str() {
                "hbar" => out.hbar = value,
                "G" | "g" => out.g = value,
                "c" => out.c = value,
                "e2_coulomb" => out.e2_coulomb = value,
                "m_e" => out.m_e = value,
                other => return Err(QuantityError::UnknownConstant(other.to_string())),
            }
        }
        out.validate()?;
        Ok(out)
    }

    fn validate(&self) -> Result<(), QuantityError> {
        for (name, value) in [
            ("hbar", self.hbar),
            ("G", self.g),
            ("c", self.c),
            ("e2_coulomb", self.e2_coulomb),
            ("m_e", self.m_e),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(QuantityError::InvalidConstant { name: name.into(), value });
            }
        }
        Ok(())
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    /// Coulomb coupling `e²/4πε₀` in J·m.
    pub fn e2_coulomb(&self) -> f64 {
        self.e2_coulomb
    }
    pub fn m_e(&self) -> f64 {
        self.m_e
    }

    /// Bohr radius `ħ²/(m_e e²)`.
    pub fn bohr_radius(&self) -> f64 {
        self.hbar * self.hbar / (self.m_e * self.e2_coulomb)
    }

    /// Hartree energy `m_e e⁴/ħ²`.
    pub fn hartree(&self) -> f64 {
        self.m_e * self.e2_coulomb * self.e2_coulomb / (self.hbar * self.hbar)
    }

    /// The dimensionless gravitational coupling `G M²/(ħ c)`.
    pub fn gravitational_coupling(&self, mass: f64) -> f64 {
        self.g * mass * mass / (self.hbar * self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Dimensionless,
    Mass,
    Length,
    Time,
    Energy,
    Action,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Dimensionless => "dimensionless",
            Dimension::Mass => "mass",
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Energy => "energy",
            Dimension::Action => "action",
        };
        f.write_str(s)
    }
}

/// A numeric value carrying its dimension tag. The unit is implied by the
/// [`ScaleSystem`] the value is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub dimension: Dimension,
}

impl Quantity {
    pub fn new(value: f64, dimension: Dimension) -> Self {
        Self { value, dimension }
    }
    pub fn length(value: f64) -> Self {
        Self::new(value, Dimension::Length)
    }
    pub fn energy(value: f64) -> Self {
        Self::new(value, Dimension::Energy)
    }
    pub fn mass(value: f64) -> Self {
        Self::new(value, Dimension::Mass)
    }
    pub fn time(value: f64) -> Self {
        Self::new(value, Dimension::Time)
    }

    /// Returns the raw value if the tag matches `expected`.
    pub fn expect(&self, expected: Dimension) -> Result<f64, QuantityError> {
        if self.dimension == expected {
            Ok(self.value)
        } else {
            Err(QuantityError::DimensionError { expected, found: self.dimension })
        }
    }

    pub fn checked_add(&self, other: &Quantity) -> Result<Quantity, QuantityError> {
        other.expect(self.dimension)?;
        Ok(Quantity::new(self.value + other.value, self.dimension))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScaleLabel {
    #[serde(rename = "si")]
    Si,
    #[serde(rename = "sn-natural")]
    SnNatural,
    #[serde(rename = "atomic")]
    Atomic,
}

impl std::str::FromStr for ScaleLabel {
    type Err = QuantityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "si" => Ok(ScaleLabel::Si),
            "sn-natural" | "sn_natural" => Ok(ScaleLabel::SnNatural),
            "atomic" => Ok(ScaleLabel::Atomic),
            other => Err(QuantityError::UnknownScale(other.to_string())),
        }
    }
}

impl fmt::Display for ScaleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleLabel::Si => "SI",
            ScaleLabel::SnNatural => "SN-NATURAL",
            ScaleLabel::Atomic => "ATOMIC",
        })
    }
}

/// A unit system: how many SI units one unit of each dimension is worth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSystem {
    pub label: ScaleLabel,
    pub length_scale: f64,
    pub time_scale: f64,
    pub energy_scale: f64,
    pub mass_reference: f64,
    constants: PhysicalConstants,
}

impl ScaleSystem {
    pub fn si(constants: &PhysicalConstants) -> Self {
        Self {
            label: ScaleLabel::Si,
            length_scale: 1.0,
            time_scale: 1.0,
            energy_scale: 1.0,
            mass_reference: 1.0,
            constants: *constants,
        }
    }

    /// Natural units of the Schrödinger–Newton equation for a particle of mass `m`.
    pub fn sn_natural(constants: &PhysicalConstants, mass: f64) -> Result<Self, QuantityError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(QuantityError::InvalidMassReference(mass));
        }
        let hbar = constants.hbar();
        let g = constants.g();
        let length = hbar * hbar / (g * mass.powi(3));
        let energy = g * g * mass.powi(5) / (hbar * hbar);
        Ok(Self {
            label: ScaleLabel::SnNatural,
            length_scale: length,
            time_scale: hbar / energy,
            energy_scale: energy,
            mass_reference: mass,
            constants: *constants,
        })
    }

    pub fn atomic(constants: &PhysicalConstants) -> Self {
        let energy = constants.hartree();
        Self {
            label: ScaleLabel::Atomic,
            length_scale: constants.bohr_radius(),
            time_scale: constants.hbar() / energy,
            energy_scale: energy,
            mass_reference: constants.m_e(),
            constants: *constants,
        }
    }

    /// Builds a system by label. `mass` is required for SN-NATURAL only.
    pub fn from_label(
        label: ScaleLabel,
        constants: &PhysicalConstants,
        mass: Option<f64>,
    ) -> Result<Self, QuantityError> {
        match label {
            ScaleLabel::Si => Ok(Self::si(constants)),
            ScaleLabel::Atomic => Ok(Self::atomic(constants)),
            ScaleLabel::SnNatural => {
                Self::sn_natural(constants, mass.ok_or(QuantityError::InvalidMassReference(f64::NAN))?)
            }
        }
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    /// SI value of one unit of `dimension` in this system.
    pub fn unit_of(&self, dimension: Dimension) -> f64 {
        match dimension {
            Dimension::Dimensionless => 1.0,
            Dimension::Mass => self.mass_reference,
            Dimension::Length => self.length_scale,
            Dimension::Time => self.time_scale,
            Dimension::Energy => self.energy_scale,
            Dimension::Action => self.energy_scale * self.time_scale,
        }
    }

    pub fn to_si(&self, q: Quantity) -> Quantity {
        Quantity::new(q.value * self.unit_of(q.dimension), q.dimension)
    }

    pub fn from_si(&self, q: Quantity) -> Quantity {
        Quantity::new(q.value / self.unit_of(q.dimension), q.dimension)
    }

    /// `G`, `ħ` and `c` expressed in this system's units.
    pub fn constants_in_units(&self) -> (f64, f64, f64) {
        let g = self.constants.g() * self.mass_reference * self.time_scale.powi(2)
            / self.length_scale.powi(3);
        let hbar = self.constants.hbar() / self.unit_of(Dimension::Action);
        let c = self.constants.c() * self.time_scale / self.length_scale;
        (g, hbar, c)
    }
}

/// Re-expresses `value` (given in `from` units) in `to` units.
pub fn rescale(value: Quantity, from: &ScaleSystem, to: &ScaleSystem) -> Result<Quantity, QuantityError> {
    if from.constants != to.constants {
        return Err(QuantityError::InconsistentConstants);
    }
    Ok(to.from_si(from.to_si(value)))
}

/// Like [`rescale`], but also checks that `value` carries `expected`.
pub fn rescale_checked(
    value: Quantity,
    expected: Dimension,
    from: &ScaleSystem,
    to: &ScaleSystem,
) -> Result<Quantity, QuantityError> {
    value.expect(expected)?;
    rescale(value, from, to)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn identity_rescale_in_si() {
        let k = PhysicalConstants::default();
        let si = ScaleSystem::si(&k);
        let q = rescale(Quantity::length(1.0), &si, &si).unwrap();
        assert_eq!(q.value, 1.0);
    }

    #[test]
    fn sn_natural_energy_unit() {
        let k = PhysicalConstants::default();
        let m = 1.0e-17;
        let sn = ScaleSystem::sn_natural(&k, m).unwrap();
        let q = rescale(Quantity::energy(1.0), &sn, &ScaleSystem::si(&k)).unwrap();
        let expected = k.g().powi(2) * m.powi(5) / k.hbar().powi(2);
        assert!(rel(q.value, expected) < 1e-14);
    }

    #[test]
    fn hartree_is_27_211_ev() {
        let k = PhysicalConstants::default();
        let au = ScaleSystem::atomic(&k);
        let q = rescale(
            Quantity::energy(27.211_386_245_988 * JOULES_PER_EV),
            &ScaleSystem::si(&k),
            &au,
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-8, "{}", q.value);
        assert!(rel(k.bohr_radius(), 5.291_772_109_03e-11) < 1e-8);
    }

    #[test]
    fn dimension_tag_is_checked() {
        let k = PhysicalConstants::default();
        let si = ScaleSystem::si(&k);
        let err = rescale_checked(Quantity::mass(1.0), Dimension::Length, &si, &si).unwrap_err();
        assert!(matches!(err, QuantityError::DimensionError { .. }));
        assert!(Quantity::mass(1.0).checked_add(&Quantity::time(1.0)).is_err());
    }

    #[test]
    fn mixed_constants_are_rejected() {
        let a = PhysicalConstants::default();
        let mut o = BTreeMap::new();
        o.insert("G".to_string(), 2.0 * a.g());
        let b = a.with_overrides(&o).unwrap();
        let err = rescale(Quantity::length(1.0), &ScaleSystem::si(&a), &ScaleSystem::si(&b));
        assert_eq!(err.unwrap_err(), QuantityError::InconsistentConstants);
    }

    #[test]
    fn overrides_validate() {
        let k = PhysicalConstants::default();
        let mut o = BTreeMap::new();
        o.insert("hbar".to_string(), -1.0);
        assert!(k.with_overrides(&o).is_err());
        let mut o = BTreeMap::new();
        o.insert("planck".to_string(), 1.0);
        assert!(matches!(k.with_overrides(&o), Err(QuantityError::UnknownConstant(_))));
    }

    #[test]
    fn feynman_coupling_is_scale_invariant() {
        let k = PhysicalConstants::default();
        let mass = 3.0e-8;
        let direct = k.gravitational_coupling(mass);
        for sys in [
            ScaleSystem::si(&k),
            ScaleSystem::atomic(&k),
            ScaleSystem::sn_natural(&k, 1.0e-20).unwrap(),
        ] {
            let (g, hbar, c) = sys.constants_in_units();
            let m = mass / sys.mass_reference;
            assert!(rel(g * m * m / (hbar * c), direct) < 1e-12, "{}", sys.label);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dims() -> impl Strategy<Value = Dimension> {
            prop_oneof![
                Just(Dimension::Mass),
                Just(Dimension::Length),
                Just(Dimension::Time),
                Just(Dimension::Energy),
                Just(Dimension::Action),
            ]
        }

        proptest! {
            #[test]
            fn round_trip(v in -1e30f64..1e30, d in dims(), m in 1e-30f64..1e3, a in 0usize..3, b in 0usize..3) {
                let k = PhysicalConstants::default();
                let systems = [
                    ScaleSystem::si(&k),
                    ScaleSystem::atomic(&k),
                    ScaleSystem::sn_natural(&k, m).unwrap(),
                ];
                let q = Quantity::new(v, d);
                let there = rescale(q, &systems[a], &systems[b]).unwrap();
                let back = rescale(there, &systems[b], &systems[a]).unwrap();
                prop_assert!((back.value - v).abs() <= 1e-12 * v.abs());
            }
        }
    }
}
