use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MassError;
use crate::quadrature::gauss_legendre4;

/// Raw samples as they appear in manifests and CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSamples {
    pub radii: Vec<f64>,
    pub density: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_mass: Option<f64>,
}

/// A spherically symmetric density sampled on `r₀ < r₁ < … < r_n`.
///
/// Between samples the density is a monotone piecewise cubic (Fritsch–Carlson
/// slopes), so it never dips below zero. Below `r₀` it is held at `ρ(r₀)`,
/// above `r_n` it vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSamples", into = "ProfileSamples")]
pub struct RadialProfile {
    samples: ProfileSamples,
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    // ∫₀^{r_i} 4πr²ρ dr and ∫₀^{r_i} 4πrρ dr at each knot
    cum_mass: Vec<f64>,
    cum_inverse: Vec<f64>,
}

impl From<RadialProfile> for ProfileSamples {
    fn from(p: RadialProfile) -> Self {
        p.samples
    }
}

impl TryFrom<ProfileSamples> for RadialProfile {
    type Error = MassError;
    fn try_from(s: ProfileSamples) -> Result<Self, Self::Error> {
        RadialProfile::new(s.radii, s.density, s.declared_mass)
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let edge = |h0: f64, h1: f64, m0: f64, m1: f64| {
        let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if d.signum() != m0.signum() || m0 == 0.0 {
            0.0
        } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
            3.0 * m0
        } else {
            d
        }
    };
    d[0] = edge(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

impl RadialProfile {
    pub fn new(radii: Vec<f64>, density: Vec<f64>, declared_mass: Option<f64>) -> Result<Self, MassError> {
        let samples = ProfileSamples { radii: radii.clone(), density: density.clone(), declared_mass };
        if radii.len() != density.len() {
            return Err(MassError::InvalidProfile(format!(
                "{} radii but {} density samples",
                radii.len(),
                density.len()
            )));
        }
        if radii.len() < 2 {
            return Err(MassError::InvalidProfile("need at least two samples".into()));
        }
        if radii.iter().any(|r| !r.is_finite()) || radii[0] < 0.0 {
            return Err(MassError::InvalidProfile("radii must be finite and non-negative".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MassError::InvalidProfile("radii must be strictly increasing".into()));
        }
        if let Some(i) = density.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(MassError::NegativeDensity { radius: radii[i], value: density[i] });
        }

        let (knots, values) = if radii[0] > 0.0 {
            let mut k = vec![0.0];
            k.extend_from_slice(&radii);
            let mut v = vec![density[0]];
            v.extend_from_slice(&density);
            (k, v)
        } else {
            (radii, density)
        };
        let slopes = pchip_slopes(&knots, &values);
        let mut out = Self {
            samples,
            knots,
            values,
            slopes,
            cum_mass: Vec::new(),
            cum_inverse: Vec::new(),
        };
        let mut m = vec![0.0];
        let mut inv = vec![0.0];
        for i in 0..out.knots.len() - 1 {
            let (a, b) = (out.knots[i], out.knots[i + 1]);
            m.push(m[i] + gauss_legendre4(|r| 4.0 * PI * r * r * out.segment_eval(i, r), a, b));
            inv.push(inv[i] + gauss_legendre4(|r| 4.0 * PI * r * out.segment_eval(i, r), a, b));
        }
        out.cum_mass = m;
        out.cum_inverse = inv;

        let total = out.total_mass();
        if !(total > 0.0) {
            return Err(MassError::NonPositiveMass(total));
        }
        if let Some(declared) = declared_mass {
            if ((total - declared) / declared).abs() > 1e-9 {
                return Err(MassError::MassMismatch { declared, integrated: total });
            }
        }
        Ok(out)
    }

    /// Reads a two-column `r [m], ρ [kg/m³]` CSV. A non-numeric first row is
    /// treated as a header.
    pub fn from_csv(path: &Path, declared_mass: Option<f64>) -> Result<Self, MassError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| MassError::Io(format!("{}: {e}", path.display())))?;
        let mut radii = Vec::new();
        let mut density = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| MassError::Io(format!("{}: {e}", path.display())))?;
            if record.len() < 2 {
                return Err(MassError::InvalidProfile(format!("row {} has fewer than two columns", line + 1)));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(r), Ok(rho)) => {
                    radii.push(r);
                    density.push(rho);
                }
                _ if line == 0 => continue,
                _ => {
                    return Err(MassError::InvalidProfile(format!("row {} is not numeric", line + 1)));
                }
            }
        }
        Self::new(radii, density, declared_mass)
    }

    pub fn samples(&self) -> &ProfileSamples {
        &self.samples
    }

    fn segment_eval(&self, i: usize, r: f64) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        let t = (r - self.knots[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1]
    }

    fn segment_of(&self, r: f64) -> usize {
        let idx = self.knots.partition_point(|&k| k <= r);
        idx.saturating_sub(1).min(self.knots.len() - 2)
    }

    pub fn outer_radius(&self) -> f64 {
        *self.knots.last().expect("non-empty")
    }

    pub fn total_mass(&self) -> f64 {
        *self.cum_mass.last().expect("non-empty")
    }

    pub fn density(&self, r: f64) -> f64 {
        if r > self.outer_radius() || r < 0.0 {
            return 0.0;
        }
        self.segment_eval(self.segment_of(r), r).max(0.0)
    }

    pub fn enclosed_mass(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.outer_radius() {
            return self.total_mass();
        }
        let i = self.segment_of(r);
        self.cum_mass[i]
            + gauss_legendre4(|x| 4.0 * PI * x * x * self.segment_eval(i, x), self.knots[i], r)
    }

    fn inverse_moment(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.outer_radius() {
            return *self.cum_inverse.last().expect("non-empty");
        }
        let i = self.segment_of(r);
        self.cum_inverse[i] + gauss_legendre4(|x| 4.0 * PI * x * self.segment_eval(i, x), self.knots[i], r)
    }

    /// `∫ρ(y)/|x−y| d³y` at distance `s` from the centre.
    pub fn potential(&self, s: f64) -> f64 {
        let total_inv = *self.cum_inverse.last().expect("non-empty");
        if s <= 0.0 {
            return total_inv;
        }
        if s >= self.outer_radius() {
            return self.total_mass() / s;
        }
        self.enclosed_mass(s) / s + (total_inv - self.inverse_moment(s))
    }

    /// Radius enclosing mass fraction `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.total_mass();
        let i = self.cum_mass.partition_point(|&m| m < target).clamp(1, self.knots.len() - 1) - 1;
        let (mut lo, mut hi) = (self.knots[i], self.knots[i + 1]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.enclosed_mass(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn scaled(&self, mass_factor: f64, length_factor: f64) -> Result<Self, MassError> {
        let radii = self.samples.radii.iter().map(|r| r * length_factor).collect();
        let density = self
            .samples
            .density
            .iter()
            .map(|d| d * mass_factor / length_factor.powi(3))
            .collect();
        Self::new(radii, density, self.samples.declared_mass.map(|m| m * mass_factor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    fn ramp() -> RadialProfile {
        // ρ = 1 − r on [0, 1] sampled coarsely
        let radii: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let density = radii.iter().map(|r| 1.0 - r).collect();
        RadialProfile::new(radii, density, None).unwrap()
    }

    #[test]
    fn linear_data_is_reproduced() {
        let p = ramp();
        for r in [0.05, 0.33, 0.71, 0.99] {
            assert!((p.density(r) - (1.0 - r)).abs() < 1e-12);
        }
        // ∫ 4πr²(1 − r) dr = 4π(1/3 − 1/4)
        assert!((p.total_mass() - 4.0 * PI / 12.0).abs() < 1e-12);
    }

    #[test]
    fn density_stays_nonnegative() {
        let radii = vec![0.0, 0.1, 0.2, 0.3, 0.4, 1.0];
        let density = vec![5.0, 0.0, 3.0, 0.0, 0.0, 2.0];
        let p = RadialProfile::new(radii, density, None).unwrap();
        for i in 0..=1000 {
            assert!(p.density(i as f64 / 1000.0) >= 0.0);
        }
    }

    #[test]
    fn potential_matches_direct_quadrature() {
        let p = ramp();
        for s in [0.0f64, 0.2, 0.5, 0.9, 2.0] {
            let inner = integrate(|r| 4.0 * PI * r * r * p.density(r), 0.0, s.min(1.0), Tolerance::relative(1e-12)).value;
            let outer = integrate(|r| 4.0 * PI * r * p.density(r), s.min(1.0), 1.0, Tolerance::relative(1e-12)).value;
            let expect = if s == 0.0 { outer } else { inner / s + outer };
            assert!((p.potential(s) - expect).abs() < 1e-10, "s={s}");
        }
    }

    #[test]
    fn quantile_inverts_enclosed_mass() {
        let p = ramp();
        for u in [0.1, 0.5, 0.9] {
            let r = p.quantile(u);
            assert!((p.enclosed_mass(r) / p.total_mass() - u).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(RadialProfile::new(vec![0.0, 1.0], vec![1.0, -1.0], None).is_err());
        assert!(RadialProfile::new(vec![0.0, 0.0], vec![1.0, 1.0], None).is_err());
        assert!(RadialProfile::new(vec![0.0, 1.0], vec![0.0, 0.0], None).is_err());
        let err = RadialProfile::new(vec![0.0, 1.0], vec![1.0, 1.0], Some(1.0)).unwrap_err();
        assert!(matches!(err, MassError::MassMismatch { .. }));
    }

    #[test]
    fn csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "r,rho\n0.0,1.0\n0.5,0.5\n1.0,0.0\n").unwrap();
        let p = RadialProfile::from_csv(&path, None).unwrap();
        assert!((p.density(0.25) - 0.75).abs() < 1e-12);
    }
}
