use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::CenterOutwardMap;
use crate::error::{invalid, Error, Result};
use crate::points::{norm, sub};

/// Law of `|X - center|` for a spherically symmetric distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadialProfile {
    /// The spherical uniform itself: the radius is Uniform(0, 1).
    SphericalUniform,
    /// Uniform on the ball of the given radius.
    UniformBall { radius: f64 },
    /// Isotropic Gaussian with standard deviation `sigma` per coordinate.
    Gaussian { sigma: f64 },
}

/// Closed-form center-outward maps of spherically symmetric distributions.
/// The optimal map is radial and sends radius `rho` to `G(rho)`, the
/// distribution function of `|X - center|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMap {
    center: Vec<f64>,
    profile: RadialProfile,
    chi2: Option<ChiSquared>,
}

impl RadialMap {
    pub fn new(center: Vec<f64>, profile: RadialProfile) -> Result<Self> {
        if center.is_empty() {
            return Err(invalid("dimension must be at least 1"));
        }
        let chi2 = match profile {
            RadialProfile::SphericalUniform => None,
            RadialProfile::UniformBall { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("ball radius must be positive"));
                }
                None
            }
            RadialProfile::Gaussian { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid("sigma must be positive"));
                }
                Some(ChiSquared::new(center.len() as f64).map_err(|e| invalid(e.to_string()))?)
            }
        };
        Ok(Self { center, profile, chi2 })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], RadialProfile::SphericalUniform)
    }

    pub fn profile(&self) -> RadialProfile {
        self.profile
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `G(rho) = P(|X - center| <= rho)`.
    pub fn radial_cdf(&self, rho: f64) -> f64 {
        let d = self.center.len() as i32;
        match self.profile {
            RadialProfile::SphericalUniform => rho.min(1.0),
            RadialProfile::UniformBall { radius } => (rho / radius).min(1.0).powi(d),
            RadialProfile::Gaussian { sigma } => self.chi2.as_ref().unwrap().cdf((rho / sigma).powi(2)),
        }
    }

    /// `G^{-1}(r)` for `0 <= r < 1`.
    pub fn radial_quantile(&self, r: f64) -> f64 {
        let d = self.center.len() as f64;
        match self.profile {
            RadialProfile::SphericalUniform => r,
            RadialProfile::UniformBall { radius } => radius * r.powf(1.0 / d),
            RadialProfile::Gaussian { sigma } => {
                if r == 0.0 {
                    0.0
                } else {
                    sigma * self.chi2.as_ref().unwrap().inverse_cdf(r).sqrt()
                }
            }
        }
    }
}

impl CenterOutwardMap for RadialMap {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let v = sub(x, &self.center);
        let rho = norm(&v);
        if rho == 0.0 {
            return vec![0.0; v.len()];
        }
        let s = self.radial_cdf(rho) / rho;
        v.into_iter().map(|c| c * s).collect()
    }

    fn quantile(&self, u: &[f64]) -> Result<Vec<f64>> {
        let r = norm(u);
        if !(r < 1.0) {
            return Err(Error::OutOfDomain { norm: r });
        }
        if r == 0.0 {
            return Ok(self.center.clone());
        }
        let s = self.radial_quantile(r) / r;
        Ok(self.center.iter().zip(u).map(|(c, ui)| c + s * ui).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let maps = [
            RadialMap::identity(3).unwrap(),
            RadialMap::new(vec![1.0, -2.0], RadialProfile::UniformBall { radius: 2.5 }).unwrap(),
            RadialMap::new(vec![0.5, 0.0, 1.0], RadialProfile::Gaussian { sigma: 1.7 }).unwrap(),
            RadialMap::new(vec![0.0, 0.0], RadialProfile::Gaussian { sigma: 1.0 }).unwrap(),
        ];
        for m in &maps {
            let d = m.dim();
            for k in 1..20 {
                let mut u = vec![0.0; d];
                u[0] = k as f64 / 20.0 * 0.8;
                u[d - 1] += 0.1;
                let x = m.quantile(&u).unwrap();
                let back = m.forward(&x);
                for (a, b) in back.iter().zip(&u) {
                    assert!((a - b).abs() < 1e-9, "{:?}", m.profile());
                }
            }
            assert!(m.quantile(&vec![1.0; d]).is_err());
        }
    }

    #[test]
    fn gaussian_plane_closed_form() {
        // In the plane the norm of a standard Gaussian has cdf 1 - exp(-rho^2 / 2).
        let m = RadialMap::new(vec![0.0, 0.0], RadialProfile::Gaussian { sigma: 1.0 }).unwrap();
        for rho in [0.1, 0.5, 1.0, 2.0, 3.5] {
            assert!((m.radial_cdf(rho) - (1.0 - (-rho * rho / 2.0f64).exp())).abs() < 1e-12);
        }
        for r in [0.1, 0.5, 0.9, 0.99] {
            assert!((m.radial_quantile(r) - (-2.0 * (1.0f64 - r).ln()).sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn uniform_disc_level_radius() {
        let m = RadialMap::new(vec![0.0, 0.0], RadialProfile::UniformBall { radius: 2.0 }).unwrap();
        assert!((m.radial_quantile(0.25) - 1.0).abs() < 1e-15);
    }
}
