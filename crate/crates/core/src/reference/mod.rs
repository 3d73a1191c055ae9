//! The spherical uniform reference measure on the open unit ball.
//!
//! `U_d` draws a uniform direction on the sphere and an independent
//! `Uniform(0, 1)` distance to the origin. Its Lebesgue density is
//! `1 / (a_d |x|^(d-1))` on the punctured ball, where `a_d` is the area of the
//! unit sphere; the density is set to zero at the origin itself.

mod directions;
mod grid;

pub use directions::sphere_directions;
pub use grid::{GridFile, GridShape, SphericalGrid};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::points::{norm, Points};
use crate::quadrature;

/// Area `a_d = 2 pi^(d/2) / Gamma(d/2)` of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    // a_1 = 2, a_2 = 2 pi, a_{d+2} = 2 pi a_d / d.
    let mut a = if d % 2 == 1 { 2.0 } else { 2.0 * PI };
    let mut k = if d % 2 == 1 { 1 } else { 2 };
    while k < d {
        a *= 2.0 * PI / k as f64;
        k += 2;
    }
    Ok(a)
}

/// Volume `c_d = pi^(d/2) / Gamma(1 + d/2)` of the unit ball in R^d.
pub fn ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let half = d as f64 / 2.0;
    Ok(PI.powf(half) / statrs::function::gamma::gamma(1.0 + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstants {
    pub dim: usize,
    pub sphere_area: f64,
    pub ball_volume: f64,
}

impl ReferenceConstants {
    pub fn new(dim: usize) -> Result<Self> {
        Ok(Self { dim, sphere_area: sphere_area(dim)?, ball_volume: ball_volume(dim)? })
    }
}

/// Density of `U_d` at `x`; zero at the origin and outside the open ball.
pub fn spherical_uniform_density(x: &[f64]) -> f64 {
    let d = x.len();
    let r = norm(x);
    if r == 0.0 || r >= 1.0 || d == 0 {
        return 0.0;
    }
    let a = sphere_area(d).expect("d >= 1");
    1.0 / (a * r.powi(d as i32 - 1))
}

/// Draws a uniformly distributed unit vector.
pub fn random_direction<R: rand::Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-300 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// `n` i.i.d. draws from `U_d`.
pub fn sample_spherical_uniform(n: usize, d: usize, seed: u64) -> Result<Points> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let mut rng = crate::rng::rng(seed);
    let mut out = Points::empty(d);
    for _ in 0..n {
        let s = random_direction(&mut rng, d);
        // Open interval (0, 1).
        let r: f64 = loop {
            let r: f64 = rng.random();
            if r > 0.0 {
                break r;
            }
        };
        out.push(&s.iter().map(|c| c * r).collect::<Vec<_>>());
    }
    Ok(out)
}

const GL_POINTS: usize = 32;

/// Area of the unit sphere computed by quadrature in hyperspherical
/// coordinates, `2 pi * prod_{k=1}^{d-2} int_0^pi sin^k`.
fn sphere_area_by_quadrature(d: usize) -> f64 {
    match d {
        1 => 2.0,
        _ => {
            let mut a = 2.0 * PI;
            for k in 1..=d - 2 {
                a *= quadrature::integrate(|t| t.sin().powi(k as i32), 0.0, PI, GL_POINTS, 4);
            }
            a
        }
    }
}

/// Quadrature estimate of `int_{r B_d} |y|^(1-d) dy`.
///
/// The closed form is `a_d * r`; this routine integrates shell by shell with
/// the shell area itself obtained by angular quadrature, so it serves as an
/// independent check on [`sphere_area`].
pub fn coarea_radial_integral(r: f64, d: usize) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(invalid(format!("radius {r} outside (0, 1]")));
    }
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if d == 1 {
        return Ok(quadrature::integrate(|y: f64| y.abs().powi(0), -r, r, GL_POINTS, 2));
    }
    let area = sphere_area_by_quadrature(d);
    let e = (d - 1) as i32;
    // Shell of radius s has measure s^(d-1) * area and integrand s^(1-d).
    Ok(quadrature::integrate(|s| s.powi(-e) * s.powi(e) * area, 0.0, r, GL_POINTS, 4))
}

/// Quadrature estimate of the total mass `int_{B_d} u_d`.
pub fn density_mass(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if d == 1 {
        return Ok(quadrature::integrate(|y| spherical_uniform_density(&[y]), -1.0, 1.0, GL_POINTS, 8));
    }
    let area = sphere_area_by_quadrature(d);
    let e = (d - 1) as i32;
    let radial = |s: f64| {
        let mut p = vec![0.0; d];
        p[0] = s;
        spherical_uniform_density(&p) * s.powi(e) * area
    };
    Ok(quadrature::integrate(radial, 0.0, 1.0, GL_POINTS, 8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_area_known_values() {
        assert_relative_eq!(sphere_area(1).unwrap(), 2.0);
        assert_relative_eq!(sphere_area(2).unwrap(), 2.0 * PI);
        assert_relative_eq!(sphere_area(3).unwrap(), 4.0 * PI, max_relative = 1e-15);
        assert!(sphere_area(0).is_err());
        assert!(ball_volume(0).is_err());
    }

    #[test]
    fn area_is_dimension_times_volume() {
        for d in 1..=10 {
            let a = sphere_area(d).unwrap();
            let c = ball_volume(d).unwrap();
            assert_relative_eq!(a, d as f64 * c, max_relative = 1e-12);
            let rc = ReferenceConstants::new(d).unwrap();
            assert_relative_eq!(rc.sphere_area, rc.dim as f64 * rc.ball_volume, max_relative = 1e-12);
        }
    }

    #[test]
    fn density_values() {
        assert_relative_eq!(spherical_uniform_density(&[0.5, 0.0]), 1.0 / PI, max_relative = 1e-14);
        assert_relative_eq!(spherical_uniform_density(&[0.0, -0.5]), 1.0 / PI, max_relative = 1e-14);
        assert_relative_eq!(spherical_uniform_density(&[0.5]), 0.5);
        assert_relative_eq!(spherical_uniform_density(&[-0.5]), 0.5);
        assert_eq!(spherical_uniform_density(&[1.5, 0.0]), 0.0);
        assert_eq!(spherical_uniform_density(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(spherical_uniform_density(&[0.6, 0.8]), 0.0);
    }

    #[test]
    fn density_integrates_to_one() {
        for d in 1..=4 {
            assert!((density_mass(d).unwrap() - 1.0).abs() < 1e-6, "d={d}");
        }
    }

    #[test]
    fn coarea_examples() {
        assert_relative_eq!(coarea_radial_integral(0.3, 3).unwrap(), 0.3 * 4.0 * PI, max_relative = 1e-6);
        assert_relative_eq!(coarea_radial_integral(1.0, 2).unwrap(), 2.0 * PI, max_relative = 1e-6);
        assert_relative_eq!(coarea_radial_integral(0.5, 1).unwrap(), 1.0, max_relative = 1e-12);
        assert!(coarea_radial_integral(0.0, 2).is_err());
        assert!(coarea_radial_integral(1.2, 2).is_err());
    }

    #[test]
    fn coarea_matches_closed_form() {
        for d in 1..=6 {
            for k in 1..=10 {
                let r = k as f64 / 10.0;
                let q = coarea_radial_integral(r, d).unwrap();
                let exact = sphere_area(d).unwrap() * r;
                assert!(((q - exact) / exact).abs() < 1e-6, "d={d} r={r}");
            }
        }
    }

    #[test]
    fn sampler_moments() {
        let x = sample_spherical_uniform(100_000, 2, 11).unwrap();
        let mean_r = x.iter().map(norm).sum::<f64>() / x.len() as f64;
        assert!((mean_r - 0.5).abs() < 0.01);
        let mx = x.iter().map(|p| p[0]).sum::<f64>() / x.len() as f64;
        let my = x.iter().map(|p| p[1]).sum::<f64>() / x.len() as f64;
        assert!(mx.abs() < 0.01 && my.abs() < 0.01);
        assert!(x.iter().all(|p| norm(p) < 1.0));

        let y = sample_spherical_uniform(100_000, 3, 12).unwrap();
        let frac = y.iter().filter(|p| norm(p) <= 0.25).count() as f64 / y.len() as f64;
        assert!((frac - 0.25).abs() < 0.01);
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_spherical_uniform(50, 4, 9).unwrap();
        let b = sample_spherical_uniform(50, 4, 9).unwrap();
        assert_eq!(a, b);
        assert!(sample_spherical_uniform(0, 2, 1).is_err());
    }
}
