//! Synthetic distributions with known densities, supports and, where
//! available, closed-form center-outward maps.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::{convex_hull_2d, in_convex_polygon, polygon_area, polygon_perimeter_sample};
use crate::ot::{Dataset, HalfSpace, SupportHint};
use crate::points::{dist, Points};
use crate::potential::{RadialMap, RadialProfile};
use crate::reference::{ball_volume, random_direction, sphere_area, sphere_directions, spherical_uniform_density};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    UniformBall { center: Vec<f64>, radius: f64 },
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Uniform on the convex hull of planar vertices.
    UniformConvexPolytope { vertices: Vec<[f64; 2]> },
    Gaussian { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
    SphericalUniform { dim: usize },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub generator: GeneratorSpec,
}

impl GeneratorSpec {
    pub fn standard_gaussian(dim: usize) -> Self {
        let covariance = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        GeneratorSpec::Gaussian { mean: vec![0.0; dim], covariance }
    }

    pub fn unit_square() -> Self {
        GeneratorSpec::UniformBox { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] }
    }

    pub fn unit_disc() -> Self {
        GeneratorSpec::UniformBall { center: vec![0.0, 0.0], radius: 1.0 }
    }

    /// Uniform on `[0,2]x[0,1] ∪ [0,1]x[1,2]`, a nonconvex support.
    pub fn l_shape() -> Self {
        GeneratorSpec::Mixture {
            components: vec![
                MixtureComponent { weight: 2.0, generator: GeneratorSpec::UniformBox { lower: vec![0.0, 0.0], upper: vec![2.0, 1.0] } },
                MixtureComponent { weight: 1.0, generator: GeneratorSpec::UniformBox { lower: vec![0.0, 1.0], upper: vec![1.0, 2.0] } },
            ],
        }
    }
}

/// A validated generator.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    dim: usize,
    model: Model,
}

#[derive(Debug, Clone)]
enum Model {
    Ball { center: Vec<f64>, radius: f64, density: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64>, density: f64 },
    Polygon { hull: Vec<[f64; 2]>, lower: [f64; 2], upper: [f64; 2], density: f64 },
    Gaussian { mean: DVector<f64>, chol: DMatrix<f64>, log_norm: f64 },
    SphericalUniform,
    Mixture { cumulative: Vec<f64>, weights: Vec<f64>, parts: Vec<Generator> },
}

impl Generator {
    pub fn new(spec: GeneratorSpec) -> Result<Self> {
        let (dim, model) = match &spec {
            GeneratorSpec::UniformBall { center, radius } => {
                let d = center.len();
                check_dim(d)?;
                if !(*radius > 0.0 && radius.is_finite()) || !finite(center) {
                    return Err(invalid("uniform-ball needs a finite center and a positive radius"));
                }
                let density = 1.0 / (ball_volume(d)? * radius.powi(d as i32));
                (d, Model::Ball { center: center.clone(), radius: *radius, density })
            }
            GeneratorSpec::UniformBox { lower, upper } => {
                let d = lower.len();
                check_dim(d)?;
                if upper.len() != d || !finite(lower) || !finite(upper) || lower.iter().zip(upper).any(|(a, b)| !(a < b)) {
                    return Err(invalid("uniform-box needs finite bounds with lower < upper in every coordinate"));
                }
                let volume: f64 = lower.iter().zip(upper).map(|(a, b)| b - a).product();
                (d, Model::Box { lower: lower.clone(), upper: upper.clone(), density: 1.0 / volume })
            }
            GeneratorSpec::UniformConvexPolytope { vertices } => {
                if vertices.iter().any(|v| !finite(v)) {
                    return Err(invalid("polytope vertices must be finite"));
                }
                let hull = convex_hull_2d(vertices);
                let area = if hull.len() >= 3 { polygon_area(&hull) } else { 0.0 };
                if !(area > 0.0) {
                    return Err(invalid("polytope vertices must span a region of positive area"));
                }
                let lower = [hull.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), hull.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min)];
                let upper = [hull.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max), hull.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)];
                (2, Model::Polygon { hull, lower, upper, density: 1.0 / area })
            }
            GeneratorSpec::Gaussian { mean, covariance } => {
                let d = mean.len();
                check_dim(d)?;
                if covariance.len() != d || covariance.iter().any(|r| r.len() != d || !finite(r)) || !finite(mean) {
                    return Err(invalid("gaussian needs a finite mean and a d x d covariance"));
                }
                let sym = (0..d).all(|i| (0..d).all(|j| covariance[i][j] == covariance[j][i]));
                let m = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
                let chol = match m.cholesky() {
                    Some(c) if sym => c.l(),
                    _ => return Err(invalid("covariance must be symmetric positive definite")),
                };
                let log_det: f64 = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let log_norm = -0.5 * (d as f64 * (2.0 * PI).ln() + log_det);
                (d, Model::Gaussian { mean: DVector::from_column_slice(mean), chol, log_norm })
            }
            GeneratorSpec::SphericalUniform { dim } => {
                check_dim(*dim)?;
                (*dim, Model::SphericalUniform)
            }
            GeneratorSpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(invalid("mixture needs at least one component"));
                }
                let parts = components.iter().map(|c| Generator::new(c.generator.clone())).collect::<Result<Vec<_>>>()?;
                let d = parts[0].dim;
                if parts.iter().any(|p| p.dim != d) {
                    return Err(invalid("mixture components must share one dimension"));
                }
                if components.iter().any(|c| !(c.weight > 0.0 && c.weight.is_finite())) {
                    return Err(invalid("mixture weights must be positive"));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let weights: Vec<f64> = components.iter().map(|c| c.weight / total).collect();
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect();
                (d, Model::Mixture { cumulative, weights, parts })
            }
        };
        Ok(Self { spec, dim, model })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n` i.i.d. draws, with the support hint attached when the support is
    /// convex and known.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(invalid("sample size must be at least 1"));
        }
        let mut rng = crate::rng::rng(seed);
        let mut coords = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            coords.extend(self.draw(&mut rng));
        }
        let data = Dataset::new(Points::new(self.dim, coords)?)?;
        Ok(match self.support() {
            Some(h) => data.with_support(h),
            None => data,
        })
    }

    fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        match &self.model {
            Model::Ball { center, radius, .. } => {
                let s = random_direction(rng, self.dim);
                let r = radius * rng.random::<f64>().powf(1.0 / self.dim as f64);
                center.iter().zip(s).map(|(c, v)| c + r * v).collect()
            }
            Model::Box { lower, upper, .. } => lower.iter().zip(upper).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect(),
            Model::Polygon { hull, lower, upper, .. } => loop {
                let q = [lower[0] + (upper[0] - lower[0]) * rng.random::<f64>(), lower[1] + (upper[1] - lower[1]) * rng.random::<f64>()];
                if in_convex_polygon(hull, q, 0.0) {
                    break q.to_vec();
                }
            },
            Model::Gaussian { mean, chol, .. } => {
                let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                (mean + chol * z).iter().copied().collect()
            }
            Model::SphericalUniform => {
                let s = random_direction(rng, self.dim);
                let r: f64 = loop {
                    let r: f64 = rng.random();
                    if r > 0.0 {
                        break r;
                    }
                };
                s.into_iter().map(|v| v * r).collect()
            }
            Model::Mixture { cumulative, parts, .. } => {
                let t: f64 = rng.random();
                let k = cumulative.iter().position(|&c| t < c).unwrap_or(parts.len() - 1);
                parts[k].draw(rng)
            }
        }
    }

    /// Lebesgue density at `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Ball { center, radius, density } => {
                if dist(center, x) <= *radius {
                    *density
                } else {
                    0.0
                }
            }
            Model::Box { lower, upper, density } => {
                if x.iter().zip(lower.iter().zip(upper)).all(|(v, (a, b))| a <= v && v <= b) {
                    *density
                } else {
                    0.0
                }
            }
            Model::Polygon { hull, density, .. } => {
                if in_convex_polygon(hull, [x[0], x[1]], 0.0) {
                    *density
                } else {
                    0.0
                }
            }
            Model::Gaussian { mean, chol, log_norm } => {
                let v = DVector::from_column_slice(x) - mean;
                match chol.solve_lower_triangular(&v) {
                    Some(y) => (log_norm - 0.5 * y.norm_squared()).exp(),
                    None => 0.0,
                }
            }
            Model::SphericalUniform => spherical_uniform_density(x),
            Model::Mixture { weights, parts, .. } => weights.iter().zip(parts).map(|(w, p)| w * p.density(x)).sum(),
        }
    }

    /// The support when it is convex and known in closed form.
    pub fn support(&self) -> Option<SupportHint> {
        match &self.model {
            Model::Ball { center, radius, .. } => Some(SupportHint::Ball { center: center.clone(), radius: *radius }),
            Model::Box { lower, upper, .. } => {
                let mut halfspaces = Vec::with_capacity(2 * self.dim);
                for k in 0..self.dim {
                    let mut e = vec![0.0; self.dim];
                    e[k] = 1.0;
                    halfspaces.push(HalfSpace { normal: e.clone(), offset: upper[k] });
                    e[k] = -1.0;
                    halfspaces.push(HalfSpace { normal: e, offset: -lower[k] });
                }
                Some(SupportHint::HalfSpaces { halfspaces })
            }
            Model::Polygon { hull, .. } => {
                let n = hull.len();
                let halfspaces = (0..n)
                    .map(|k| {
                        let (a, b) = (hull[k], hull[(k + 1) % n]);
                        // Outward normal of a counter-clockwise edge.
                        let normal = vec![b[1] - a[1], a[0] - b[0]];
                        let offset = normal[0] * a[0] + normal[1] * a[1];
                        HalfSpace { normal, offset }
                    })
                    .collect();
                Some(SupportHint::HalfSpaces { halfspaces })
            }
            Model::Gaussian { .. } => Some(SupportHint::Unbounded),
            Model::SphericalUniform => Some(SupportHint::Ball { center: vec![0.0; self.dim], radius: 1.0 }),
            Model::Mixture { .. } => None,
        }
    }

    /// Volume of the support for the uniform generators.
    pub fn support_volume(&self) -> Option<f64> {
        match &self.model {
            Model::Ball { density, .. } | Model::Box { density, .. } | Model::Polygon { density, .. } => Some(1.0 / density),
            _ => None,
        }
    }

    /// Closed-form center-outward map for spherically symmetric laws.
    pub fn analytic_map(&self) -> Option<RadialMap> {
        match &self.model {
            Model::Ball { center, radius, .. } => RadialMap::new(center.clone(), RadialProfile::UniformBall { radius: *radius }).ok(),
            Model::SphericalUniform => RadialMap::identity(self.dim).ok(),
            Model::Gaussian { .. } => {
                let GeneratorSpec::Gaussian { mean, covariance } = &self.spec else { unreachable!() };
                let s = covariance[0][0];
                let isotropic = (0..self.dim).all(|i| (0..self.dim).all(|j| covariance[i][j] == if i == j { s } else { 0.0 }));
                if isotropic {
                    RadialMap::new(mean.clone(), RadialProfile::Gaussian { sigma: s.sqrt() }).ok()
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    /// Bounds `(lambda, Lambda)` of the density on the quantile region of
    /// level `r`, where they follow in closed form. `Lambda` may be infinite.
    pub fn density_bounds(&self, r: f64) -> Option<(f64, f64)> {
        if !(0.0 < r && r < 1.0) {
            return None;
        }
        match &self.model {
            Model::Ball { density, .. } | Model::Box { density, .. } | Model::Polygon { density, .. } => Some((*density, *density)),
            Model::SphericalUniform => {
                let a = sphere_area(self.dim).ok()?;
                let hi = if self.dim == 1 { 1.0 / a } else { f64::INFINITY };
                Some((1.0 / (a * r.powi(self.dim as i32 - 1)), hi))
            }
            Model::Gaussian { .. } => {
                let map = self.analytic_map()?;
                let rho = map.radial_quantile(r);
                let mut edge = map.center().to_vec();
                edge[0] += rho;
                Some((self.density(&edge), self.density(map.center())))
            }
            Model::Mixture { .. } => None,
        }
    }

    /// `m` points on the boundary of a bounded convex support.
    pub fn boundary_sample(&self, m: usize, seed: u64) -> Result<Points> {
        let d = self.dim;
        match &self.model {
            Model::Ball { center, radius, .. } => {
                let dirs = sphere_directions(d, m, seed)?;
                Ok(dirs.map(|s| center.iter().zip(s).map(|(c, v)| c + radius * v).collect()))
            }
            Model::SphericalUniform => sphere_directions(d, m, seed),
            Model::Box { lower, upper, .. } if d == 2 => {
                let poly = [[lower[0], lower[1]], [upper[0], lower[1]], [upper[0], upper[1]], [lower[0], upper[1]]];
                Points::from_rows(2, &polygon_perimeter_sample(&poly, m))
            }
            Model::Box { lower, upper, .. } => {
                let mut rng = crate::rng::rng(seed);
                let mut out = Points::empty(d);
                for _ in 0..m {
                    let mut p: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
                    let k = rng.random_range(0..d);
                    p[k] = if rng.random::<bool>() { upper[k] } else { lower[k] };
                    out.push(&p);
                }
                Ok(out)
            }
            Model::Polygon { hull, .. } => Points::from_rows(2, &polygon_perimeter_sample(hull, m)),
            _ => Err(Error::Unsupported("boundary sampling needs a bounded convex support".into())),
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    Ok(())
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|c| c.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn integrate_2d(g: &Generator, lo: f64, hi: f64) -> f64 {
        integrate(|x| integrate(|y| g.density(&[x, y]), lo, hi, 32, 48), lo, hi, 32, 48)
    }

    #[test]
    fn square_sample_lies_in_box_with_centered_mean() {
        let g = Generator::new(GeneratorSpec::unit_square()).unwrap();
        let data = g.sample(10_000, 1).unwrap();
        assert!(data.points().iter().all(|p| p.iter().all(|&c| (0.0..=1.0).contains(&c))));
        for k in 0..2 {
            let mean = data.points().iter().map(|p| p[k]).sum::<f64>() / 10_000.0;
            assert!((mean - 0.5).abs() < 0.01);
        }
        assert!(data.support_hint().unwrap().contains(&[0.5, 0.5]));
    }

    #[test]
    fn spherical_uniform_matches_the_reference_sampler() {
        let g = Generator::new(GeneratorSpec::SphericalUniform { dim: 2 }).unwrap();
        let a = g.sample(50, 9).unwrap();
        let b = crate::reference::sample_spherical_uniform(50, 2, 9).unwrap();
        assert_eq!(a.points(), &b);
    }

    #[test]
    fn gaussian_norm_follows_chi_two() {
        use statrs::distribution::{ContinuousCDF, ChiSquared};
        let g = Generator::new(GeneratorSpec::standard_gaussian(2)).unwrap();
        let data = g.sample(10_000, 4).unwrap();
        let mut r: Vec<f64> = data.points().iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect();
        r.sort_by(f64::total_cmp);
        let chi = ChiSquared::new(2.0).unwrap();
        let n = r.len() as f64;
        let ks = r.iter().enumerate().map(|(k, &v)| {
            let c = chi.cdf(v);
            (c - k as f64 / n).abs().max(((k + 1) as f64 / n - c).abs())
        });
        assert!(ks.fold(0.0, f64::max) <= 0.02);
    }

    #[test]
    fn densities_integrate_to_one() {
        let cases = [
            (GeneratorSpec::unit_disc(), -1.5, 1.5, 2e-3),
            (GeneratorSpec::unit_square(), -0.5, 1.5, 2e-3),
            (GeneratorSpec::UniformConvexPolytope { vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]] }, -0.5, 1.5, 5e-3),
            (GeneratorSpec::Gaussian { mean: vec![0.3, -0.2], covariance: vec![vec![1.0, 0.4], vec![0.4, 0.5]] }, -8.0, 8.0, 1e-9),
            (GeneratorSpec::l_shape(), -0.5, 2.5, 5e-3),
        ];
        for (spec, lo, hi, tol) in cases {
            let g = Generator::new(spec).unwrap();
            let mass = integrate_2d(&g, lo, hi);
            assert!((mass - 1.0).abs() < tol, "{:?}: {mass}", g.spec());
        }
        let g1 = Generator::new(GeneratorSpec::UniformBox { lower: vec![-1.0], upper: vec![1.0] }).unwrap();
        assert!((integrate(|x| g1.density(&[x]), -1.0, 1.0, 32, 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_maps_exist_for_radial_laws() {
        assert!(Generator::new(GeneratorSpec::standard_gaussian(3)).unwrap().analytic_map().is_some());
        assert!(Generator::new(GeneratorSpec::unit_disc()).unwrap().analytic_map().is_some());
        assert!(Generator::new(GeneratorSpec::unit_square()).unwrap().analytic_map().is_none());
        let aniso = GeneratorSpec::Gaussian { mean: vec![0.0; 2], covariance: vec![vec![2.0, 0.0], vec![0.0, 1.0]] };
        assert!(Generator::new(aniso).unwrap().analytic_map().is_none());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = [
            GeneratorSpec::UniformBall { center: vec![0.0], radius: 0.0 },
            GeneratorSpec::UniformBox { lower: vec![0.0, 1.0], upper: vec![1.0, 1.0] },
            GeneratorSpec::Gaussian { mean: vec![0.0; 2], covariance: vec![vec![1.0, 2.0], vec![2.0, 1.0]] },
            GeneratorSpec::UniformConvexPolytope { vertices: vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]] },
            GeneratorSpec::Mixture { components: vec![] },
        ];
        for spec in bad {
            assert!(Generator::new(spec).is_err());
        }
        let json = r#"{"kind": "uniform-ball", "center": [0, 0], "radius": 1, "extra": 1}"#;
        assert!(serde_json::from_str::<GeneratorSpec>(json).is_err());
    }

    #[test]
    fn square_boundary_sample_lies_on_the_edges() {
        let g = Generator::new(GeneratorSpec::unit_square()).unwrap();
        let b = g.boundary_sample(400, 0).unwrap();
        let hint = g.support().unwrap();
        assert!(b.iter().all(|p| hint.depth(p).abs() < 1e-15));
    }
}
