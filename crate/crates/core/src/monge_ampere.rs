//! Monte Carlo estimates of the Monge-Ampère measures of the potentials.
//!
//! For a region `A` in sample space, `mu_phi(A)` is the volume of the
//! subdifferential image `F(A)` and equals `a_d int_A p |F|^(d-1)`. For a
//! region `B` of the ball, `mu_psi(B)` is the volume of `Q(B)` and equals
//! `(1/a_d) int_B 1 / (p(Q(y)) |y|^(d-1)) dy`.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ot::Dataset;
use crate::points::{dist, norm, Points};
use crate::potential::{CenterOutwardMap, Potentials};
use crate::reference::{ball_volume, random_direction, sphere_area};
use crate::rng::Rng;

/// A region of R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
    /// Union of closed balls of a common radius around the points.
    Points { points: Vec<Vec<f64>>, radius: f64 },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } | Region::Annulus { center, .. } => center.len(),
            Region::Box { lower, .. } => lower.len(),
            Region::Points { points, .. } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(invalid("region dimension must be at least 1"));
        }
        let ok = match self {
            Region::Ball { radius, .. } => *radius > 0.0 && radius.is_finite(),
            Region::Box { lower, upper } => upper.len() == d && lower.iter().zip(upper).all(|(a, b)| a < b && b.is_finite() && a.is_finite()),
            Region::Annulus { inner, outer, .. } => 0.0 <= *inner && inner < outer && outer.is_finite(),
            Region::Points { points, radius } => points.iter().all(|p| p.len() == d && p.iter().all(|c| c.is_finite())) && *radius >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("malformed region {self:?}")))
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => dist(center, x) <= *radius,
            Region::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).all(|(v, (a, b))| a <= v && v <= b),
            Region::Annulus { center, inner, outer } => {
                let r = dist(center, x);
                *inner <= r && r <= *outer
            }
            Region::Points { points, radius } => points.iter().any(|p| dist(p, x) <= *radius),
        }
    }

    /// Lebesgue volume, when it has a closed form.
    pub fn volume(&self) -> Option<f64> {
        let d = self.dim();
        let c = ball_volume(d).ok()?;
        match self {
            Region::Ball { radius, .. } => Some(c * radius.powi(d as i32)),
            Region::Box { lower, upper } => Some(lower.iter().zip(upper).map(|(a, b)| b - a).product()),
            Region::Annulus { inner, outer, .. } => Some(c * (outer.powi(d as i32) - inner.powi(d as i32))),
            Region::Points { points, radius } if *radius == 0.0 || points.len() == 1 => Some(c * radius.powi(d as i32)),
            Region::Points { .. } => None,
        }
    }

    /// Distance from `x` to the complement of the region.
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self {
            Region::Ball { center, radius } => radius - dist(center, x),
            Region::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).map(|(v, (a, b))| (v - a).min(b - v)).fold(f64::INFINITY, f64::min),
            Region::Annulus { center, inner, outer } => {
                let r = dist(center, x);
                (outer - r).min(r - inner)
            }
            Region::Points { points, radius } => points.iter().map(|p| radius - dist(p, x)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Smallest and largest distance from the origin to a point of the
    /// region (the smallest is zero when the region contains the origin).
    pub fn norm_range(&self) -> (f64, f64) {
        match self {
            Region::Ball { center, radius } => ((norm(center) - radius).max(0.0), norm(center) + radius),
            Region::Box { lower, upper } => {
                let near: f64 = lower.iter().zip(upper).map(|(a, b)| (a.max(0.0) - b.min(0.0)).max(0.0).powi(2)).sum();
                let far: f64 = lower.iter().zip(upper).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum();
                (near.sqrt(), far.sqrt())
            }
            Region::Annulus { center, inner, outer } => {
                let c = norm(center);
                let near = if c <= *inner { inner - c } else if c <= *outer { 0.0 } else { c - outer };
                (near, c + outer)
            }
            Region::Points { points, radius } => (
                points.iter().map(|p| (norm(p) - radius).max(0.0)).fold(f64::INFINITY, f64::min),
                points.iter().map(|p| norm(p) + radius).fold(0.0, f64::max),
            ),
        }
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Ball { center, radius: r } | Region::Annulus { center, outer: r, .. } => {
                (center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())
            }
            Region::Box { lower, upper } => (lower.clone(), upper.clone()),
            Region::Points { points, radius } => {
                let d = self.dim();
                let lo = (0..d).map(|k| points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min) - radius).collect();
                let hi = (0..d).map(|k| points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max) + radius).collect();
                (lo, hi)
            }
        }
    }

    /// A uniform draw from the region, or `None` for point unions, which
    /// are integrated through their bounding box instead.
    fn draw(&self, rng: &mut Rng) -> Option<Vec<f64>> {
        let d = self.dim();
        match self {
            Region::Ball { center, radius } => Some(shell_draw(rng, center, 0.0, *radius, d)),
            Region::Annulus { center, inner, outer } => Some(shell_draw(rng, center, *inner, *outer, d)),
            Region::Box { lower, upper } => Some(box_draw(rng, lower, upper)),
            Region::Points { .. } => None,
        }
    }
}

fn shell_draw(rng: &mut Rng, center: &[f64], inner: f64, outer: f64, d: usize) -> Vec<f64> {
    let s = random_direction(rng, d);
    let (a, b) = (inner.powi(d as i32), outer.powi(d as i32));
    let r = (a + (b - a) * rng.random::<f64>()).powf(1.0 / d as f64);
    center.iter().zip(s).map(|(c, v)| c + r * v).collect()
}

fn box_draw(rng: &mut Rng, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower.iter().zip(upper).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()
}

/// Running mean and standard error.
#[derive(Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum2 += v * v;
    }

    /// `(scale * mean, scale * standard error)`.
    fn estimate(&self, scale: f64) -> (f64, f64) {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 { ((self.sum2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        (scale * mean, scale * (var / n).sqrt())
    }
}

/// `int_region h` by Monte Carlo: uniform draws in the region, or
/// indicator-weighted draws in the bounding box for point unions.
fn integrate_region(region: &Region, n_mc: usize, rng: &mut Rng, mut h: impl FnMut(&[f64]) -> Result<f64>) -> Result<(f64, f64)> {
    if region.volume() == Some(0.0) {
        return Ok((0.0, 0.0));
    }
    let mut m = Moments::default();
    let scale = match region.volume() {
        Some(v) => {
            for _ in 0..n_mc {
                let x = region.draw(rng).expect("regions with a volume can be drawn from");
                m.push(h(&x)?);
            }
            v
        }
        None => {
            let (lo, hi) = region.bounding_box();
            for _ in 0..n_mc {
                let x = box_draw(rng, &lo, &hi);
                m.push(if region.contains(&x) { h(&x)? } else { 0.0 });
            }
            lo.iter().zip(&hi).map(|(a, b)| b - a).product()
        }
    };
    Ok(m.estimate(scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MAEstimate {
    pub region: Region,
    /// Volume of the subdifferential image.
    pub value_subdiff: f64,
    pub subdiff_std_error: f64,
    /// Estimate through the density formula.
    pub value_formula: f64,
    pub std_error: f64,
    pub mc_samples: usize,
    /// The origin singularity was removed by the radial substitution.
    pub radial_substitution: bool,
    pub warnings: Vec<String>,
}

fn check_inputs(region: &Region, map: &dyn CenterOutwardMap, n_mc: usize) -> Result<usize> {
    region.validate()?;
    let d = map.dim();
    if region.dim() != d {
        return Err(invalid("region and map dimensions differ"));
    }
    if n_mc < 2 {
        return Err(invalid("need at least two Monte Carlo samples"));
    }
    Ok(d)
}

/// `mu_phi(A)` through `a_d int_A p |F|^(d-1)` and through the volume of
/// `F(A)`, the latter by rejection sampling `u ~ Uniform(B_d)` and accepting
/// when `Q(u)` falls in `A`.
pub fn ma_forward_density(
    region: &Region,
    density: &dyn Fn(&[f64]) -> f64,
    map: &dyn CenterOutwardMap,
    n_mc: usize,
    seed: u64,
) -> Result<MAEstimate> {
    let d = check_inputs(region, map, n_mc)?;
    let a = sphere_area(d)?;
    let mut rng = crate::rng::rng(seed);
    let mut outside = 0usize;
    let (value_formula, std_error) = integrate_region(region, n_mc, &mut rng, |x| {
        let p = density(x);
        if p == 0.0 {
            outside += 1;
        }
        Ok(a * p * norm(&map.forward(x)).powi(d as i32 - 1))
    })?;
    let mut warnings = Vec::new();
    if outside > 0 {
        warnings.push(format!("density vanishes at {outside} of {n_mc} region samples; the region leaves the support"));
    }
    let (value_subdiff, subdiff_std_error) = ball_image_volume(d, n_mc, &mut rng, |u| Ok(region.contains(&map.quantile(u)?)))?;
    Ok(MAEstimate { region: region.clone(), value_subdiff, subdiff_std_error, value_formula, std_error, mc_samples: n_mc, radial_substitution: false, warnings })
}

/// `c_d` times the fraction of `u ~ Uniform(B_d)` accepted by `accept`.
fn ball_image_volume(d: usize, n_mc: usize, rng: &mut Rng, mut accept: impl FnMut(&[f64]) -> Result<bool>) -> Result<(f64, f64)> {
    let mut m = Moments::default();
    let origin = vec![0.0; d];
    for _ in 0..n_mc {
        let mut u = shell_draw(rng, &origin, 0.0, 1.0, d);
        if norm(&u) >= 1.0 {
            u.iter_mut().for_each(|c| *c *= 1.0 - 1e-15);
        }
        m.push(if accept(&u)? { 1.0 } else { 0.0 });
    }
    Ok(m.estimate(ball_volume(d)?))
}

/// `mu_psi(B)` through `(1/a_d) int_B 1/(p(Q(y)) |y|^(d-1)) dy` and through
/// the volume of `Q(B)`. The latter samples the bounding box of the images
/// of the formula draws, enlarged by 5% per side, and accepts when `F(x)`
/// falls in `B`.
///
/// `B` must stay inside the open ball. A region touching the origin needs
/// `allow_singular`; the formula then integrates in polar coordinates,
/// where `|y|^(d-1)` cancels against the Jacobian.
pub fn ma_backward_density(
    region: &Region,
    density: &dyn Fn(&[f64]) -> f64,
    map: &dyn CenterOutwardMap,
    n_mc: usize,
    seed: u64,
    allow_singular: bool,
) -> Result<MAEstimate> {
    let d = check_inputs(region, map, n_mc)?;
    let (near, far) = region.norm_range();
    if far >= 1.0 {
        return Err(invalid("region must lie inside the open unit ball"));
    }
    let singular = near <= 0.0;
    if singular && !allow_singular {
        return Err(invalid("region touches the origin; set allow_singular to use the radial substitution"));
    }
    let a = sphere_area(d)?;
    let mut rng = crate::rng::rng(seed);
    let (mut lo, mut hi) = (vec![f64::INFINITY; d], vec![f64::NEG_INFINITY; d]);
    let mut weight = |y: &[f64]| -> Result<f64> {
        let q = map.quantile(y)?;
        for k in 0..d {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
        let p = density(&q);
        if !(p > 0.0) {
            return Err(Error::Numeric(format!("density vanishes at the quantile {q:?}")));
        }
        Ok(1.0 / p)
    };
    let (value_formula, std_error) = if singular {
        // y = r s with r ~ Uniform(0, far) and s uniform on the sphere.
        let mut m = Moments::default();
        for _ in 0..n_mc {
            let s = random_direction(&mut rng, d);
            let r = far * rng.random::<f64>();
            let y: Vec<f64> = s.iter().map(|c| c * r).collect();
            m.push(if region.contains(&y) { weight(&y)? } else { 0.0 });
        }
        m.estimate(far)
    } else {
        let (v, se) = integrate_region(region, n_mc, &mut rng, |y| Ok(weight(y)? / norm(y).powi(d as i32 - 1)))?;
        (v / a, se / a)
    };
    let mut warnings = Vec::new();
    let (value_subdiff, subdiff_std_error) = if lo[0].is_finite() {
        for k in 0..d {
            let pad = 0.05 * (hi[k] - lo[k]) + 1e-12 * (1.0 + lo[k].abs().max(hi[k].abs()));
            lo[k] -= pad;
            hi[k] += pad;
        }
        let mut m = Moments::default();
        for _ in 0..n_mc {
            let x = box_draw(&mut rng, &lo, &hi);
            m.push(if region.contains(&map.forward(&x)) { 1.0 } else { 0.0 });
        }
        m.estimate(lo.iter().zip(&hi).map(|(a, b)| b - a).product())
    } else {
        warnings.push("no formula draw fell in the region; image volume not estimated".into());
        (0.0, 0.0)
    };
    Ok(MAEstimate {
        region: region.clone(),
        value_subdiff,
        subdiff_std_error,
        value_formula,
        std_error,
        mc_samples: n_mc,
        radial_substitution: singular,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsTrial {
    pub region: Region,
    pub volume: f64,
    pub measure: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub trials: Vec<BoundsTrial>,
    /// Largest `alpha` with `alpha |A| <= mu_psi(A)` on every trial.
    pub alpha_hat: f64,
    /// Smallest `A` with `mu_psi(A) <= A |A|^(1/d)` on every trial.
    pub big_a_hat: f64,
    /// `1 / (a_d Lambda)` and `1 / (lambda c_d^(1/d))` from the density
    /// bounds, when known.
    pub alpha_theory: Option<f64>,
    pub big_a_theory: Option<f64>,
    /// Whether every trial satisfies the theoretical bounds within three
    /// standard errors.
    pub theory_holds: Option<bool>,
    /// Largest `|Q(y)|` seen over the draws in the region.
    pub enclosing_radius: f64,
}

/// Fits the constants of `alpha |A| <= mu_psi(A) <= A |A|^(1/d)` over the
/// region itself and `trials - 1` random balls inside it. `mu_psi` comes from
/// the density formula when the density is known and from the image volume
/// otherwise. `bounds = (lambda, Lambda)` bounds the density on `Q(M)`.
pub fn check_bounds_lemma(
    region: &Region,
    map: &dyn CenterOutwardMap,
    density: Option<&dyn Fn(&[f64]) -> f64>,
    bounds: Option<(f64, f64)>,
    trials: usize,
    n_mc: usize,
    seed: u64,
) -> Result<BoundsReport> {
    let d = check_inputs(region, map, n_mc)?;
    let (near, far) = region.norm_range();
    if !(near > 0.0 && far < 1.0) {
        return Err(invalid("region must stay away from the origin and the unit sphere"));
    }
    if region.volume().is_none() || trials == 0 {
        return Err(invalid("need a region with a closed-form volume and at least one trial"));
    }
    let mut rng = crate::rng::rng(seed);
    let mut subregions = vec![region.clone()];
    while subregions.len() < trials {
        let (lo, hi) = region.bounding_box();
        let c = box_draw(&mut rng, &lo, &hi);
        let depth = region.depth(&c);
        if depth > 0.0 {
            let radius = depth * (0.02 + 0.98 * rng.random::<f64>());
            subregions.push(Region::Ball { center: c, radius });
        }
    }
    let mut enclosing: f64 = 0.0;
    let mut out = Vec::with_capacity(trials);
    for (t, a) in subregions.into_iter().enumerate() {
        let sub_seed = crate::rng::derive_seed(seed, &format!("trial-{t}"));
        let est = match density {
            Some(p) => ma_backward_density(&a, p, map, n_mc, sub_seed, false)?,
            None => {
                let est = ma_backward_density(&a, &|_| 1.0, map, n_mc, sub_seed, false)?;
                MAEstimate { value_formula: est.value_subdiff, std_error: est.subdiff_std_error, ..est }
            }
        };
        let mut r2 = crate::rng::rng(sub_seed);
        for _ in 0..64 {
            if let Some(y) = a.draw(&mut r2) {
                enclosing = enclosing.max(norm(&map.quantile(&y)?));
            }
        }
        out.push(BoundsTrial { volume: a.volume().unwrap(), measure: est.value_formula, std_error: est.std_error, region: a });
    }
    let alpha_hat = out.iter().map(|t| t.measure / t.volume).fold(f64::INFINITY, f64::min);
    let big_a_hat = out.iter().map(|t| t.measure / t.volume.powf(1.0 / d as f64)).fold(0.0, f64::max);
    let (alpha_theory, big_a_theory) = match bounds {
        Some((lo, hi)) => (Some(1.0 / (sphere_area(d)? * hi)), Some(1.0 / (lo * ball_volume(d)?.powf(1.0 / d as f64)))),
        None => (None, None),
    };
    let theory_holds = alpha_theory.zip(big_a_theory).map(|(al, aa)| {
        out.iter().all(|t| t.measure + 3.0 * t.std_error >= al * t.volume && t.measure - 3.0 * t.std_error <= aa * t.volume.powf(1.0 / d as f64))
    });
    Ok(BoundsReport { trials: out, alpha_hat, big_a_hat, alpha_theory, big_a_theory, theory_holds, enclosing_radius: enclosing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub points_checked: usize,
    pub max_norm: f64,
    /// Largest grid radius `n_R / (n_R + 1)`.
    pub bound: f64,
    pub pass: bool,
}

/// Largest `|F(x)|` over the given points, against the largest grid radius.
pub fn boundary_avoidance_check(pot: &Potentials, points: &Points) -> BoundaryReport {
    let max_norm = points.iter().map(|x| norm(&pot.forward(x).point)).fold(0.0, f64::max);
    let bound = pot.grid().max_radius();
    BoundaryReport { points_checked: points.len(), max_norm, bound, pass: max_norm <= bound && bound < 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportEquationReport {
    pub points_in_region: usize,
    /// Empirical mass of the sample points in the region.
    pub sample_mass: f64,
    /// Discrete reference mass of their images under `F`.
    pub image_mass: f64,
    pub exact: bool,
}

/// Checks `U_hat(F(A ∩ sample)) = P_hat(A ∩ sample)` by counting atoms.
/// Atoms sharing a location (the origin copies) are counted up to the
/// number of sample points sent there.
pub fn transport_equation_check(pot: &Potentials, data: &Dataset, region: &Region) -> TransportEquationReport {
    let n = pot.len();
    let grid = pot.grid();
    let mut by_location: BTreeMap<Vec<u64>, (usize, usize)> = BTreeMap::new();
    let mut inside = 0;
    for x in data.points().iter().filter(|x| region.contains(x)) {
        inside += 1;
        let f = pot.forward(x);
        let key: Vec<u64> = f.point.iter().map(|c| (c + 0.0).to_bits()).collect();
        let atoms = f.achievers.iter().filter(|&&k| grid.atom(k) == f.point.as_slice()).count().max(1);
        let e = by_location.entry(key).or_insert((0, atoms));
        e.0 += 1;
    }
    let image: usize = by_location.values().map(|&(points, atoms)| points.min(atoms)).sum();
    TransportEquationReport { points_in_region: inside, sample_mass: inside as f64 / n as f64, image_mass: image as f64 / n as f64, exact: image == inside }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Generator, GeneratorSpec};
    use crate::ot::solve_assignment;
    use crate::potential::{build_potentials, RadialMap, RadialProfile};
    use crate::reference::{spherical_uniform_density, SphericalGrid};
    use std::f64::consts::PI;

    fn within(est: f64, se: f64, truth: f64) -> bool {
        (est - truth).abs() <= 3.0 * se + 1e-12
    }

    #[test]
    fn forward_line_segment_has_unit_mass() {
        // Uniform(-1, 1): F(x) = x, a_1 = 2, p = 1/2, so mu_phi((-0.5, 0.5)) = 1.
        let map = RadialMap::new(vec![0.0], RadialProfile::UniformBall { radius: 1.0 }).unwrap();
        let region = Region::Box { lower: vec![-0.5], upper: vec![0.5] };
        let est = ma_forward_density(&region, &|x| if x[0].abs() <= 1.0 { 0.5 } else { 0.0 }, &map, 20_000, 3).unwrap();
        assert_eq!(est.value_formula, 1.0);
        assert!(within(est.value_subdiff, est.subdiff_std_error, 1.0));
    }

    #[test]
    fn forward_identity_annulus_is_its_area() {
        let map = RadialMap::identity(2).unwrap();
        let region = Region::Annulus { center: vec![0.0, 0.0], inner: 0.25, outer: 0.5 };
        let est = ma_forward_density(&region, &spherical_uniform_density, &map, 50_000, 4).unwrap();
        let truth = PI * (0.25 - 0.0625);
        assert!((truth - 0.589).abs() < 1e-3);
        assert!(within(est.value_formula, est.std_error, truth), "{est:?}");
        assert!(within(est.value_subdiff, est.subdiff_std_error, truth), "{est:?}");
    }

    #[test]
    fn null_sets_have_no_mass() {
        let map = RadialMap::identity(2).unwrap();
        let region = Region::Points { points: vec![vec![0.3, 0.1], vec![-0.2, 0.4]], radius: 0.0 };
        let est = ma_forward_density(&region, &spherical_uniform_density, &map, 1000, 1).unwrap();
        assert_eq!((est.value_formula, est.value_subdiff), (0.0, 0.0));
    }

    #[test]
    fn backward_identity_is_lebesgue() {
        let map = RadialMap::identity(2).unwrap();
        let region = Region::Ball { center: vec![0.3, 0.2], radius: 0.15 };
        let est = ma_backward_density(&region, &spherical_uniform_density, &map, 20_000, 5, false).unwrap();
        let truth = PI * 0.15 * 0.15;
        assert!((est.value_formula - truth).abs() < 1e-12);
        assert!(within(est.value_subdiff, est.subdiff_std_error, truth), "{est:?}");
    }

    #[test]
    fn backward_line_segment() {
        let map = RadialMap::new(vec![0.0], RadialProfile::UniformBall { radius: 1.0 }).unwrap();
        let region = Region::Box { lower: vec![0.0], upper: vec![0.5] };
        let p = |x: &[f64]| if x[0].abs() <= 1.0 { 0.5 } else { 0.0 };
        assert!(ma_backward_density(&region, &p, &map, 1000, 1, false).is_err());
        let est = ma_backward_density(&region, &p, &map, 20_000, 6, true).unwrap();
        assert!(est.radial_substitution);
        assert!(within(est.value_formula, est.std_error, 0.5), "{est:?}");
        assert!(within(est.value_subdiff, est.subdiff_std_error, 0.5), "{est:?}");
    }

    #[test]
    fn backward_disc_annulus_matches_the_radial_oracle() {
        // Uniform disc of radius 1: Q(y) = sqrt(|y|) y/|y|, so Q maps the
        // annulus 0.5 < |y| < 0.75 onto sqrt(0.5) < |x| < sqrt(0.75), of area
        // pi (0.75 - 0.5).
        let g = Generator::new(GeneratorSpec::unit_disc()).unwrap();
        let map = g.analytic_map().unwrap();
        let region = Region::Annulus { center: vec![0.0, 0.0], inner: 0.5, outer: 0.75 };
        let est = ma_backward_density(&region, &|x| g.density(x), &map, 50_000, 7, false).unwrap();
        let truth = PI * 0.25;
        // The formula gives (1/(2 pi)) int_B pi / |y| dy = pi (0.75 - 0.5) too.
        assert!(within(est.value_formula, est.std_error, truth), "{est:?}");
        assert!(within(est.value_subdiff, est.subdiff_std_error, truth), "{est:?}");
    }

    #[test]
    fn singular_substitution_covers_the_origin() {
        let map = RadialMap::identity(3).unwrap();
        let region = Region::Ball { center: vec![0.0; 3], radius: 0.5 };
        let est = ma_backward_density(&region, &spherical_uniform_density, &map, 20_000, 8, true).unwrap();
        let truth = ball_volume(3).unwrap() * 0.125;
        assert!(within(est.value_formula, est.std_error, truth), "{est:?}");
    }

    #[test]
    fn identity_bounds() {
        let map = RadialMap::identity(2).unwrap();
        let m = Region::Annulus { center: vec![0.0, 0.0], inner: 0.3, outer: 0.7 };
        let bounds = Some((1.0 / (2.0 * PI * 0.7), 1.0 / (2.0 * PI * 0.3)));
        let r = check_bounds_lemma(&m, &map, Some(&spherical_uniform_density), bounds, 12, 4000, 9).unwrap();
        assert!(r.alpha_hat <= 1.0 + 1e-9);
        assert!((r.alpha_hat - 1.0).abs() < 1e-9);
        let big_m = m.volume().unwrap();
        assert!(r.big_a_hat >= big_m.powf(0.5) - 1e-9);
        assert_eq!(r.theory_holds, Some(true));
        assert!(r.enclosing_radius <= 0.7 + 1e-12);
    }

    #[test]
    fn shrinking_balls_stay_bounded() {
        let g = Generator::new(GeneratorSpec::standard_gaussian(2)).unwrap();
        let map = g.analytic_map().unwrap();
        let mut ratios = vec![];
        for k in 1..6 {
            let radius = 0.2 / 2f64.powi(k);
            let a = Region::Ball { center: vec![0.5, 0.0], radius };
            let est = ma_backward_density(&a, &|x| g.density(x), &map, 4000, k as u64, false).unwrap();
            ratios.push(est.value_formula / a.volume().unwrap().sqrt());
        }
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn empirical_boundary_and_transport_equation() {
        let g = Generator::new(GeneratorSpec::unit_square()).unwrap();
        let data = g.sample(90, 3).unwrap();
        let grid = SphericalGrid::build(90, 2, 9, 10, 0).unwrap();
        let pot = build_potentials(&solve_assignment(&data, &grid).unwrap(), &data, &grid).unwrap();
        let report = boundary_avoidance_check(&pot, data.points());
        assert!(report.pass);
        assert!((report.bound - 0.9).abs() < 1e-15);
        for region in [
            Region::Box { lower: vec![0.0, 0.0], upper: vec![0.5, 0.7] },
            Region::Ball { center: vec![0.5, 0.5], radius: 0.3 },
        ] {
            let t = transport_equation_check(&pot, &data, &region);
            assert!(t.exact);
            assert_eq!(t.image_mass, t.sample_mass);
        }
    }
}
