//! Quantile contours and regions, ranks and signs, and the geometric
//! property checks of the empirical quantile function.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::generators::{Generator, GeneratorSpec};
use crate::geometry::{convex_hull_2d, in_convex_polygon};
use crate::ot::{solve_assignment, Dataset};
use crate::points::{bounding_box, dist, dot, norm, Points};
use crate::potential::{build_potentials, Potentials};
use crate::reference::{sample_spherical_uniform, sphere_directions, GridShape, SphericalGrid};
use crate::rng::derive_seed;

/// `Q(r s)` over a set of directions `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileContour {
    pub level: f64,
    pub directions: Points,
    pub points: Points,
    /// Number of directions where `Q` has several active pieces.
    pub multiple: usize,
    /// The level is one of the grid radii.
    pub level_on_grid: bool,
    /// The points form a closed polyline in angular order (d = 2).
    pub closed: bool,
}

/// Directions used for contours and ray tests: the two signs in d = 1,
/// equiangular in d = 2, the grid direction scheme otherwise.
pub fn contour_directions(d: usize, n_dirs: usize) -> Result<Points> {
    match d {
        1 => Points::from_rows(1, &[[1.0], [-1.0]]),
        2 => {
            let rows: Vec<[f64; 2]> = (0..n_dirs).map(|k| 2.0 * PI * k as f64 / n_dirs as f64).map(|t| [t.cos(), t.sin()]).collect();
            Points::from_rows(2, &rows)
        }
        _ => sphere_directions(d, n_dirs, 0),
    }
}

pub fn contour(pot: &Potentials, r: f64, n_dirs: usize) -> Result<QuantileContour> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::OutOfDomain { norm: r });
    }
    if n_dirs == 0 {
        return Err(invalid("need at least one direction"));
    }
    let d = pot.dim();
    let directions = contour_directions(d, n_dirs)?;
    let mut points = Points::empty(d);
    let mut multiple = 0;
    for s in directions.iter() {
        let u: Vec<f64> = s.iter().map(|c| c * r).collect();
        let q = pot.quantile(&u)?;
        multiple += usize::from(q.is_multiple());
        points.push(&q.point);
    }
    let level_on_grid = pot.grid().radii().iter().any(|&g| (g - r).abs() <= 1e-12);
    Ok(QuantileContour { level: r, directions, points, multiple, level_on_grid, closed: d == 2 })
}

/// Matched points of the atoms of norm at most `r`: the sample version of
/// the quantile region of level `r`.
pub fn region_points(pot: &Potentials, r: f64) -> Points {
    let grid = pot.grid();
    let idx: Vec<usize> = (0..pot.len()).filter(|&j| norm(grid.atom(j)) <= r + 1e-12).collect();
    pot.matched_points().subset(&idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSign {
    /// Radius of the matched atom, 0 for the origin copies.
    pub rank: f64,
    /// Direction of the matched atom; `None` for the origin copies.
    pub sign: Option<Vec<f64>>,
    pub grid_index: usize,
    pub shell: Option<usize>,
    pub direction: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSignTable {
    pub n_radii: usize,
    pub n_directions: usize,
    pub entries: Vec<RankSign>,
}

impl RankSignTable {
    /// Every atom is used once, each nonzero rank `i/(n_R+1)` appears
    /// exactly `n_S` times and each origin copy gets rank 0.
    pub fn is_exact(&self, grid: &SphericalGrid) -> bool {
        let mut used = vec![false; grid.len()];
        for e in &self.entries {
            if e.grid_index >= used.len() || std::mem::replace(&mut used[e.grid_index], true) {
                return false;
            }
        }
        let mut per_shell = vec![0usize; self.n_radii];
        for e in &self.entries {
            match e.shell {
                Some(i) if e.rank == grid.radii()[i] => per_shell[i] += 1,
                None if e.rank == 0.0 => {}
                _ => return false,
            }
        }
        used.iter().all(|&u| u) && per_shell.iter().all(|&c| c == self.n_directions)
    }
}

/// Rank `|F(x_i)|` and sign `F(x_i)/|F(x_i)|` of every sample point, read
/// from the matched atom so that both are exact grid values.
pub fn ranks_signs(pot: &Potentials, data: &Dataset) -> Result<RankSignTable> {
    if data.dim() != pot.dim() {
        return Err(invalid("data and potentials dimensions differ"));
    }
    let grid = pot.grid();
    let mut used = vec![false; grid.len()];
    let mut entries = Vec::with_capacity(data.len());
    for x in data.points().iter() {
        let j = match pot.atoms_matched_to(x).iter().find(|&&j| !used[j]) {
            Some(&j) => j,
            None => pot.forward(x).achievers[0],
        };
        used[j] = true;
        let (shell, direction) = (grid.shell_of(j), grid.direction_of(j));
        entries.push(RankSign {
            rank: shell.map_or(0.0, |i| grid.radii()[i]),
            sign: direction.map(|k| grid.directions().get(k).to_vec()),
            grid_index: j,
            shell,
            direction,
        });
    }
    Ok(RankSignTable { n_radii: grid.n_radii(), n_directions: grid.n_directions(), entries })
}

/// Symmetric Hausdorff distance between finite point sets.
pub fn hausdorff_distance(a: &Points, b: &Points) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("Hausdorff distance needs two nonempty sets"));
    }
    if a.dim() != b.dim() {
        return Err(invalid("point sets have different dimensions"));
    }
    Ok(directed(a, b).max(directed(b, a)))
}

fn directed(a: &Points, b: &Points) -> f64 {
    a.iter().map(|p| b.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRecoveryRow {
    pub n: usize,
    pub level: f64,
    /// `d_H(contour, boundary sample)`.
    pub contour_to_boundary: f64,
    /// `d_H(region ∪ contour, support sample)`.
    pub region_to_support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRecoveryReport {
    pub rows: Vec<SupportRecoveryRow>,
    pub boundary_points: usize,
    pub support_points: usize,
    pub contour_directions: usize,
    /// `contour_to_boundary` strictly decreases in `n` at every level.
    pub decreasing_in_n: bool,
    /// `region_to_support` is nonincreasing in the level at every `n`.
    pub decreasing_in_level: bool,
}

/// Fits the empirical maps of samples of each size and measures how far the
/// quantile contours and regions are from the boundary and the support.
pub fn support_recovery_test(
    spec: &GeneratorSpec,
    sizes: &[usize],
    levels: &[f64],
    n_dirs: usize,
    boundary_points: usize,
    seed: u64,
) -> Result<SupportRecoveryReport> {
    let g = Generator::new(spec.clone())?;
    if !g.support().is_some_and(|h| h.is_bounded()) {
        return Err(Error::Unsupported("support recovery needs a compact convex support".into()));
    }
    let boundary = g.boundary_sample(boundary_points, derive_seed(seed, "boundary"))?;
    let support = support_lattice(&g, &boundary, boundary_points);
    let mut rows = Vec::new();
    for &n in sizes {
        let data = g.sample(n, derive_seed(seed, &format!("data-{n}")))?;
        let grid = SphericalGrid::with_shape(n, g.dim(), GridShape::auto(n, g.dim()), derive_seed(seed, "grid"))?;
        let pot = build_potentials(&solve_assignment(&data, &grid)?, &data, &grid)?;
        for &r in levels {
            let c = contour(&pot, r, n_dirs)?;
            let mut region = region_points(&pot, r);
            for p in c.points.iter() {
                region.push(p);
            }
            rows.push(SupportRecoveryRow {
                n,
                level: r,
                contour_to_boundary: hausdorff_distance(&c.points, &boundary)?,
                region_to_support: hausdorff_distance(&region, &support)?,
            });
        }
    }
    let at_level = |r: f64| rows.iter().filter(move |w| w.level == r);
    let decreasing_in_n = levels.iter().all(|&r| {
        let v: Vec<f64> = at_level(r).map(|w| w.contour_to_boundary).collect();
        v.windows(2).all(|p| p[1] < p[0])
    });
    let decreasing_in_level = sizes.iter().all(|&n| {
        let v: Vec<f64> = rows.iter().filter(|w| w.n == n).map(|w| w.region_to_support).collect();
        v.windows(2).all(|p| p[1] <= p[0])
    });
    Ok(SupportRecoveryReport {
        boundary_points: boundary.len(),
        support_points: support.len(),
        contour_directions: n_dirs,
        rows,
        decreasing_in_n,
        decreasing_in_level,
    })
}

/// About `m` lattice points of the support, plus its boundary sample.
fn support_lattice(g: &Generator, boundary: &Points, m: usize) -> Points {
    let d = g.dim();
    let (lo, hi) = bounding_box(boundary);
    let per_axis = ((m as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
    let mut out = boundary.clone();
    let mut idx = vec![0usize; d];
    loop {
        let p: Vec<f64> = (0..d).map(|k| lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / (per_axis - 1) as f64).collect();
        if g.density(&p) > 0.0 {
            out.push(&p);
        }
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            return out;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayReport {
    pub level: f64,
    pub tested: usize,
    pub passed: usize,
    pub pass_fraction: f64,
    pub tau: f64,
    /// Indices of the directions whose ray met a region point.
    pub failures: Vec<usize>,
}

/// For boundary points `y = Q(r u)`, checks that no region point of level
/// `r` lies within `tau` of the ray `{y + t u : t > tau}`. The default `tau`
/// is `1e-6` times the diameter of the matched points.
pub fn ray_escape_test(pot: &Potentials, r: f64, n_boundary: usize, tau: Option<f64>) -> Result<RayReport> {
    let c = contour(pot, r, n_boundary)?;
    let region = region_points(pot, r);
    let tau = match tau {
        Some(t) => t,
        None => {
            let (lo, hi) = bounding_box(pot.matched_points());
            1e-6 * dist(&lo, &hi)
        }
    };
    let mut failures = Vec::new();
    for (k, (u, y)) in c.directions.iter().zip(c.points.iter()).enumerate() {
        let hit = region.iter().any(|z| {
            let w: Vec<f64> = z.iter().zip(y).map(|(a, b)| a - b).collect();
            let t = dot(&w, u);
            t > tau && (dot(&w, &w) - t * t).max(0.0).sqrt() < tau
        });
        if hit {
            failures.push(k);
        }
    }
    let tested = c.points.len();
    let passed = tested - failures.len();
    Ok(RayReport { level: r, tested, passed, pass_fraction: passed as f64 / tested as f64, tau, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub direction: Vec<f64>,
    pub errors: Vec<f64>,
    /// Each error exceeds the previous one by at most the grid spacing.
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub scales: Vec<f64>,
    pub rows: Vec<InvarianceRow>,
    /// Largest of the shell spacing and the angular spacing.
    pub grid_spacing: f64,
    /// Angular spacing plus `1/(n_R + 1)`.
    pub final_bound: f64,
    pub max_final_error: f64,
    /// Largest `|F(t u)|` over all probes.
    pub max_norm: f64,
    pub pass: bool,
}

/// Largest angle from a grid direction to its nearest neighbour.
pub fn angular_spacing(grid: &SphericalGrid) -> f64 {
    let dirs = grid.directions();
    if dirs.len() < 2 {
        return PI;
    }
    dirs.iter()
        .enumerate()
        .map(|(k, s)| {
            dirs.iter()
                .enumerate()
                .filter(|&(m, _)| m != k)
                .map(|(_, t)| dot(s, t).clamp(-1.0, 1.0).acos())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// `|F(t u) - u|` along each direction for increasing scales `t`.
pub fn asymptotic_invariance_test(pot: &Potentials, directions: &Points, scales: &[f64]) -> Result<InvarianceReport> {
    if directions.dim() != pot.dim() || directions.is_empty() {
        return Err(invalid("need directions of the potentials' dimension"));
    }
    if scales.is_empty() || scales.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("scales must be nonempty and increasing"));
    }
    let grid = pot.grid();
    let angular = angular_spacing(grid);
    let grid_spacing = grid.shell_spacing().max(angular);
    let final_bound = angular + grid.shell_spacing();
    let mut rows = Vec::new();
    let mut max_norm: f64 = 0.0;
    for s in directions.iter() {
        let u: Vec<f64> = s.iter().map(|c| c / norm(s)).collect();
        let errors: Vec<f64> = scales
            .iter()
            .map(|&t| {
                let f = pot.forward(&u.iter().map(|c| c * t).collect::<Vec<_>>()).point;
                max_norm = max_norm.max(norm(&f));
                dist(&f, &u)
            })
            .collect();
        let nonincreasing = errors.windows(2).all(|w| w[1] <= w[0] + grid_spacing);
        rows.push(InvarianceRow { direction: u, errors, nonincreasing });
    }
    let max_final_error = rows.iter().map(|r| *r.errors.last().unwrap()).fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.nonincreasing) && max_final_error <= final_bound && max_norm <= grid.max_radius();
    Ok(InvarianceReport { scales: scales.to_vec(), rows, grid_spacing, final_bound, max_final_error, max_norm, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub shell: usize,
    pub radius: f64,
    /// Largest `|Q(u) - Q(u')|` over neighbouring atoms of the shell.
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeomorphismAudit {
    pub injective: bool,
    pub distinct_atoms: usize,
    pub max_round_trip: f64,
    pub round_trip_failures: usize,
    pub continuity: Vec<ModulusRow>,
    /// Sample points whose image has several achievers, origin excluded.
    pub multiple_at_data: usize,
    pub probes: usize,
    /// Probes away from the origin where `Q` has several active pieces.
    pub multiple_at_probes: usize,
    pub pass: bool,
}

/// Injectivity, round trips, a continuity-modulus table and a census of
/// nondifferentiability flags of the empirical maps.
pub fn homeomorphism_audit(pot: &Potentials, data: &Dataset, probes: usize, seed: u64) -> Result<HomeomorphismAudit> {
    let grid = pot.grid();
    let table = ranks_signs(pot, data)?;
    let mut atoms: Vec<usize> = table.entries.iter().map(|e| e.grid_index).collect();
    atoms.sort_unstable();
    atoms.dedup();
    // Q is set-valued at the origin when several copies sit there; a point
    // sent to the origin passes when it is one of the values.
    let residuals: Vec<f64> = data
        .points()
        .iter()
        .map(|x| {
            let f = pot.forward(x);
            match pot.quantile(&f.point) {
                Ok(q) if q.is_multiple() && norm(&f.point) == 0.0 => {
                    q.achievers.iter().map(|&b| dist(pot.matched_points().get(b), x)).fold(f64::INFINITY, f64::min)
                }
                Ok(q) => dist(&q.point, x),
                Err(_) => f64::INFINITY,
            }
        })
        .collect();
    let max_round_trip = residuals.iter().cloned().fold(0.0, f64::max);
    let round_trip_failures = residuals.iter().filter(|&&r| r > 0.0).count();
    let multiple_at_data = data
        .points()
        .iter()
        .filter(|x| {
            let f = pot.forward(x);
            f.is_multiple() && norm(&f.point) > 0.0
        })
        .count();

    let dirs = grid.directions();
    let neighbour: Vec<usize> = (0..dirs.len())
        .map(|k| {
            (0..dirs.len())
                .filter(|&m| m != k)
                .min_by(|&a, &b| dist(dirs.get(k), dirs.get(a)).total_cmp(&dist(dirs.get(k), dirs.get(b))))
                .unwrap_or(k)
        })
        .collect();
    let n_s = grid.n_directions();
    let continuity = (0..grid.n_radii())
        .map(|i| {
            let modulus = (0..n_s)
                .map(|k| dist(pot.matched_points().get(i * n_s + k), pot.matched_points().get(i * n_s + neighbour[k])))
                .fold(0.0, f64::max);
            ModulusRow { shell: i, radius: grid.radii()[i], modulus }
        })
        .collect();

    let cut = grid.shell_spacing() / 2.0;
    let mut checked = 0;
    let mut multiple_at_probes = 0;
    for u in sample_spherical_uniform(probes.max(1), pot.dim(), seed)?.iter().take(probes) {
        if norm(u) >= cut {
            checked += 1;
            multiple_at_probes += usize::from(pot.quantile(u)?.is_multiple());
        }
    }
    let injective = atoms.len() == data.len();
    Ok(HomeomorphismAudit {
        injective,
        distinct_atoms: atoms.len(),
        max_round_trip,
        round_trip_failures,
        continuity,
        multiple_at_data,
        probes: checked,
        multiple_at_probes,
        pass: injective && round_trip_failures == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    /// Rank bins by sign sectors.
    pub counts: Vec<Vec<usize>>,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub excluded_origin: usize,
}

/// Chi-square statistic of the shell-by-sector contingency table. Shells are
/// grouped into `rank_bins` and directions into `sectors` consecutive
/// blocks; origin-matched points are excluded.
pub fn rank_sign_independence_test(table: &RankSignTable, rank_bins: usize, sectors: usize) -> Result<IndependenceReport> {
    if rank_bins == 0 || sectors == 0 || rank_bins > table.n_radii || sectors > table.n_directions {
        return Err(invalid("bins must be between 1 and the number of shells and directions"));
    }
    let mut counts = vec![vec![0usize; sectors]; rank_bins];
    let mut excluded_origin = 0;
    for e in &table.entries {
        match (e.shell, e.direction) {
            (Some(i), Some(k)) => counts[i * rank_bins / table.n_radii][k * sectors / table.n_directions] += 1,
            _ => excluded_origin += 1,
        }
    }
    let total: usize = counts.iter().flatten().sum();
    let rows: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..sectors).map(|k| counts.iter().map(|r| r[k]).sum()).collect();
    let mut statistic = 0.0;
    for (i, row) in counts.iter().enumerate() {
        for (k, &o) in row.iter().enumerate() {
            // Products of integers keep the expected counts exact.
            let num = (o * total) as f64 - (rows[i] * cols[k]) as f64;
            let e = (rows[i] * cols[k]) as f64;
            if e > 0.0 {
                statistic += num * num / (e * total as f64);
            }
        }
    }
    let nonempty_rows = rows.iter().filter(|&&r| r > 0).count();
    let nonempty_cols = cols.iter().filter(|&&c| c > 0).count();
    let df = nonempty_rows.saturating_sub(1) * nonempty_cols.saturating_sub(1);
    let p_value = if df == 0 { 1.0 } else { ChiSquared::new(df as f64).map_err(|e| invalid(e.to_string()))?.sf(statistic) };
    Ok(IndependenceReport { counts, statistic, degrees_of_freedom: df, p_value, excluded_origin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestingReport {
    pub levels: Vec<f64>,
    pub points_checked: usize,
    pub violations: usize,
}

/// For consecutive levels `r < r'`, checks that every point of contour `r`
/// lies in the convex hull of the region and contour of level `r'` (d = 2).
pub fn nesting_check(pot: &Potentials, levels: &[f64], n_dirs: usize) -> Result<NestingReport> {
    if pot.dim() != 2 {
        return Err(Error::Unsupported("nesting check is planar".into()));
    }
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("levels must be increasing"));
    }
    let (lo, hi) = bounding_box(pot.matched_points());
    let slack = 1e-12 * (1.0 + dist(&lo, &hi));
    let mut checked = 0;
    let mut violations = 0;
    for w in levels.windows(2) {
        let inner = contour(pot, w[0], n_dirs)?;
        let outer = contour(pot, w[1], n_dirs)?;
        let mut cloud: Vec<[f64; 2]> = region_points(pot, w[1]).iter().map(|p| [p[0], p[1]]).collect();
        cloud.extend(outer.points.iter().map(|p| [p[0], p[1]]));
        let hull = convex_hull_2d(&cloud);
        for p in inner.points.iter() {
            checked += 1;
            violations += usize::from(!in_convex_polygon(&hull, [p[0], p[1]], slack));
        }
    }
    Ok(NestingReport { levels: levels.to_vec(), points_checked: checked, violations })
}
