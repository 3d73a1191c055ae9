//! Quadratic-cost optimal transport between a sample and a spherical grid.
//!
//! [`solve_assignment`] returns the exact optimal permutation together with a
//! canonical dual pair; [`solve_sinkhorn`] returns an entropic surrogate.
//! Both use the cost `|x - u|^2` without the customary factor 1/2.

pub(crate) mod assignment;
mod dataset;
mod monotonicity;
mod plan;
mod sinkhorn;

pub use dataset::{Dataset, HalfSpace, SupportHint};
pub use monotonicity::{verify_cyclical_monotonicity, MonotonicityReport};
pub use plan::{Duals, PlanFile, PlanKind, TransportPlan};
pub use sinkhorn::{solve_sinkhorn, SinkhornOptions};

use crate::error::{invalid, Error, Result};
use crate::points::{dist2, dot};
use crate::reference::SphericalGrid;

pub(crate) fn check_compatible(data: &Dataset, grid: &SphericalGrid) -> Result<()> {
    if data.len() != grid.len() {
        return Err(invalid(format!("sample has {} points but the grid has {} atoms", data.len(), grid.len())));
    }
    if data.dim() != grid.dim() {
        return Err(invalid(format!("sample dimension {} differs from grid dimension {}", data.dim(), grid.dim())));
    }
    Ok(())
}

/// Exact optimal assignment of sample points to grid atoms.
///
/// Among optimal permutations the lexicographically smallest `sigma` is
/// returned. The dual pair is canonical, the midpoint of the extreme duals for that permutation: it
/// vanishes on the origin copies and depends only on the optimal
/// permutation, so rotated or translated problems get correspondingly
/// transformed duals.
pub fn solve_assignment(data: &Dataset, grid: &SphericalGrid) -> Result<TransportPlan> {
    check_compatible(data, grid)?;
    let max_sq = data.points().iter().map(|p| dot(p, p)).fold(0.0, f64::max);
    if !max_sq.is_finite() {
        return Err(Error::Numeric("squared norms overflow".into()));
    }
    match data.dim() {
        1 => solve_with_cost(grid, fixed_dim_cost::<1>(data, grid)),
        2 => solve_with_cost(grid, fixed_dim_cost::<2>(data, grid)),
        3 => solve_with_cost(grid, fixed_dim_cost::<3>(data, grid)),
        _ => solve_with_cost(grid, |i, j| dist2(data.point(i), grid.atom(j))),
    }
}

/// Same values as `dist2`, with the coordinates laid out as fixed-size
/// arrays so the inner loops of the solver unroll.
fn fixed_dim_cost<const D: usize>(data: &Dataset, grid: &SphericalGrid) -> impl Fn(usize, usize) -> f64 {
    let pack = |p: &[f64]| -> [f64; D] { p.try_into().expect("dimension checked") };
    let xs: Vec<[f64; D]> = data.points().iter().map(pack).collect();
    let us: Vec<[f64; D]> = grid.atoms().iter().map(pack).collect();
    move |i, j| {
        let (a, b) = (&xs[i], &us[j]);
        let mut s = 0.0;
        for k in 0..D {
            s += (a[k] - b[k]) * (a[k] - b[k]);
        }
        s
    }
}

fn solve_with_cost<C: Fn(usize, usize) -> f64>(grid: &SphericalGrid, cost: C) -> Result<TransportPlan> {
    let n = grid.len();
    let mut a = assignment::solve(n, &cost)?;
    let scale = 1.0 + (0..n).map(|i| cost(i, a.row_to_col[i])).fold(0.0, f64::max);
    assignment::lexicographic_min(&mut a, &cost, 1e-10 * scale);

    let sigma = a.row_to_col;
    let g = canonical_grid_duals(grid, &sigma, &a.row_dual, &a.col_dual, &cost);
    let f: Vec<f64> = (0..n).map(|i| cost(i, sigma[i]) - g[sigma[i]]).collect();
    let total: f64 = (0..n).map(|i| cost(i, sigma[i])).sum();
    TransportPlan::exact(sigma, Duals { f, g }, total / n as f64)
}

/// Canonical grid-side dual for the permutation `sigma`.
///
/// Given `sigma`, feasibility reads `g_j - g_k <= c(s_k, j) - c(s_k, k)`
/// where `s_k` is the point matched to atom `k`. With the roots (the origin
/// copies, else the innermost shell) held at zero, the largest feasible `g`
/// is the shortest-path distance from the roots and the smallest is minus
/// the distance to the roots. Starting from their midpoint, each free atom is
/// then moved to the centre of its feasible interval given the others, which
/// leaves every constraint that is not forced strictly slack. The result
/// depends only on `sigma` and the geometry. Weights reduced by the solver
/// duals are nonnegative, which lets a dense Dijkstra do the path work.
fn canonical_grid_duals<C: Fn(usize, usize) -> f64>(
    grid: &SphericalGrid,
    sigma: &[usize],
    row_dual: &[f64],
    col_dual: &[f64],
    cost: &C,
) -> Vec<f64> {
    let n = sigma.len();
    let mut owner = vec![0usize; n];
    for (i, &j) in sigma.iter().enumerate() {
        owner[j] = i;
    }
    let roots: Vec<usize> = if grid.origin_copies() > 0 {
        grid.origin_atoms().collect()
    } else {
        (0..n).filter(|&j| grid.shell_of(j) == Some(0)).collect()
    };
    let reduced = |i: usize, j: usize| (cost(i, j) - row_dual[i] - col_dual[j]).max(0.0);

    // Along a path the true length is the reduced length plus v_end - v_start.
    let v_max = roots.iter().map(|&r| col_dual[r]).fold(f64::NEG_INFINITY, f64::max);
    let v_min = roots.iter().map(|&r| col_dual[r]).fold(f64::INFINITY, f64::min);
    let mut from = vec![f64::INFINITY; n];
    let mut to = vec![f64::INFINITY; n];
    for &r in &roots {
        from[r] = v_max - col_dual[r];
        to[r] = col_dual[r] - v_min;
    }
    dijkstra(&mut from, |k, j| reduced(owner[k], j));
    dijkstra(&mut to, |j, k| reduced(owner[k], j));

    let mut g: Vec<f64> = (0..n)
        .map(|j| {
            let upper = from[j] - v_max + col_dual[j];
            let lower = -(to[j] + v_min - col_dual[j]);
            0.5 * (upper + lower)
        })
        .collect();
    let pinned = |j: usize| grid.is_origin(j);
    let own: Vec<f64> = (0..n).map(|k| cost(owner[k], k)).collect();
    // Moves atom j to the centre of its feasible interval; returns the
    // interval width and the two atoms that bound it.
    let center = |g: &mut [f64], j: usize| -> (f64, usize, usize) {
        let (mut upper, mut lower) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut k_up, mut k_lo) = (j, j);
        let i = owner[j];
        for k in 0..n {
            if k != j {
                let u = g[k] + cost(owner[k], j) - own[k];
                if u < upper {
                    upper = u;
                    k_up = k;
                }
                let l = g[k] - (cost(i, k) - own[j]);
                if l > lower {
                    lower = l;
                    k_lo = k;
                }
            }
        }
        if upper.is_finite() && lower.is_finite() && lower <= upper {
            g[j] = 0.5 * (lower + upper);
        }
        (upper - lower, k_lo, k_up)
    };
    // One full sweep leaves every constraint slack except around atoms whose
    // interval was degenerate; those are revisited together with the atoms
    // that bind them until none is left or no progress is made.
    let mut round: Vec<usize> = (0..n).filter(|&j| !pinned(j)).collect();
    let mut stalled = 0;
    let mut last = usize::MAX;
    for _ in 0..MAX_CENTERING_ROUNDS {
        let mut next = Vec::new();
        let mut degenerate = 0;
        for &j in &round {
            let (width, k_lo, k_up) = center(&mut g, j);
            if width <= DEGENERATE_WIDTH * (1.0 + g[j].abs()) {
                degenerate += 1;
                next.extend([k_lo, j, k_up]);
            }
        }
        if degenerate == 0 {
            break;
        }
        stalled = if degenerate >= last { stalled + 1 } else { 0 };
        if stalled >= 3 {
            break;
        }
        last = degenerate;
        next.retain(|&k| !pinned(k));
        next.sort_unstable();
        next.dedup();
        round = next;
    }
    if grid.origin_copies() > 0 {
        // All origin copies share one dual; pin it to exactly zero.
        let shift = g[grid.origin_atoms().start];
        for gj in &mut g {
            *gj -= shift;
        }
        for j in grid.origin_atoms() {
            g[j] = 0.0;
        }
    }
    g
}

const MAX_CENTERING_ROUNDS: usize = 500;
const DEGENERATE_WIDTH: f64 = 1e-9;

/// Dense Dijkstra from the finite initial labels in `dist`; `weight(k, j)` is
/// the nonnegative weight of the edge used to reach `j` from the settled `k`.
fn dijkstra(dist: &mut [f64], weight: impl Fn(usize, usize) -> f64) {
    let n = dist.len();
    let mut done = vec![false; n];
    for _ in 0..n {
        let mut k = usize::MAX;
        let mut best = f64::INFINITY;
        for j in 0..n {
            if !done[j] && dist[j] < best {
                best = dist[j];
                k = j;
            }
        }
        if k == usize::MAX {
            break;
        }
        done[k] = true;
        for j in 0..n {
            if !done[j] {
                let w = weight(k, j);
                if best + w < dist[j] {
                    dist[j] = best + w;
                }
            }
        }
    }
}

/// Average squared distance of the permutation `sigma`.
pub fn permutation_cost(data: &Dataset, grid: &SphericalGrid, sigma: &[usize]) -> f64 {
    let n = sigma.len();
    sigma.iter().enumerate().map(|(i, &j)| dist2(data.point(i), grid.atom(j))).sum::<f64>() / n as f64
}

/// Rounds a plan to a permutation by maximizing the total coupling mass on
/// the chosen pairs. Exact plans are returned unchanged.
pub fn round_to_permutation(plan: &TransportPlan) -> Result<Vec<usize>> {
    if let Some(s) = plan.sigma() {
        return Ok(s.to_vec());
    }
    let n = plan.len();
    let pi = plan.coupling().expect("dense plan");
    let a = assignment::solve(n, &|i, j| -pi[i * n + j])?;
    Ok(a.row_to_col)
}

/// Worst violation of dual feasibility and of complementary slackness.
pub fn dual_residuals(plan: &TransportPlan, data: &Dataset, grid: &SphericalGrid) -> (f64, f64) {
    let n = plan.len();
    let Duals { f, g } = plan.duals();
    let mut infeasible: f64 = 0.0;
    let mut slack: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let r = dist2(data.point(i), grid.atom(j)) - f[i] - g[j];
            infeasible = infeasible.max(-r);
            if plan.mass(i, j) > 0.0 && plan.kind() == PlanKind::ExactPermutation {
                slack = slack.max(r.abs());
            }
        }
    }
    (infeasible, slack)
}

/// Primal cost minus dual objective, both per unit mass.
pub fn duality_gap(plan: &TransportPlan) -> f64 {
    let n = plan.len() as f64;
    let d = plan.duals();
    plan.cost() - (d.f.iter().sum::<f64>() + d.g.iter().sum::<f64>()) / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::Points;

    fn grid1(n: usize, n_r: usize, n_s: usize) -> SphericalGrid {
        SphericalGrid::build(n, 1, n_r, n_s, 0).unwrap()
    }

    #[test]
    fn sorted_order_in_one_dimension() {
        // Atoms are [0.5, -0.5, 0].
        let grid = grid1(3, 1, 2);
        let data = Dataset::from_rows(1, &[[-1.2], [0.3], [2.0]]).unwrap();
        let plan = solve_assignment(&data, &grid).unwrap();
        let sigma = plan.sigma().unwrap();
        let matched: Vec<f64> = sigma.iter().map(|&j| grid.atom(j)[0]).collect();
        assert_eq!(matched, vec![-0.5, 0.0, 0.5]);

        // Brute force over the 6 permutations.
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let best = perms.iter().map(|p| permutation_cost(&data, &grid, p)).fold(f64::INFINITY, f64::min);
        assert!((plan.cost() - best).abs() < 1e-12);
    }

    #[test]
    fn points_on_atoms_have_zero_cost() {
        let grid = SphericalGrid::build(13, 2, 3, 4, 0).unwrap();
        let order = [5, 0, 12, 7, 3, 9, 1, 11, 2, 8, 4, 10, 6];
        let data = Dataset::new(grid.atoms().subset(&order)).unwrap();
        let plan = solve_assignment(&data, &grid).unwrap();
        assert_eq!(plan.sigma().unwrap(), &order);
        assert!(plan.cost().abs() < 1e-15);
    }

    #[test]
    fn size_and_dimension_mismatch() {
        let grid = grid1(3, 1, 2);
        let data = Dataset::from_rows(1, &[[0.0], [1.0]]).unwrap();
        assert!(matches!(solve_assignment(&data, &grid), Err(Error::InvalidArgument(_))));
        let data2 = Dataset::from_rows(2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(solve_assignment(&data2, &grid), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn overflowing_costs_are_numeric_errors() {
        let grid = grid1(2, 1, 2);
        let data = Dataset::from_rows(1, &[[1e200], [0.0]]).unwrap();
        assert!(matches!(solve_assignment(&data, &grid), Err(Error::Numeric(_))));
    }

    #[test]
    fn canonical_duals_are_feasible_and_tight() {
        let grid = SphericalGrid::build(50, 2, 7, 7, 0).unwrap();
        let pts = crate::reference::sample_spherical_uniform(50, 2, 4).unwrap();
        let data = Dataset::new(Points::new(2, pts.coords().iter().map(|c| 3.0 * c + 1.0).collect()).unwrap()).unwrap();
        let plan = solve_assignment(&data, &grid).unwrap();
        let (infeasible, slack) = dual_residuals(&plan, &data, &grid);
        assert!(infeasible < 1e-10 && slack < 1e-10);
        assert_eq!(plan.duals().g[49], 0.0);
        assert!(duality_gap(&plan).abs() < 1e-8 * 50.0);
    }

    #[test]
    fn identity_transport_has_zero_duals() {
        // Symmetric exchange costs make the extreme duals opposite.
        for (n, d, n_r, n_s) in [(5, 1, 2, 2), (13, 2, 3, 4), (21, 3, 4, 5)] {
            let grid = SphericalGrid::build(n, d, n_r, n_s, 1).unwrap();
            let data = Dataset::new(grid.atoms().clone()).unwrap();
            let plan = solve_assignment(&data, &grid).unwrap();
            assert!(plan.duals().g.iter().chain(&plan.duals().f).all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn plan_json_roundtrip() {
        let grid = grid1(3, 1, 2);
        let data = Dataset::from_rows(1, &[[-1.2], [0.3], [2.0]]).unwrap();
        let plan = solve_assignment(&data, &grid).unwrap();
        let s = serde_json::to_string(&plan).unwrap();
        assert!(s.contains("\"kind\":\"exact-permutation\""));
        let back: TransportPlan = serde_json::from_str(&s).unwrap();
        assert_eq!(back, plan);
        let bad = r#"{"kind":"exact-permutation","sigma":[0,0],"duals":{"f":[0,0],"g":[0,0]},"cost":0}"#;
        assert!(serde_json::from_str::<TransportPlan>(bad).is_err());
    }
}
