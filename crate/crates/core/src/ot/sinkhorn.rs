use serde::{Deserialize, Serialize};

use super::{check_compatible, Dataset, Duals, TransportPlan};
use crate::error::{invalid, Error, Result};
use crate::points::dist2;
use crate::reference::SphericalGrid;

/// Parameters of the entropic solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkhornOptions {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { epsilon: 0.01, tol: 1e-9, max_iter: 100_000 }
    }
}

/// Entropic optimal transport in the log domain.
///
/// The coupling is `pi_ij = exp((f_i + g_j - C_ij) / eps) / n^2` with
/// `C_ij = |x_i - u_j|^2`, so `f` and `g` are on the scale of the cost. The
/// regularization is annealed geometrically from the cost range down to
/// `epsilon`, warm-starting the duals; only the final stage counts towards
/// convergence. The returned duals are shifted so that `g` vanishes on the
/// first origin atom (or on the atom of smallest norm).
pub fn solve_sinkhorn(data: &Dataset, grid: &SphericalGrid, opts: SinkhornOptions) -> Result<TransportPlan> {
    check_compatible(data, grid)?;
    if !(opts.epsilon > 0.0) || !opts.epsilon.is_finite() {
        return Err(invalid("epsilon must be positive"));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let n = data.len();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = dist2(data.point(i), grid.atom(j));
        }
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite transport costs".into()));
    }
    let c_max = c.iter().cloned().fold(0.0, f64::max);

    let log_n = (n as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut scratch = vec![0.0; n];

    let mut eps = c_max.max(opts.epsilon);
    let mut iterations = 0;
    loop {
        let last_stage = eps <= opts.epsilon;
        let budget = if last_stage { opts.max_iter } else { 50.min(opts.max_iter) };
        let mut err = f64::INFINITY;
        for _ in 0..budget {
            update_f(&c, n, eps, log_n, &g, &mut f, &mut scratch);
            update_g(&c, n, eps, log_n, &f, &mut g, &mut scratch);
            iterations += 1;
            err = row_error(&c, n, eps, log_n, &f, &g);
            if err <= opts.tol {
                break;
            }
        }
        if last_stage {
            if !(err <= opts.tol) {
                return Err(Error::ConvergenceFailure { iterations, marginal_error: err });
            }
            break;
        }
        eps = (eps * 0.5).max(opts.epsilon);
    }

    let root = if grid.origin_copies() > 0 {
        grid.origin_atoms().start
    } else {
        (0..n)
            .min_by(|&a, &b| dist2(grid.atom(a), grid.atom(a)).total_cmp(&dist2(grid.atom(b), grid.atom(b))))
            .expect("nonempty grid")
    };
    let shift = g[root];
    let eps = opts.epsilon;
    let mut pi = vec![0.0; n * n];
    let mut cost = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = ((f[i] + g[j] - c[i * n + j]) / eps - 2.0 * log_n).exp();
            pi[i * n + j] = p;
            cost += p * c[i * n + j];
        }
    }
    for v in &mut g {
        *v -= shift;
    }
    for v in &mut f {
        *v += shift;
    }
    TransportPlan::dense(n, pi, Duals { f, g }, cost, iterations)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn update_f(c: &[f64], n: usize, eps: f64, log_n: f64, g: &[f64], f: &mut [f64], s: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            s[j] = (g[j] - c[i * n + j]) / eps;
        }
        f[i] = -eps * (log_sum_exp(s) - log_n);
    }
}

fn update_g(c: &[f64], n: usize, eps: f64, log_n: f64, f: &[f64], g: &mut [f64], s: &mut [f64]) {
    for j in 0..n {
        for i in 0..n {
            s[i] = (f[i] - c[i * n + j]) / eps;
        }
        g[j] = -eps * (log_sum_exp(s) - log_n);
    }
}

/// L1 distance between the row marginal and the uniform weights.
fn row_error(c: &[f64], n: usize, eps: f64, log_n: f64, f: &[f64], g: &[f64]) -> f64 {
    let w = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            let row: f64 = (0..n).map(|j| ((f[i] + g[j] - c[i * n + j]) / eps - 2.0 * log_n).exp()).sum();
            (row - w).abs()
        })
        .sum()
}
