//! Dense linear assignment by shortest augmenting paths.
//!
//! Column prices are warm-started by an epsilon-scaling auction, then every
//! row is matched by a Dijkstra-style shortest augmenting path
//! (Jonker-Volgenant augmentation). The augmentation phase is exact for any
//! starting prices; the auction only shortens the paths. Costs are read
//! through a closure so large squared-distance matrices never need to be
//! materialized.

use crate::error::{Error, Result};

/// Optimal matching `row -> col` with a complementary-slack dual pair:
/// `c(i, j) - row_dual[i] - col_dual[j] >= 0`, with equality on matched pairs.
#[derive(Debug, Clone)]
pub(crate) struct Assignment {
    pub row_to_col: Vec<usize>,
    pub row_dual: Vec<f64>,
    pub col_dual: Vec<f64>,
}

const NONE: usize = usize::MAX;

pub(crate) fn solve<C: Fn(usize, usize) -> f64>(n: usize, cost: &C) -> Result<Assignment> {
    if n == 0 {
        return Ok(Assignment { row_to_col: vec![], row_dual: vec![], col_dual: vec![] });
    }
    let mut v = auction_prices(n, cost)?;
    let mut x = vec![NONE; n]; // row -> col
    let mut y = vec![NONE; n]; // col -> row

    let mut d = vec![0.0; n];
    let mut pred = vec![0usize; n];
    let mut cols: Vec<usize> = (0..n).collect();
    for start in 0..n {
        let mut j = find_path(n, cost, start, &y, &mut v, &mut d, &mut pred, &mut cols);
        // Flip the alternating path back to `start`.
        loop {
            let i = pred[j];
            y[j] = i;
            let prev = x[i];
            x[i] = j;
            if i == start {
                break;
            }
            j = prev;
        }
    }

    let row_dual: Vec<f64> = (0..n).map(|i| cost(i, x[i]) - v[x[i]]).collect();
    if row_dual.iter().chain(&v).any(|c| !c.is_finite()) {
        return Err(Error::Numeric("assignment duals are not finite".into()));
    }
    Ok(Assignment { row_to_col: x, row_dual, col_dual: v })
}

/// Column duals `v = -p` from a Gauss-Seidel auction on `min c(i, j) + p_j`,
/// with epsilon shrinking geometrically from a quarter of the cost range.
fn auction_prices<C: Fn(usize, usize) -> f64>(n: usize, cost: &C) -> Result<Vec<f64>> {
    let mut c_max: f64 = 0.0;
    let mut c_min = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let c = cost(i, j);
            if !c.is_finite() {
                return Err(Error::Numeric(format!("cost ({i}, {j}) is not finite")));
            }
            c_max = c_max.max(c);
            c_min = c_min.min(c);
        }
    }
    let range = c_max - c_min;
    let mut p = vec![0.0; n];
    if n == 1 || range == 0.0 {
        return Ok(p);
    }
    let eps_min = range * AUCTION_FINAL_EPS / n as f64;
    let mut eps = range / 4.0;
    let mut owner = vec![NONE; n];
    let mut queue: Vec<usize> = Vec::with_capacity(n);
    loop {
        owner.iter_mut().for_each(|o| *o = NONE);
        queue.clear();
        queue.extend((0..n).rev());
        while let Some(i) = queue.pop() {
            let mut j1 = 0;
            let mut w1 = f64::INFINITY;
            let mut w2 = f64::INFINITY;
            for (j, pj) in p.iter().enumerate() {
                let w = cost(i, j) + pj;
                if w < w2 {
                    if w < w1 {
                        w2 = w1;
                        w1 = w;
                        j1 = j;
                    } else {
                        w2 = w;
                    }
                }
            }
            p[j1] += w2 - w1 + eps;
            let prev = std::mem::replace(&mut owner[j1], i);
            if prev != NONE {
                queue.push(prev);
            }
        }
        if eps <= eps_min {
            break;
        }
        eps = (eps / AUCTION_EPS_FACTOR).max(eps_min);
    }
    Ok(p.into_iter().map(|q| -q).collect())
}

const AUCTION_FINAL_EPS: f64 = 1e-6;
const AUCTION_EPS_FACTOR: f64 = 6.0;

/// Shortest augmenting path from `start`; returns the free column reached and
/// updates the column duals of the settled columns.
#[allow(clippy::too_many_arguments)]
fn find_path<C: Fn(usize, usize) -> f64>(
    n: usize,
    cost: &C,
    start: usize,
    y: &[usize],
    v: &mut [f64],
    d: &mut [f64],
    pred: &mut [usize],
    cols: &mut [usize],
) -> usize {
    for (k, c) in cols.iter_mut().enumerate() {
        *c = k;
    }
    for j in 0..n {
        d[j] = cost(start, j) - v[j];
        pred[j] = start;
    }
    let mut lo = 0;
    let mut hi = 0;
    let mut n_ready = 0;
    let mut final_j = NONE;
    while final_j == NONE {
        if lo == hi {
            n_ready = lo;
            // Move every column at the current minimum distance into [lo, hi).
            hi = lo + 1;
            let mut mind = d[cols[lo]];
            for k in hi..n {
                let j = cols[k];
                if d[j] <= mind {
                    if d[j] < mind {
                        hi = lo;
                        mind = d[j];
                    }
                    cols.swap(k, hi);
                    hi += 1;
                }
            }
            for &j in &cols[lo..hi] {
                if y[j] == NONE {
                    final_j = j;
                    break;
                }
            }
        }
        if final_j == NONE {
            final_j = scan(n, cost, &mut lo, &mut hi, d, cols, pred, y, v);
        }
    }
    let mind = d[final_j];
    for &j in &cols[..n_ready] {
        v[j] += d[j] - mind;
    }
    final_j
}

#[allow(clippy::too_many_arguments)]
fn scan<C: Fn(usize, usize) -> f64>(
    n: usize,
    cost: &C,
    lo: &mut usize,
    hi: &mut usize,
    d: &mut [f64],
    cols: &mut [usize],
    pred: &mut [usize],
    y: &[usize],
    v: &[f64],
) -> usize {
    while *lo != *hi {
        let j = cols[*lo];
        *lo += 1;
        let i = y[j];
        let mind = d[j];
        let h = cost(i, j) - v[j] - mind;
        let mut k = *hi;
        while k < n {
            let j = cols[k];
            let cred = cost(i, j) - v[j] - h;
            if cred < d[j] {
                d[j] = cred;
                pred[j] = i;
                if cred == mind {
                    if y[j] == NONE {
                        return j;
                    }
                    cols.swap(k, *hi);
                    *hi += 1;
                }
            }
            k += 1;
        }
    }
    NONE
}

/// Replaces the matching by the lexicographically smallest perfect matching
/// of the equality graph `{(i, j) : c(i, j) - u_i - v_j <= tol}`.
///
/// Every perfect matching of that graph is optimal, and every optimal
/// matching lies in it, so the result is the lexicographically smallest
/// optimal permutation (up to `tol`).
pub(crate) fn lexicographic_min<C: Fn(usize, usize) -> f64>(a: &mut Assignment, cost: &C, tol: f64) {
    let n = a.row_to_col.len();
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| cost(i, j) - a.row_dual[i] - a.col_dual[j] <= tol).collect())
        .collect();
    if tight.iter().all(|t| t.len() <= 1) {
        return;
    }
    let x = &mut a.row_to_col;
    let mut y = vec![0usize; n];
    for (i, &j) in x.iter().enumerate() {
        y[j] = i;
    }
    let mut fixed = vec![false; n];
    let mut via = vec![NONE; n]; // BFS parent: row -> (column used to reach it)
    let mut parent = vec![NONE; n]; // BFS parent: row -> previous row
    for i in 0..n {
        if tight[i].len() > 1 {
            for &j in &tight[i] {
                if j == x[i] {
                    break;
                }
                let r0 = y[j];
                if fixed[r0] {
                    continue;
                }
                // Alternating path r0 -> ... -> column x[i], avoiding column j,
                // row i and fixed rows.
                let target = x[i];
                via.iter_mut().for_each(|c| *c = NONE);
                parent.iter_mut().for_each(|c| *c = NONE);
                let mut queue = std::collections::VecDeque::from([r0]);
                parent[r0] = r0;
                let mut end = None;
                'bfs: while let Some(r) = queue.pop_front() {
                    for &c in &tight[r] {
                        if c == j || c == x[r] {
                            continue;
                        }
                        if c == target {
                            end = Some((r, c));
                            break 'bfs;
                        }
                        let r2 = y[c];
                        if r2 == i || fixed[r2] || parent[r2] != NONE {
                            continue;
                        }
                        parent[r2] = r;
                        via[r2] = c;
                        queue.push_back(r2);
                    }
                }
                if let Some((mut r, mut c)) = end {
                    loop {
                        x[r] = c;
                        y[c] = r;
                        if r == r0 {
                            break;
                        }
                        c = via[r];
                        r = parent[r];
                    }
                    x[i] = j;
                    y[j] = i;
                    break;
                }
            }
        }
        fixed[i] = true;
    }
}
