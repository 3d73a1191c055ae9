use serde::{Deserialize, Serialize};

use super::{check_compatible, Dataset, TransportPlan};
use crate::error::{invalid, Error, Result};
use crate::points::dot;
use crate::reference::SphericalGrid;

/// Violations below this margin are attributed to rounding.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub max_cycle_length: usize,
    pub cycles_checked: u64,
    pub violations: u64,
    /// Largest amount by which a cycle sum falls below zero (0 if none).
    pub worst_margin: f64,
}

/// Enumerates every cycle of length 2..=k among the matched pairs of an exact
/// plan and checks `sum_t <x_{i_t}, u_{s(i_t)} - u_{s(i_{t+1})}> >= 0`.
pub fn verify_cyclical_monotonicity(
    plan: &TransportPlan,
    data: &Dataset,
    grid: &SphericalGrid,
    k: usize,
) -> Result<MonotonicityReport> {
    let sigma = plan.sigma().ok_or(Error::UnsupportedPlanKind("dense-coupling"))?;
    check_compatible(data, grid)?;
    if !(2..=3).contains(&k) {
        return Err(invalid("cycle length must be 2 or 3"));
    }
    let n = sigma.len();
    // gain(i, j) = <x_i, u_{s(i)} - u_{s(j)}>
    let own: Vec<f64> = (0..n).map(|i| dot(data.point(i), grid.atom(sigma[i]))).collect();
    let gain = |i: usize, j: usize| own[i] - dot(data.point(i), grid.atom(sigma[j]));

    let mut report = MonotonicityReport { max_cycle_length: k, cycles_checked: 0, violations: 0, worst_margin: 0.0 };
    let mut record = |sum: f64| {
        report.cycles_checked += 1;
        if sum < -MONOTONICITY_TOLERANCE {
            report.violations += 1;
            report.worst_margin = report.worst_margin.max(-sum);
        }
    };
    for a in 0..n {
        for b in a + 1..n {
            let ab = gain(a, b);
            let ba = gain(b, a);
            record(ab + ba);
            if k == 3 {
                for c in b + 1..n {
                    record(ab + gain(b, c) + gain(c, a));
                    record(gain(a, c) + gain(c, b) + ba);
                }
            }
        }
    }
    Ok(report)
}
