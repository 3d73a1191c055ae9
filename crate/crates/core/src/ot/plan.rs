use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanKind {
    ExactPermutation,
    DenseCoupling,
}

/// Dual potentials for the cost `|x - u|^2`: `f` on sample points, `g` on
/// grid atoms, with `f_i + g_j <= |x_i - u_j|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// A coupling between `n` sample points and the `n` atoms of a grid.
///
/// The cost is the plain squared Euclidean distance (not halved), averaged
/// over the `1/n` atom weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanFile", into = "PlanFile")]
pub struct TransportPlan {
    kind: PlanKind,
    sigma: Vec<usize>,
    coupling: Vec<f64>,
    duals: Duals,
    cost: f64,
    iterations: Option<usize>,
}

impl TransportPlan {
    /// Exact plan sending point `i` to atom `sigma[i]`.
    pub fn exact(sigma: Vec<usize>, duals: Duals, cost: f64) -> Result<Self> {
        let n = sigma.len();
        let mut seen = vec![false; n];
        for &j in &sigma {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(invalid("sigma is not a permutation"));
            }
        }
        check_duals(&duals, n)?;
        Ok(Self { kind: PlanKind::ExactPermutation, sigma, coupling: vec![], duals, cost, iterations: None })
    }

    /// Dense plan from a row-major `n x n` coupling.
    pub fn dense(n: usize, coupling: Vec<f64>, duals: Duals, cost: f64, iterations: usize) -> Result<Self> {
        if coupling.len() != n * n {
            return Err(invalid("coupling must be n x n"));
        }
        if coupling.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("coupling entries must be nonnegative"));
        }
        check_duals(&duals, n)?;
        Ok(Self {
            kind: PlanKind::DenseCoupling,
            sigma: vec![],
            coupling,
            duals,
            cost,
            iterations: Some(iterations),
        })
    }

    pub fn kind(&self) -> PlanKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.duals.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.duals.f.is_empty()
    }

    /// `sigma[i]` is the atom matched to point `i` (exact plans only).
    pub fn sigma(&self) -> Option<&[usize]> {
        (self.kind == PlanKind::ExactPermutation).then_some(self.sigma.as_slice())
    }

    /// Inverse permutation: the point matched to each atom.
    pub fn sigma_inverse(&self) -> Option<Vec<usize>> {
        self.sigma().map(|s| {
            let mut inv = vec![0; s.len()];
            for (i, &j) in s.iter().enumerate() {
                inv[j] = i;
            }
            inv
        })
    }

    /// Row-major coupling (dense plans only).
    pub fn coupling(&self) -> Option<&[f64]> {
        (self.kind == PlanKind::DenseCoupling).then_some(self.coupling.as_slice())
    }

    pub fn duals(&self) -> &Duals {
        &self.duals
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn iterations(&self) -> Option<usize> {
        self.iterations
    }

    /// Mass of the coupling; for exact plans `1/n` on each matched pair.
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        let n = self.len();
        match self.kind {
            PlanKind::ExactPermutation => {
                if self.sigma[i] == j {
                    1.0 / n as f64
                } else {
                    0.0
                }
            }
            PlanKind::DenseCoupling => self.coupling[i * n + j],
        }
    }
}

fn check_duals(d: &Duals, n: usize) -> Result<()> {
    if d.f.len() != n || d.g.len() != n {
        return Err(invalid("dual vectors must have one entry per point and per atom"));
    }
    Ok(())
}

/// On-disk plan: `{kind, sigma[] | coupling, duals{f, g}, cost}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub kind: PlanKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<Vec<f64>>>,
    pub duals: Duals,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl From<TransportPlan> for PlanFile {
    fn from(p: TransportPlan) -> Self {
        let n = p.len();
        match p.kind {
            PlanKind::ExactPermutation => Self {
                kind: p.kind,
                sigma: Some(p.sigma),
                coupling: None,
                duals: p.duals,
                cost: p.cost,
                iterations: None,
            },
            PlanKind::DenseCoupling => Self {
                kind: p.kind,
                sigma: None,
                coupling: Some(p.coupling.chunks(n.max(1)).map(|r| r.iter().copied().map(round12).collect()).collect()),
                duals: p.duals,
                cost: p.cost,
                iterations: p.iterations,
            },
        }
    }
}

impl TryFrom<PlanFile> for TransportPlan {
    type Error = crate::Error;

    fn try_from(f: PlanFile) -> Result<Self> {
        match f.kind {
            PlanKind::ExactPermutation => {
                let sigma = f.sigma.ok_or_else(|| invalid("exact plan without sigma"))?;
                TransportPlan::exact(sigma, f.duals, f.cost)
            }
            PlanKind::DenseCoupling => {
                let rows = f.coupling.ok_or_else(|| invalid("dense plan without coupling"))?;
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(invalid("coupling must be square"));
                }
                TransportPlan::dense(n, rows.concat(), f.duals, f.cost, f.iterations.unwrap_or(0))
            }
        }
    }
}
