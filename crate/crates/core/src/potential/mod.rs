//! Convex potentials of the empirical center-outward maps.
//!
//! With the cost `|x - u|^2` and duals `(f, g)`, the grid-side potential is
//! `psi_j = (|u_j|^2 - g_j) / 2` and its Legendre transform on the sample is
//! `phi_i = (|x_i|^2 - f_i) / 2`. Both are evaluated off the grid through
//! maxima of affine functions:
//!
//! * `phi(x) = max_j <u_j, x> - psi_j`, whose gradient is `F(x)`;
//! * `psi~(z) = max_b <y_b, z - u_b> + psi_b`, the minimal extension, whose
//!   gradient is `Q(z)`.

mod envelope;
mod radial;

pub use envelope::{AffineEnvelope, EnvelopeValue, PRUNING_THRESHOLD, TIE_TOLERANCE};
pub use radial::{RadialMap, RadialProfile};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ot::{Dataset, TransportPlan};
use crate::points::{dist, dot, norm, Points};
use crate::reference::SphericalGrid;

/// A center-outward distribution function together with its quantile
/// function.
pub trait CenterOutwardMap {
    fn dim(&self) -> usize;
    /// `F(x)`, a point of the closed unit ball.
    fn forward(&self, x: &[f64]) -> Vec<f64>;
    /// `Q(u)` for `|u| < 1`.
    fn quantile(&self, u: &[f64]) -> Result<Vec<f64>>;
}

/// `psi` on the grid atoms, with the data point matched to each atom.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePotential {
    pub grid: SphericalGrid,
    pub psi_values: Vec<f64>,
    pub matched_points: Points,
}

/// One affine minorant `z -> <y_b, z - u_b> + c` of the extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportLine {
    pub u_b: Vec<f64>,
    pub y_b: Vec<f64>,
    pub c: f64,
}

/// The minimal extension `psi~(z) = max_b <y_b, z - u_b> + psi(u_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPotential {
    pub support_lines: Vec<SupportLine>,
}

/// Value of a map together with the pieces that realize it. Several
/// achievers mean the potential is not differentiable there and the value is
/// their average.
#[derive(Debug, Clone, PartialEq)]
pub struct MapValue {
    pub point: Vec<f64>,
    pub achievers: Vec<usize>,
}

impl MapValue {
    pub fn is_multiple(&self) -> bool {
        self.achievers.len() > 1
    }
}

/// Both potentials with their evaluators.
#[derive(Debug, Clone)]
pub struct Potentials {
    discrete: DiscretePotential,
    extended: ExtendedPotential,
    /// `phi`: slopes are the atoms.
    phi: AffineEnvelope,
    /// `psi~`: slopes are the matched points.
    psi: AffineEnvelope,
    /// Atoms and matched points by exact coordinates.
    atom_index: HashMap<Vec<u64>, Vec<usize>>,
    point_index: HashMap<Vec<u64>, Vec<usize>>,
}

fn exact_key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|c| (c + 0.0).to_bits()).collect()
}

fn exact_index(points: &Points) -> HashMap<Vec<u64>, Vec<usize>> {
    let mut index: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for (k, p) in points.iter().enumerate() {
        index.entry(exact_key(p)).or_default().push(k);
    }
    index
}

/// Builds `psi` from the grid-side duals and the support lines from the
/// matched pairs, then shifts `psi` so that it vanishes at the origin.
///
/// Exact plans match each atom with one point; dense plans use the
/// barycentric projection `n sum_i pi_ij x_i`.
pub fn build_potentials(plan: &TransportPlan, data: &Dataset, grid: &SphericalGrid) -> Result<Potentials> {
    let n = grid.len();
    if plan.len() != n || data.len() != n || data.dim() != grid.dim() {
        return Err(invalid("plan, data and grid sizes do not agree"));
    }
    let d = grid.dim();
    let psi: Vec<f64> = (0..n).map(|j| 0.5 * (dot(grid.atom(j), grid.atom(j)) - plan.duals().g[j])).collect();
    let matched = match plan.sigma_inverse() {
        Some(inv) => data.points().subset(&inv),
        None => {
            let pi = plan.coupling().expect("dense plan");
            let mut coords = vec![0.0; n * d];
            for j in 0..n {
                let y = &mut coords[j * d..(j + 1) * d];
                for i in 0..n {
                    let w = pi[i * n + j] * n as f64;
                    for (a, x) in y.iter_mut().zip(data.point(i)) {
                        *a += w * x;
                    }
                }
            }
            Points::new(d, coords)?
        }
    };
    let mut psi = psi;
    if grid.origin_copies() == 0 {
        // Without an origin atom, normalize the extension instead.
        let shift = (0..n).map(|b| psi[b] - dot(matched.get(b), grid.atom(b))).fold(f64::NEG_INFINITY, f64::max);
        psi.iter_mut().for_each(|v| *v -= shift);
    }
    Potentials::from_values(grid.clone(), psi, matched)
}

impl Potentials {
    /// Potentials from `psi` on the atoms and one matched point per atom.
    /// `psi` is shifted to vanish at the origin copies, if the grid has any.
    pub fn from_values(grid: SphericalGrid, mut psi: Vec<f64>, matched_points: Points) -> Result<Self> {
        let n = grid.len();
        if psi.len() != n || matched_points.len() != n || matched_points.dim() != grid.dim() {
            return Err(invalid("need one psi value and one matched point per atom"));
        }
        if psi.iter().any(|v| !v.is_finite()) || !matched_points.all_finite() {
            return Err(Error::Numeric("potential values are not finite".into()));
        }
        if grid.origin_copies() > 0 {
            let shift = psi[grid.origin_atoms().start];
            psi.iter_mut().for_each(|v| *v -= shift);
            for j in grid.origin_atoms() {
                psi[j] = 0.0;
            }
        }
        let line_offsets: Vec<f64> = (0..n).map(|b| psi[b] - dot(matched_points.get(b), grid.atom(b))).collect();
        let phi = AffineEnvelope::new(grid.atoms().clone(), psi.iter().map(|v| -v).collect());
        let psi_env = AffineEnvelope::new(matched_points.clone(), line_offsets);
        let support_lines = (0..n)
            .map(|b| SupportLine { u_b: grid.atom(b).to_vec(), y_b: matched_points.get(b).to_vec(), c: psi[b] })
            .collect();
        Ok(Self {
            atom_index: exact_index(grid.atoms()),
            point_index: exact_index(&matched_points),
            discrete: DiscretePotential { grid, psi_values: psi, matched_points },
            extended: ExtendedPotential { support_lines },
            phi,
            psi: psi_env,
        })
    }

    pub fn discrete(&self) -> &DiscretePotential {
        &self.discrete
    }

    pub fn extended(&self) -> &ExtendedPotential {
        &self.extended
    }

    pub fn grid(&self) -> &SphericalGrid {
        &self.discrete.grid
    }

    pub fn dim(&self) -> usize {
        self.discrete.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.discrete.psi_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn psi_values(&self) -> &[f64] {
        &self.discrete.psi_values
    }

    pub fn matched_points(&self) -> &Points {
        &self.discrete.matched_points
    }

    /// Atoms whose matched point is exactly `x`.
    pub fn atoms_matched_to(&self, x: &[f64]) -> &[usize] {
        self.point_index.get(&exact_key(x)).map_or(&[], Vec::as_slice)
    }

    /// `phi(x) = max_j <u_j, x> - psi_j` with every achieving atom.
    pub fn legendre_transform(&self, x: &[f64]) -> EnvelopeValue {
        self.phi.eval(x)
    }

    /// `psi~(z)` with every achieving support line.
    pub fn psi_tilde(&self, z: &[f64]) -> EnvelopeValue {
        self.psi.eval(z)
    }

    /// Empirical center-outward distribution function: the achieving atom of
    /// the Legendre transform, averaged over ties. At a matched point whose
    /// atom achieves the maximum, only the atoms at that location count.
    pub fn forward(&self, x: &[f64]) -> MapValue {
        let mut achievers = self.phi.eval(x).achievers;
        if let Some(hits) = self.point_index.get(&exact_key(x)) {
            let grid = self.grid();
            let own: Vec<&[f64]> = hits.iter().filter(|b| achievers.binary_search(b).is_ok()).map(|&b| grid.atom(b)).collect();
            if !own.is_empty() {
                achievers.retain(|&k| own.contains(&grid.atom(k)));
            }
        }
        MapValue { point: self.phi.mean_slope(&achievers), achievers }
    }

    /// Empirical center-outward quantile function: the slope of the active
    /// support line of the extension, averaged over ties.
    pub fn quantile(&self, u: &[f64]) -> Result<MapValue> {
        let r = norm(u);
        if !(r < 1.0) {
            return Err(Error::OutOfDomain { norm: r });
        }
        let mut achievers = self.psi.eval(u).achievers;
        if let Some(hits) = self.atom_index.get(&exact_key(u)) {
            // On a grid atom the active lines are those of the atom itself.
            let own: Vec<usize> = hits.iter().copied().filter(|b| achievers.binary_search(b).is_ok()).collect();
            if !own.is_empty() {
                achievers = own;
            }
        }
        Ok(MapValue { point: self.psi.mean_slope(&achievers), achievers })
    }

    /// `|Q(F(x)) - x|`.
    pub fn check_inverse(&self, x: &[f64]) -> f64 {
        let u = self.forward(x).point;
        match self.quantile(&u) {
            Ok(q) => dist(&q.point, x),
            Err(_) => f64::INFINITY,
        }
    }

    /// Largest violation of `psi_j = max_b <y_b, u_j - u_b> + psi_b` over the
    /// atoms.
    pub fn self_consistency(&self) -> f64 {
        let grid = self.grid();
        (0..self.len()).map(|j| (self.psi.eval(grid.atom(j)).value - self.psi_values()[j]).abs()).fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> PotentialFile {
        PotentialFile {
            grid_ref: self.grid().fingerprint(),
            dim: self.dim(),
            psi: self.discrete.psi_values.clone(),
            lines: self.extended.support_lines.clone(),
        }
    }

    /// Rebuilds potentials saved by [`Potentials::to_file`] on their grid.
    pub fn from_file(file: PotentialFile, grid: SphericalGrid) -> Result<Self> {
        if file.grid_ref != grid.fingerprint() {
            return Err(invalid("potential file refers to a different grid"));
        }
        if file.lines.len() != grid.len() || file.dim != grid.dim() {
            return Err(invalid("potential file does not match the grid size"));
        }
        for (b, line) in file.lines.iter().enumerate() {
            if line.u_b.as_slice() != grid.atom(b) || line.c != file.psi[b] {
                return Err(invalid(format!("support line {b} is inconsistent with the grid")));
            }
        }
        let rows: Vec<Vec<f64>> = file.lines.into_iter().map(|l| l.y_b).collect();
        Self::from_values(grid, file.psi, Points::from_rows(file.dim, &rows)?)
    }
}

impl CenterOutwardMap for Potentials {
    fn dim(&self) -> usize {
        Potentials::dim(self)
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        Potentials::forward(self, x).point
    }

    fn quantile(&self, u: &[f64]) -> Result<Vec<f64>> {
        Potentials::quantile(self, u).map(|v| v.point)
    }
}

/// On-disk form of the potentials. `grid_ref` is the grid fingerprint and
/// `c` is `psi(u_b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    pub grid_ref: String,
    pub dim: usize,
    pub psi: Vec<f64>,
    pub lines: Vec<SupportLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub pairs_checked: usize,
    pub pairs_skipped: usize,
    pub worst_ratio: f64,
}

/// Largest `|phi(x) - phi(x')| / |x - x'|` over the pairs; coincident pairs
/// are skipped.
pub fn lipschitz_audit(pot: &Potentials, pairs: &[(Vec<f64>, Vec<f64>)]) -> LipschitzReport {
    let mut report = LipschitzReport { pairs_checked: 0, pairs_skipped: 0, worst_ratio: 0.0 };
    for (a, b) in pairs {
        let h = dist(a, b);
        if h == 0.0 {
            report.pairs_skipped += 1;
            continue;
        }
        let ratio = (pot.legendre_transform(a).value - pot.legendre_transform(b).value).abs() / h;
        report.pairs_checked += 1;
        report.worst_ratio = report.worst_ratio.max(ratio);
    }
    report
}
