use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::points::{norm, Points};

use super::sphere_directions;

/// Radii-by-directions layout of a grid before any atoms are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub n_radii: usize,
    pub n_directions: usize,
}

impl GridShape {
    /// Default factorization for `n` atoms: two directions in d = 1, about
    /// `sqrt(n)` shells otherwise.
    pub fn auto(n: usize, d: usize) -> Self {
        if n <= 1 {
            return Self { n_radii: 0, n_directions: 2 };
        }
        if d == 1 {
            return Self { n_radii: n / 2, n_directions: 2 };
        }
        let n_radii = ((n as f64).sqrt().floor() as usize).max(1);
        Self { n_radii, n_directions: n / n_radii }
    }
}

/// Discretization of the spherical uniform measure: `n_R` shells at radii
/// `i / (n_R + 1)` times `n_S` directions, plus `n_0 < n_S` copies of the
/// origin. Every atom carries weight `1/n`.
///
/// Atoms are stored shell-major: atom `i * n_S + k` sits at radius `radii[i]`
/// in direction `k`; the origin copies come last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFile", into = "GridFile")]
pub struct SphericalGrid {
    dim: usize,
    radii: Vec<f64>,
    directions: Points,
    origin_copies: usize,
    atoms: Points,
}

/// On-disk form of a grid; atoms are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub origin_copies: usize,
}

impl SphericalGrid {
    pub fn build(n: usize, d: usize, n_radii: usize, n_directions: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if n == 0 {
            return Err(invalid("grid needs at least one atom"));
        }
        if n_directions == 0 {
            return Err(invalid("need at least one direction"));
        }
        let full = n_radii
            .checked_mul(n_directions)
            .ok_or_else(|| invalid("grid size overflow"))?;
        if full > n {
            return Err(invalid(format!("{n_radii} radii x {n_directions} directions = {full} exceeds n = {n}")));
        }
        if n - full >= n_directions {
            return Err(invalid(format!(
                "remainder {} must be smaller than the number of directions {n_directions}",
                n - full
            )));
        }
        let directions = sphere_directions(d, n_directions, seed)?;
        let radii = (1..=n_radii).map(|i| i as f64 / (n_radii + 1) as f64).collect();
        Self::from_parts(d, radii, directions, n - full)
    }

    pub fn with_shape(n: usize, d: usize, shape: GridShape, seed: u64) -> Result<Self> {
        Self::build(n, d, shape.n_radii, shape.n_directions, seed)
    }

    fn from_parts(dim: usize, radii: Vec<f64>, directions: Points, origin_copies: usize) -> Result<Self> {
        let n_r = radii.len();
        for (i, r) in radii.iter().enumerate() {
            let expect = (i + 1) as f64 / (n_r + 1) as f64;
            if (r - expect).abs() > 1e-12 {
                return Err(invalid(format!("radius {i} is {r}, expected {expect}")));
            }
        }
        if directions.dim() != dim || directions.is_empty() {
            return Err(invalid("directions must be non-empty and match the grid dimension"));
        }
        if directions.iter().any(|s| (norm(s) - 1.0).abs() > 1e-12) {
            return Err(invalid("directions must have unit norm"));
        }
        if origin_copies >= directions.len() {
            return Err(invalid("origin copies must be fewer than the number of directions"));
        }
        let mut atoms = Points::empty(dim);
        for r in &radii {
            for s in directions.iter() {
                let mut u: Vec<f64> = s.iter().map(|c| c * r).collect();
                // Keep |u| <= r in floating point, so that every atom stays
                // within the largest radius exactly.
                while norm(&u) > *r {
                    u.iter_mut().for_each(|c| *c *= 1.0 - f64::EPSILON);
                }
                atoms.push(&u);
            }
        }
        for _ in 0..origin_copies {
            atoms.push(&vec![0.0; dim]);
        }
        Ok(Self { dim, radii, directions, origin_copies, atoms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn directions(&self) -> &Points {
        &self.directions
    }

    pub fn origin_copies(&self) -> usize {
        self.origin_copies
    }

    pub fn atoms(&self) -> &Points {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        self.atoms.get(j)
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn n_radii(&self) -> usize {
        self.radii.len()
    }

    pub fn n_directions(&self) -> usize {
        self.directions.len()
    }

    /// Largest radius `n_R / (n_R + 1)`, or 0 for an origin-only grid.
    pub fn max_radius(&self) -> f64 {
        self.radii.last().copied().unwrap_or(0.0)
    }

    /// `1 / (n_R + 1)`.
    pub fn shell_spacing(&self) -> f64 {
        1.0 / (self.radii.len() + 1) as f64
    }

    /// Shell index of atom `j`, `None` for origin copies.
    pub fn shell_of(&self, j: usize) -> Option<usize> {
        let full = self.radii.len() * self.directions.len();
        (j < full).then(|| j / self.directions.len())
    }

    /// Direction index of atom `j`, `None` for origin copies.
    pub fn direction_of(&self, j: usize) -> Option<usize> {
        let full = self.radii.len() * self.directions.len();
        (j < full).then(|| j % self.directions.len())
    }

    pub fn is_origin(&self, j: usize) -> bool {
        self.shell_of(j).is_none()
    }

    pub fn origin_atoms(&self) -> std::ops::Range<usize> {
        let full = self.radii.len() * self.directions.len();
        full..full + self.origin_copies
    }

    /// Hex SHA-256 of the serialized grid, used to tie files to their grid.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&GridFile::from(self.clone())).expect("grid serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl TryFrom<GridFile> for SphericalGrid {
    type Error = crate::Error;

    fn try_from(f: GridFile) -> Result<Self> {
        let directions = Points::from_rows(f.dim, &f.directions)?;
        Self::from_parts(f.dim, f.radii, directions, f.origin_copies)
    }
}

impl From<SphericalGrid> for GridFile {
    fn from(g: SphericalGrid) -> Self {
        Self { dim: g.dim, radii: g.radii, directions: g.directions.to_rows(), origin_copies: g.origin_copies }
    }
}
