use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::points::{dist, dot, norm, Points};

/// Half-space `<normal, x> <= offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// What is known about the (convex) support of the distribution that
/// produced a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SupportHint {
    Unbounded,
    HalfSpaces { halfspaces: Vec<HalfSpace> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl SupportHint {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.depth(x) >= 0.0
    }

    /// Distance from `x` to the complement of the support (negative outside,
    /// infinite for unbounded supports).
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self {
            SupportHint::Unbounded => f64::INFINITY,
            SupportHint::HalfSpaces { halfspaces } => halfspaces
                .iter()
                .map(|h| (h.offset - dot(&h.normal, x)) / norm(&h.normal))
                .fold(f64::INFINITY, f64::min),
            SupportHint::Ball { center, radius } => radius - dist(center, x),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, SupportHint::Unbounded)
    }
}

/// A sample of `n >= 1` finite points in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Points,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support_hint: Option<SupportHint>,
}

impl Dataset {
    pub fn new(points: Points) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("dataset must contain at least one point"));
        }
        if !points.all_finite() {
            return Err(invalid("dataset contains non-finite coordinates"));
        }
        Ok(Self { points, support_hint: None })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        Self::new(Points::from_rows(dim, rows)?)
    }

    pub fn with_support(mut self, hint: SupportHint) -> Self {
        self.support_hint = Some(hint);
        self
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.get(i)
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn support_hint(&self) -> Option<&SupportHint> {
        self.support_hint.as_ref()
    }

    /// Same points moved by `f`, without a support hint.
    pub fn transformed(&self, f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        Self::new(self.points.map(f))
    }
}
