use crate::points::{dist, dot, norm, Points};

/// Relative tolerance under which two affine pieces count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Above this many pieces the envelope builds a pruning index.
pub const PRUNING_THRESHOLD: usize = 10_000;

/// Maximum of affine functions `z -> <slope_k, z> + offset_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineEnvelope {
    slopes: Points,
    offsets: Vec<f64>,
    clusters: Vec<Cluster>,
}

/// Pieces whose slopes lie within `radius` of `center`; bounds the cluster by
/// `<center, z> + radius |z| + max_offset`.
#[derive(Debug, Clone, PartialEq)]
struct Cluster {
    center: Vec<f64>,
    radius: f64,
    max_offset: f64,
    members: Vec<usize>,
}

/// Value of an envelope with the indices of all pieces that attain it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeValue {
    pub value: f64,
    /// Sorted indices of the pieces within the tie tolerance of the maximum.
    pub achievers: Vec<usize>,
}

impl AffineEnvelope {
    pub fn new(slopes: Points, offsets: Vec<f64>) -> Self {
        assert_eq!(slopes.len(), offsets.len());
        assert!(!offsets.is_empty(), "an envelope needs at least one piece");
        let clusters = if offsets.len() > PRUNING_THRESHOLD { build_clusters(&slopes, &offsets) } else { vec![] };
        Self { slopes, offsets, clusters }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.slopes.dim()
    }

    pub fn slopes(&self) -> &Points {
        &self.slopes
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn is_indexed(&self) -> bool {
        !self.clusters.is_empty()
    }

    fn piece(&self, k: usize, z: &[f64]) -> f64 {
        dot(self.slopes.get(k), z) + self.offsets[k]
    }

    pub fn eval(&self, z: &[f64]) -> EnvelopeValue {
        if self.clusters.is_empty() {
            self.eval_scan(z)
        } else {
            self.eval_indexed(z)
        }
    }

    /// Full scan over all pieces.
    pub fn eval_scan(&self, z: &[f64]) -> EnvelopeValue {
        let values: Vec<f64> = (0..self.len()).map(|k| self.piece(k, z)).collect();
        let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = tie_tolerance(best);
        let achievers = (0..self.len()).filter(|&k| values[k] >= best - tol).collect();
        EnvelopeValue { value: best, achievers }
    }

    fn eval_indexed(&self, z: &[f64]) -> EnvelopeValue {
        let zn = norm(z);
        let mut order: Vec<(f64, usize)> = self
            .clusters
            .iter()
            .enumerate()
            .map(|(c, cl)| (dot(&cl.center, z) + cl.radius * zn + cl.max_offset, c))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut best = f64::NEG_INFINITY;
        let mut candidates: Vec<(usize, f64)> = Vec::new();
        for (bound, c) in order {
            // The bound is an upper bound up to rounding; keep a margin of
            // one tie tolerance so that nothing that could tie is skipped.
            if bound < best - 2.0 * tie_tolerance(best) {
                break;
            }
            for &k in &self.clusters[c].members {
                let v = self.piece(k, z);
                if v > best {
                    best = v;
                }
                if v >= best - tie_tolerance(best) {
                    candidates.push((k, v));
                }
            }
        }
        let tol = tie_tolerance(best);
        let mut achievers: Vec<usize> = candidates.into_iter().filter(|&(_, v)| v >= best - tol).map(|(k, _)| k).collect();
        achievers.sort_unstable();
        EnvelopeValue { value: best, achievers }
    }

    /// Mean of the slopes of the achieving pieces, summed in index order.
    pub fn mean_slope(&self, achievers: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for &k in achievers {
            for (a, s) in m.iter_mut().zip(self.slopes.get(k)) {
                *a += s;
            }
        }
        let w = achievers.len() as f64;
        m.iter_mut().for_each(|a| *a /= w);
        m
    }
}

fn tie_tolerance(best: f64) -> f64 {
    TIE_TOLERANCE * (1.0 + best.abs())
}

/// Greedy farthest-point clustering of the slopes into about `sqrt(n)`
/// groups, deterministic (first center is piece 0).
fn build_clusters(slopes: &Points, offsets: &[f64]) -> Vec<Cluster> {
    let n = slopes.len();
    let k = ((n as f64).sqrt().ceil() as usize).max(1);
    let mut centers = vec![0usize];
    let mut nearest = vec![0usize; n];
    let mut gap: Vec<f64> = (0..n).map(|i| dist(slopes.get(i), slopes.get(0))).collect();
    while centers.len() < k {
        let (far, &d) = gap.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
        if d == 0.0 {
            break;
        }
        let c = centers.len();
        centers.push(far);
        for i in 0..n {
            let di = dist(slopes.get(i), slopes.get(far));
            if di < gap[i] {
                gap[i] = di;
                nearest[i] = c;
            }
        }
    }
    let mut clusters: Vec<Cluster> = centers
        .iter()
        .map(|&c| Cluster { center: slopes.get(c).to_vec(), radius: 0.0, max_offset: f64::NEG_INFINITY, members: vec![] })
        .collect();
    for i in 0..n {
        let cl = &mut clusters[nearest[i]];
        cl.members.push(i);
        cl.max_offset = cl.max_offset.max(offsets[i]);
        cl.radius = cl.radius.max(dist(slopes.get(i), &cl.center));
    }
    for cl in &mut clusters {
        // Guard the bound against rounding in the distance computation.
        cl.radius = cl.radius * (1.0 + 1e-12) + 1e-15;
    }
    clusters
}
