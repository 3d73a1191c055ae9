//! Planar convex hulls and polygons.

/// Convex hull of planar points in counter-clockwise order, without
/// collinear points (Andrew's monotone chain).
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], *q) <= 0.0 {
                hull.pop();
            }
            hull.push(*q);
        }
        hull.pop();
    }
    hull
}

/// `(b - a) x (c - a)`.
pub fn cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Whether `q` lies in the counter-clockwise convex polygon, allowing
/// `slack` of outward distance.
pub fn in_convex_polygon(hull: &[[f64; 2]], q: [f64; 2], slack: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => dist2d(hull[0], q) <= slack,
        2 => segment_distance(hull[0], hull[1], q) <= slack,
        n => (0..n).all(|k| {
            let (a, b) = (hull[k], hull[(k + 1) % n]);
            cross(a, b, q) / dist2d(a, b) >= -slack
        }),
    }
}

/// Area of a simple polygon (shoelace formula, positive when
/// counter-clockwise).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n).map(|k| poly[k][0] * poly[(k + 1) % n][1] - poly[(k + 1) % n][0] * poly[k][1]).sum::<f64>() / 2.0
}

/// `m` points evenly spaced by arc length along the closed polygon.
pub fn polygon_perimeter_sample(poly: &[[f64; 2]], m: usize) -> Vec<[f64; 2]> {
    let n = poly.len();
    let lengths: Vec<f64> = (0..n).map(|k| dist2d(poly[k], poly[(k + 1) % n])).collect();
    let total: f64 = lengths.iter().sum();
    let mut out = Vec::with_capacity(m);
    let (mut edge, mut walked) = (0, 0.0);
    for t in 0..m {
        let s = total * t as f64 / m as f64;
        while edge + 1 < n && walked + lengths[edge] < s {
            walked += lengths[edge];
            edge += 1;
        }
        let w = if lengths[edge] > 0.0 { (s - walked) / lengths[edge] } else { 0.0 };
        let (a, b) = (poly[edge], poly[(edge + 1) % n]);
        out.push([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]);
    }
    out
}

fn dist2d(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn segment_distance(a: [f64; 2], b: [f64; 2], q: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist2d([a[0] + t * dx, a[1] + t * dy], q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_hull_drops_interior_and_collinear_points() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let hull = convex_hull_2d(&pts);
        assert_eq!(hull, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert_eq!(polygon_area(&hull), 1.0);
        assert!(in_convex_polygon(&hull, [0.5, 0.5], 0.0));
        assert!(in_convex_polygon(&hull, [1.0, 0.5], 0.0));
        assert!(!in_convex_polygon(&hull, [1.01, 0.5], 0.0));
        assert!(in_convex_polygon(&hull, [1.01, 0.5], 0.02));
    }

    #[test]
    fn perimeter_sample_is_evenly_spaced() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let s = polygon_perimeter_sample(&sq, 8);
        assert_eq!(s[1], [0.5, 0.0]);
        assert_eq!(s[2], [1.0, 0.0]);
        assert_eq!(s[5], [0.5, 1.0]);
    }
}
