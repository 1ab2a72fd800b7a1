//! Planar helpers for payoff regions: convex hulls and tolerant containment.

pub type Point = [f64; 2];

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Drops points within `tol` (Euclidean) of an earlier point.
pub fn dedup(points: &[Point], tol: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        if !out.iter().any(|&q| dist(p, q) <= tol) {
            out.push(p);
        }
    }
    out
}

/// Convex hull in counter-clockwise order starting from the lowest-x (then
/// lowest-y) vertex. Collinear boundary points are dropped; degenerate inputs
/// give one or two points.
pub fn convex_hull(points: &[Point], tol: f64) -> Vec<Point> {
    let mut pts = dedup(points, tol);
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    if pts.len() < 3 {
        return pts;
    }
    let area_tol = |a: Point, b: Point| tol * dist(a, b).max(tol);
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 {
            let (a, b) = (lower[lower.len() - 2], lower[lower.len() - 1]);
            if cross(a, b, p) <= area_tol(a, p) {
                lower.pop();
            } else {
                break;
            }
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 {
            let (a, b) = (upper[upper.len() - 2], upper[upper.len() - 1]);
            if cross(a, b, p) <= area_tol(a, p) {
                upper.pop();
            } else {
                break;
            }
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Whether `p` lies in the convex CCW polygon `poly`, allowing `slack`
/// distance outside it.
pub fn contains(poly: &[Point], p: Point, slack: f64) -> bool {
    match poly.len() {
        0 => false,
        1 => dist(poly[0], p) <= slack,
        2 => segment_distance(p, poly[0], poly[1]) <= slack,
        n => {
            let inside = (0..n).all(|k| {
                let (a, b) = (poly[k], poly[(k + 1) % n]);
                cross(a, b, p) / dist(a, b) >= -slack
            });
            inside || (0..n).any(|k| segment_distance(p, poly[k], poly[(k + 1) % n]) <= slack)
        }
    }
}

/// Twice the signed area; positive for CCW order.
pub fn signed_area2(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum()
}
