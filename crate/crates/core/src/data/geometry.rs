use crate::error::{Error, Result};

/// Delaunay edges of a planar point set by the empty-circumcircle test.
///
/// Every non-degenerate triple whose circumcircle has no other point strictly
/// inside contributes its three edges. Cocircular configurations admit
/// crossing candidates; they are resolved by accepting edges in order of
/// `(lower endpoint, higher endpoint)` and dropping any edge that crosses one
/// already accepted, so the diagonal touching the lowest index wins. A fully
/// collinear set falls back to the path along the line.
///
/// Runs in `O(n⁴)`, which is fine for keypoint-sized inputs.
pub fn delaunay(points: &[[f64; 2]]) -> Result<Vec<(usize, usize)>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::invalid(format!("delaunay needs at least 3 points, got {n}")));
    }
    for a in 0..n {
        if points[a].iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("point {a} is not finite")));
        }
        for b in a + 1..n {
            if points[a] == points[b] {
                return Err(Error::invalid(format!("points {a} and {b} coincide")));
            }
        }
    }
    let extent = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let orient_tol = 1e-12 * extent * extent;
    let circle_tol = 1e-12 * extent.powi(4);

    let mut candidates = std::collections::BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let o = orient(points[a], points[b], points[c]);
                if o.abs() <= orient_tol {
                    continue;
                }
                let (p, q, r) = if o > 0.0 { (a, b, c) } else { (a, c, b) };
                let empty = (0..n)
                    .filter(|&d| d != a && d != b && d != c)
                    .all(|d| in_circle(points[p], points[q], points[r], points[d]) <= circle_tol);
                if empty {
                    candidates.extend([(a, b), (a, c), (b, c)]);
                }
            }
        }
    }
    if candidates.is_empty() {
        log::warn!("all {n} points are collinear; using the path graph along the line");
        return Ok(collinear_path(points));
    }
    let mut accepted: Vec<(usize, usize)> = Vec::with_capacity(candidates.len());
    for (a, b) in candidates {
        let crosses = accepted
            .iter()
            .any(|&(c, d)| properly_cross(points, (a, b), (c, d), orient_tol));
        if !crosses {
            accepted.push((a, b));
        }
    }
    Ok(accepted)
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
pub(crate) fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `(a, b, c)`.
fn in_circle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let row = |p: [f64; 2]| {
        let x = p[0] - d[0];
        let y = p[1] - d[1];
        (x, y, x * x + y * y)
    };
    let (ax, ay, aw) = row(a);
    let (bx, by, bw) = row(b);
    let (cx, cy, cw) = row(c);
    ax * (by * cw - bw * cy) - ay * (bx * cw - bw * cx) + aw * (bx * cy - by * cx)
}

fn properly_cross(points: &[[f64; 2]], e: (usize, usize), f: (usize, usize), tol: f64) -> bool {
    if e.0 == f.0 || e.0 == f.1 || e.1 == f.0 || e.1 == f.1 {
        return false;
    }
    let (p, q) = (points[e.0], points[e.1]);
    let (r, s) = (points[f.0], points[f.1]);
    let d1 = orient(p, q, r);
    let d2 = orient(p, q, s);
    let d3 = orient(r, s, p);
    let d4 = orient(r, s, q);
    ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol))
}

fn collinear_path(points: &[[f64; 2]]) -> Vec<(usize, usize)> {
    let origin = points[0];
    let far = points
        .iter()
        .copied()
        .max_by(|a, b| {
            let da = (a[0] - origin[0]).hypot(a[1] - origin[1]);
            let db = (b[0] - origin[0]).hypot(b[1] - origin[1]);
            da.total_cmp(&db)
        })
        .expect("nonempty");
    let dir = [far[0] - origin[0], far[1] - origin[1]];
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let pa = (points[a][0] - origin[0]) * dir[0] + (points[a][1] - origin[1]) * dir[1];
        let pb = (points[b][0] - origin[0]) * dir[0] + (points[b][1] - origin[1]) * dir[1];
        pa.total_cmp(&pb)
    });
    let mut edges: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))).collect();
    edges.sort_unstable();
    edges
}
