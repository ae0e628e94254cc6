//! Independent oracles shared by the integration targets.
#![allow(dead_code)]

use lqskin_core::circuit::{AdmittanceSystem, EdgeElement};
use lqskin_core::geometry::{delaunay, Electrodes, Point2};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

pub fn circumcircle(a: Point2, b: Point2, c: Point2) -> (Point2, f64) {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    let sq = |p: Point2| p.x * p.x + p.y * p.y;
    let ux = (sq(a) * (b.y - c.y) + sq(b) * (c.y - a.y) + sq(c) * (a.y - b.y)) / d;
    let uy = (sq(a) * (c.x - b.x) + sq(b) * (a.x - c.x) + sq(c) * (b.x - a.x)) / d;
    let center = Point2::new(ux, uy);
    (center, center.distance(&a))
}

pub fn segments_cross(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    let eps = 1e-9;
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

/// Monotone-chain convex hull area.
pub fn hull_area(points: &[Point2]) -> f64 {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut hull: Vec<Point2> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n).map(|i| cross(Point2::new(0.0, 0.0), hull[i], hull[(i + 1) % n])).sum::<f64>() / 2.0
}

/// Brute-force Delaunay check: orientation, empty circumcircles, no
/// crossing edges, hull coverage and Euler's formula.
pub fn check_delaunay(points: &[Point2]) -> Result<(), String> {
    let tri = delaunay(points).map_err(|e| e.to_string())?;
    let n = points.len();
    let mut area = 0.0;
    for t in &tri.triangles {
        let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
        let signed = cross(a, b, c);
        if signed <= 0.0 {
            return Err(format!("triangle {t:?} not counter-clockwise"));
        }
        area += signed / 2.0;
        let (center, r) = circumcircle(a, b, c);
        for (i, p) in points.iter().enumerate() {
            if !t.contains(&i) && center.distance(p) < r * (1.0 - 1e-9) {
                return Err(format!("point {i} inside circumcircle of {t:?}"));
            }
        }
    }
    for (i, e) in tri.edges.iter().enumerate() {
        if e[0] >= e[1] {
            return Err(format!("edge {e:?} not normalized"));
        }
        for f in &tri.edges[i + 1..] {
            if e == f {
                return Err(format!("duplicate edge {e:?}"));
            }
            if e.contains(&f[0]) || e.contains(&f[1]) {
                continue;
            }
            if segments_cross(points[e[0]], points[e[1]], points[f[0]], points[f[1]]) {
                return Err(format!("edges {e:?} and {f:?} cross"));
            }
        }
    }
    let hull = hull_area(points);
    if (area - hull).abs() > 1e-9 * hull.max(1.0) {
        return Err(format!("area {area} vs hull {hull}"));
    }
    // V - E + F = 1 for a triangulated disk.
    if n as i64 - tri.edges.len() as i64 + tri.triangles.len() as i64 != 1 {
        return Err("Euler characteristic".into());
    }
    Ok(())
}

/// Connected random resistor graph: a random spanning tree plus extra edges.
pub fn random_resistive(seed: u64, nodes: usize) -> AdmittanceSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<[usize; 2]> = (1..nodes).map(|i| [rng.random_range(0..i), i]).collect();
    for _ in 0..rng.random_range(0..2 * nodes) {
        let a = rng.random_range(0..nodes);
        let b = rng.random_range(0..nodes);
        if a != b {
            edges.push([a.min(b), a.max(b)]);
        }
    }
    edges.sort();
    edges.dedup();
    let elements = edges
        .iter()
        .map(|_| EdgeElement {
            resistance: rng.random_range(1.0..1000.0),
            inductance: 0.0,
            capacitance: 0.0,
        })
        .collect();
    AdmittanceSystem {
        node_count: nodes,
        electrodes: Electrodes { bl: 0, c: nodes - 1, tr: nodes / 2 },
        edges,
        elements,
        contact_resistance: 0.0,
        contact_capacitance: 0.0,
    }
}

/// Effective resistance from the Moore-Penrose pseudoinverse of the
/// weighted graph Laplacian.
pub fn laplacian_resistance(sys: &AdmittanceSystem, a: usize, b: usize) -> f64 {
    let n = sys.node_count;
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for (e, el) in sys.edges.iter().zip(&sys.elements) {
        let g = 1.0 / el.resistance;
        lap[(e[0], e[0])] += g;
        lap[(e[1], e[1])] += g;
        lap[(e[0], e[1])] -= g;
        lap[(e[1], e[0])] -= g;
    }
    let pinv = lap.pseudo_inverse(1e-12).unwrap();
    pinv[(a, a)] + pinv[(b, b)] - 2.0 * pinv[(a, b)]
}

/// Ordinary least-squares line through (x, y); returns (intercept, slope).
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}
