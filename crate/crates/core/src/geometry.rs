//! Planar geometry of the skin: random node placement, Delaunay
//! triangulation, the printed checkerboard grid and the channel network.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SkinError};

/// Skin extent along x (the 20-column side), mm.
pub const SKIN_WIDTH_MM: f64 = 200.0;
/// Skin extent along y (the 16-row side), mm.
pub const SKIN_HEIGHT_MM: f64 = 160.0;
/// Side of one checkerboard cell, mm.
pub const CELL_MM: f64 = 10.0;
pub const GRID_ROWS: u8 = 16;
pub const GRID_COLS: u8 = 20;

/// Relative tolerance of the in-circle predicate.
pub const INCIRCLE_REL_EPS: f64 = 1e-9;

/// Rejection-sampling attempts allowed per generated point.
pub const ATTEMPTS_PER_POINT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(&self, other: &Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Axis-aligned rectangle `[x0, x1) × [y0, y1)` in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// The default 20×16 cm skin.
    pub const fn skin() -> Self {
        Self::new(0.0, 0.0, SKIN_WIDTH_MM, SKIN_HEIGHT_MM)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn distance_to_point(&self, p: &Point2) -> f64 {
        let dx = (self.x0 - p.x).max(0.0).max(p.x - self.x1);
        let dy = (self.y0 - p.y).max(0.0).max(p.y - self.y1);
        dx.hypot(dy)
    }

    fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.x0, self.y0),
            Point2::new(self.x1, self.y0),
            Point2::new(self.x1, self.y1),
            Point2::new(self.x0, self.y1),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub const fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(&self.b)
    }

    pub fn midpoint(&self) -> Point2 {
        self.a.lerp(&self.b, 0.5)
    }

    pub fn at(&self, t: f64) -> Point2 {
        self.a.lerp(&self.b, t)
    }

    pub fn distance_to_point(&self, p: &Point2) -> f64 {
        let (dx, dy) = (self.b.x - self.a.x, self.b.y - self.a.y);
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return self.a.distance(p);
        }
        let t = (((p.x - self.a.x) * dx + (p.y - self.a.y) * dy) / len2).clamp(0.0, 1.0);
        self.at(t).distance(p)
    }

    /// Parameter interval of the part of the segment inside the closed rectangle
    /// (Liang–Barsky clipping).
    pub fn clip_to_rect(&self, rect: &Rect) -> Option<(f64, f64)> {
        let (dx, dy) = (self.b.x - self.a.x, self.b.y - self.a.y);
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for (p, q) in [
            (-dx, self.a.x - rect.x0),
            (dx, rect.x1 - self.a.x),
            (-dy, self.a.y - rect.y0),
            (dy, rect.y1 - self.a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// Exact Euclidean distance between the segment and a closed rectangle.
    pub fn distance_to_rect(&self, rect: &Rect) -> f64 {
        if self.clip_to_rect(rect).is_some() {
            return 0.0;
        }
        let from_ends = rect
            .distance_to_point(&self.a)
            .min(rect.distance_to_point(&self.b));
        rect.corners()
            .iter()
            .map(|c| self.distance_to_point(c))
            .fold(from_ends, f64::min)
    }

    /// Sub-segment whose points lie within `radius` of the rectangle.
    ///
    /// The distance to a convex set is convex along the segment, so the
    /// admissible parameters form one interval around the minimiser.
    pub fn clip_within(&self, rect: &Rect, radius: f64) -> Option<Segment> {
        let f = |t: f64| rect.distance_to_point(&self.at(t));
        let t_star = match self.clip_to_rect(rect) {
            Some((t0, t1)) => 0.5 * (t0 + t1),
            None => {
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                const INV_PHI: f64 = 0.618_033_988_749_894_9;
                for _ in 0..120 {
                    let m1 = hi - (hi - lo) * INV_PHI;
                    let m2 = lo + (hi - lo) * INV_PHI;
                    if f(m1) <= f(m2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let t = 0.5 * (lo + hi);
                if f(t) > radius {
                    return None;
                }
                t
            }
        };
        let boundary = |inside: f64, outside: f64| {
            if f(outside) <= radius {
                return outside;
            }
            let (mut a, mut b) = (inside, outside);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if f(m) <= radius {
                    a = m;
                } else {
                    b = m;
                }
            }
            a
        };
        let t0 = boundary(t_star, 0.0);
        let t1 = boundary(t_star, 1.0);
        Some(Segment::new(self.at(t0), self.at(t1)))
    }
}

/// One checkerboard square: row letter A–P along y, column 1–20 along x,
/// with A1 at the bottom-left corner of the skin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    row: u8,
    col: u8,
}

impl CellId {
    /// `row` is zero-based (0 = A), `col` one-based.
    pub fn new(row: u8, col: u8) -> Result<Self> {
        if row >= GRID_ROWS || !(1..=GRID_COLS).contains(&col) {
            return Err(SkinError::InvalidCell(format!("row {row}, col {col}")));
        }
        Ok(Self { row, col })
    }

    pub fn row(&self) -> u8 {
        self.row
    }

    pub fn col(&self) -> u8 {
        self.col
    }

    pub fn row_letter(&self) -> char {
        (b'A' + self.row) as char
    }

    /// All 320 cells in row-major order (A1, A2, …, P20).
    pub fn all() -> impl Iterator<Item = CellId> {
        (0..GRID_ROWS).flat_map(|row| (1..=GRID_COLS).map(move |col| CellId { row, col }))
    }

    /// Cell containing a point of the skin, if any.
    pub fn containing(p: &Point2) -> Option<CellId> {
        if !(p.x >= 0.0 && p.x < SKIN_WIDTH_MM && p.y >= 0.0 && p.y < SKIN_HEIGHT_MM) {
            return None;
        }
        let col = (p.x / CELL_MM).floor() as u8 + 1;
        let row = (p.y / CELL_MM).floor() as u8;
        CellId::new(row, col).ok()
    }

    pub fn rectangle(&self) -> Rect {
        cell_rectangle(*self)
    }

    pub fn center(&self) -> Point2 {
        self.rectangle().center()
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.row_letter(), self.col)
    }
}

impl FromStr for CellId {
    type Err = SkinError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SkinError::InvalidCell(s.to_string());
        let mut chars = s.chars();
        let letter = chars.next().ok_or_else(bad)?.to_ascii_uppercase();
        if !letter.is_ascii_uppercase() {
            return Err(bad());
        }
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.len() > 2 {
            return Err(bad());
        }
        let col: u8 = digits.parse().map_err(|_| bad())?;
        CellId::new(letter as u8 - b'A', col).map_err(|_| bad())
    }
}

impl Serialize for CellId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn cell_rectangle(cell: CellId) -> Rect {
    let x0 = (cell.col - 1) as f64 * CELL_MM;
    let y0 = cell.row as f64 * CELL_MM;
    Rect::new(x0, y0, x0 + CELL_MM, y0 + CELL_MM)
}

/// Uniform rejection sampling of `count` points with pairwise distance at
/// least `min_separation`.
pub fn generate_random_points(
    seed: u64,
    count: usize,
    bbox: Rect,
    min_separation: f64,
) -> Result<Vec<Point2>> {
    if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
        return Err(SkinError::Domain(format!("degenerate bounding box {bbox:?}")));
    }
    if !(min_separation >= 0.0) {
        return Err(SkinError::Domain(format!(
            "min separation must be non-negative, got {min_separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Point2> = Vec::with_capacity(count);
    for _ in 0..count {
        let accepted = (0..ATTEMPTS_PER_POINT).find_map(|_| {
            let p = Point2::new(
                rng.random_range(bbox.x0..bbox.x1),
                rng.random_range(bbox.y0..bbox.y1),
            );
            points
                .iter()
                .all(|q| q.distance(&p) >= min_separation)
                .then_some(p)
        });
        match accepted {
            Some(p) => points.push(p),
            None => {
                return Err(SkinError::InfeasiblePacking {
                    placed: points.len(),
                    requested: count,
                    min_separation,
                })
            }
        }
    }
    Ok(points)
}

fn orient2d(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// In-circle predicate for a counter-clockwise triangle `abc`.
///
/// Returns the raw determinant (positive when `d` is inside) together with
/// the tolerance below which the four points count as cocircular.
pub fn incircle(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> (f64, f64) {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    let scale = [adx, ady, bdx, bdy, cdx, cdy]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    (det, INCIRCLE_REL_EPS * scale.powi(4))
}

/// Delaunay triangulation of a planar point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub points: Vec<Point2>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub edges: Vec<[usize; 2]>,
}

impl Triangulation {
    pub fn edge_segment(&self, edge: [usize; 2]) -> Segment {
        Segment::new(self.points[edge[0]], self.points[edge[1]])
    }
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Sweep triangulation of the convex hull followed by Lawson flips.
///
/// Cocircular quadrilaterals keep the diagonal whose sorted index pair is
/// lexicographically smallest.
pub fn delaunay(points: &[Point2]) -> Result<Triangulation> {
    if points.len() < 3 {
        return Err(SkinError::DegenerateInput(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(i) = points.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(SkinError::DegenerateInput(format!("point {i} is not finite")));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .x
            .total_cmp(&points[j].x)
            .then(points[i].y.total_cmp(&points[j].y))
            .then(i.cmp(&j))
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(SkinError::DegenerateInput(format!(
                "points {} and {} coincide",
                w[0].min(w[1]),
                w[0].max(w[1])
            )));
        }
    }

    let p = |i: usize| &points[i];
    let first = order[0];
    let second = order[1];
    let k = (2..order.len())
        .find(|&k| orient2d(p(first), p(second), p(order[k])) != 0.0)
        .ok_or_else(|| SkinError::DegenerateInput("all points are collinear".into()))?;
    let apex = order[k];

    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(2 * points.len());
    let left = orient2d(p(first), p(second), p(apex)) > 0.0;
    for w in order[..k].windows(2) {
        if left {
            triangles.push([w[0], w[1], apex]);
        } else {
            triangles.push([w[1], w[0], apex]);
        }
    }
    let mut hull: Vec<usize> = if left {
        order[..k].to_vec()
    } else {
        order[..k].iter().rev().copied().collect()
    };
    hull.push(apex);

    for &q in &order[k + 1..] {
        let h = hull.len();
        let visible: Vec<bool> = (0..h)
            .map(|i| orient2d(p(hull[i]), p(hull[(i + 1) % h]), p(q)) < 0.0)
            .collect();
        // Start of the visible chain: a visible edge preceded by an invisible one.
        let start = (0..h)
            .find(|&i| visible[i] && !visible[(i + h - 1) % h])
            .ok_or_else(|| {
                SkinError::DegenerateInput(format!("point {q} could not be attached to the hull"))
            })?;
        let mut count = 0;
        while visible[(start + count) % h] {
            let a = hull[(start + count) % h];
            let b = hull[(start + count + 1) % h];
            triangles.push([a, q, b]);
            count += 1;
        }
        // Remove hull vertices strictly inside the visible chain, insert q.
        let mut next = Vec::with_capacity(h + 1);
        for j in 0..h {
            let idx = (start + 1 + j) % h;
            if j < count - 1 {
                continue;
            }
            next.push(hull[idx]);
        }
        // `next` begins at the end of the visible chain and wraps to its start.
        next.push(q);
        hull = next;
    }

    legalize(points, &mut triangles)?;

    let mut edges: Vec<[usize; 2]> = triangles
        .iter()
        .flat_map(|t| [sorted_pair(t[0], t[1]), sorted_pair(t[1], t[2]), sorted_pair(t[2], t[0])])
        .collect();
    edges.sort_unstable();
    edges.dedup();

    Ok(Triangulation {
        points: points.to_vec(),
        triangles,
        edges,
    })
}

fn legalize(points: &[Point2], triangles: &mut [[usize; 3]]) -> Result<()> {
    // directed edge (a, b) -> triangle that contains it in CCW order
    let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
    for (ti, t) in triangles.iter().enumerate() {
        for e in 0..3 {
            owner.insert((t[e], t[(e + 1) % 3]), ti);
        }
    }
    let mut stack: Vec<(usize, usize)> = owner.keys().copied().filter(|(a, b)| a < b).collect();
    stack.sort_unstable();
    stack.reverse();

    let budget = 50 * points.len() * points.len() + 1000;
    let mut flips = 0usize;
    while let Some((a, b)) = stack.pop() {
        let (Some(&t1), Some(&t2)) = (owner.get(&(a, b)), owner.get(&(b, a))) else {
            continue;
        };
        let c = third(&triangles[t1], a, b);
        let d = third(&triangles[t2], b, a);
        let (det, eps) = incircle(&points[a], &points[b], &points[c], &points[d]);
        let flip = if det > eps {
            true
        } else if det.abs() <= eps {
            sorted_pair(c, d) < sorted_pair(a, b)
                && orient2d(&points[c], &points[d], &points[a])
                    * orient2d(&points[c], &points[d], &points[b])
                    < 0.0
        } else {
            false
        };
        if !flip {
            continue;
        }
        flips += 1;
        if flips > budget {
            return Err(SkinError::DegenerateInput(
                "edge-flip budget exhausted (numerically degenerate input)".into(),
            ));
        }
        for (x, y) in [(a, b), (b, c), (c, a), (b, a), (a, d), (d, b)] {
            owner.remove(&(x, y));
        }
        triangles[t1] = [a, d, c];
        triangles[t2] = [d, b, c];
        for (ti, t) in [(t1, triangles[t1]), (t2, triangles[t2])] {
            for e in 0..3 {
                owner.insert((t[e], t[(e + 1) % 3]), ti);
            }
        }
        for (x, y) in [(a, d), (d, b), (b, c), (c, a)] {
            stack.push((x.min(y), x.max(y)));
        }
    }
    Ok(())
}

fn third(t: &[usize; 3], a: usize, b: usize) -> usize {
    *t.iter()
        .find(|&&v| v != a && v != b)
        .expect("triangle has three distinct vertices")
}

/// Measurement electrodes attached to network nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Electrode {
    BL,
    C,
    TR,
}

impl Electrode {
    pub const ALL: [Electrode; 3] = [Electrode::BL, Electrode::C, Electrode::TR];

    pub fn name(&self) -> &'static str {
        match self {
            Electrode::BL => "BL",
            Electrode::C => "C",
            Electrode::TR => "TR",
        }
    }

    /// Nominal skin location used to attach an electrode to the nearest node.
    pub fn anchor(&self) -> Point2 {
        match self {
            Electrode::BL => Point2::new(0.0, 0.0),
            Electrode::C => Point2::new(0.5 * SKIN_WIDTH_MM, 0.5 * SKIN_HEIGHT_MM),
            Electrode::TR => Point2::new(SKIN_WIDTH_MM, SKIN_HEIGHT_MM),
        }
    }
}

impl FromStr for Electrode {
    type Err = SkinError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BL" => Ok(Electrode::BL),
            "C" => Ok(Electrode::C),
            "TR" => Ok(Electrode::TR),
            _ => Err(SkinError::field("electrode", format!("unknown electrode '{s}'"))),
        }
    }
}

/// Ordered pair of distinct measuring electrodes, written `BL-C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ElectrodePair {
    pub first: Electrode,
    pub second: Electrode,
}

impl ElectrodePair {
    pub const BL_C: ElectrodePair = ElectrodePair {
        first: Electrode::BL,
        second: Electrode::C,
    };
    pub const C_TR: ElectrodePair = ElectrodePair {
        first: Electrode::C,
        second: Electrode::TR,
    };
    pub const BL_TR: ElectrodePair = ElectrodePair {
        first: Electrode::BL,
        second: Electrode::TR,
    };

    pub fn new(first: Electrode, second: Electrode) -> Result<Self> {
        if first == second {
            return Err(SkinError::field("pair", "electrodes must be distinct"));
        }
        Ok(Self { first, second })
    }

    pub fn reversed(&self) -> Self {
        Self {
            first: self.second,
            second: self.first,
        }
    }
}

impl fmt::Display for ElectrodePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first.name(), self.second.name())
    }
}

impl FromStr for ElectrodePair {
    type Err = SkinError;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| SkinError::field("pair", format!("expected e.g. 'BL-C', got '{s}'")))?;
        ElectrodePair::new(a.parse()?, b.parse()?)
    }
}

impl Serialize for ElectrodePair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElectrodePair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Electrodes {
    pub bl: usize,
    pub c: usize,
    pub tr: usize,
}

impl Electrodes {
    pub fn node(&self, e: Electrode) -> usize {
        match e {
            Electrode::BL => self.bl,
            Electrode::C => self.c,
            Electrode::TR => self.tr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDims {
    pub width_mm: f64,
    pub depth_mm: f64,
}

impl Default for ChannelDims {
    fn default() -> Self {
        Self {
            width_mm: 4.0,
            depth_mm: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub position: Point2,
    pub label: Option<CellId>,
}

/// Channel network carved in the skin: Delaunay channels between nodes,
/// with three electrode nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub edges: Vec<[usize; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub electrodes: Electrodes,
    pub channel: ChannelDims,
}

impl Network {
    /// Triangulates `points`, labels every node with its grid cell and
    /// attaches each electrode to the node nearest its nominal anchor.
    pub fn from_points(points: &[Point2], channel: ChannelDims) -> Result<Self> {
        let tri = delaunay(points)?;
        let nearest = |target: Point2, taken: &[usize]| {
            (0..points.len())
                .filter(|i| !taken.contains(i))
                .min_by(|&i, &j| {
                    points[i]
                        .distance(&target)
                        .total_cmp(&points[j].distance(&target))
                        .then(i.cmp(&j))
                })
                .expect("at least three points")
        };
        let bl = nearest(Electrode::BL.anchor(), &[]);
        let c = nearest(Electrode::C.anchor(), &[bl]);
        let tr = nearest(Electrode::TR.anchor(), &[bl, c]);
        let nodes = points
            .iter()
            .map(|p| Node {
                position: *p,
                label: CellId::containing(p),
            })
            .collect();
        Ok(Self {
            nodes,
            edges: tri.edges,
            triangles: tri.triangles,
            electrodes: Electrodes { bl, c, tr },
            channel,
        })
    }

    /// Seeded random network over the default skin.
    pub fn random(seed: u64, count: usize, min_separation: f64) -> Result<Self> {
        let points = generate_random_points(seed, count, Rect::skin(), min_separation)?;
        Self::from_points(&points, ChannelDims::default())
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn edge_segment(&self, edge: usize) -> Segment {
        let [a, b] = self.edges[edge];
        Segment::new(self.nodes[a].position, self.nodes[b].position)
    }

    pub fn edge_length_mm(&self, edge: usize) -> f64 {
        self.edge_segment(edge).length()
    }

    pub fn electrode_node(&self, e: Electrode) -> usize {
        self.electrodes.node(e)
    }

    pub fn node_by_label(&self, label: CellId) -> Option<usize> {
        self.nodes.iter().position(|n| n.label == Some(label))
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let key = sorted_pair(a, b);
        self.edges.binary_search(&key).ok()
    }

    pub fn incident_edges(&self, node: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].contains(&node))
            .collect()
    }

    /// Distance from the edge's channel wall (centerline widened by half the
    /// channel width) to the cell square; zero when they overlap.
    pub fn channel_gap_mm(&self, edge: usize, cell: CellId) -> f64 {
        let d = self.edge_segment(edge).distance_to_rect(&cell.rectangle());
        (d - 0.5 * self.channel.width_mm).max(0.0)
    }

    /// Shortest electrode-to-electrode route by channel length (which is
    /// proportional to channel resistance). Returns edge indices.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut via: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        dist[from] = 0.0;
        // Dense Dijkstra; ties resolved toward the lower node index.
        loop {
            let u = (0..n)
                .filter(|&i| !done[i] && dist[i].is_finite())
                .min_by(|&i, &j| dist[i].total_cmp(&dist[j]).then(i.cmp(&j)))?;
            if u == to {
                break;
            }
            done[u] = true;
            for e in self.incident_edges(u) {
                let [a, b] = self.edges[e];
                let v = if a == u { b } else { a };
                let nd = dist[u] + self.edge_length_mm(e);
                if nd < dist[v] {
                    dist[v] = nd;
                    via[v] = Some(e);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = to;
        while cur != from {
            let e = via[cur]?;
            path.push(e);
            let [a, b] = self.edges[e];
            cur = if a == cur { b } else { a };
        }
        path.reverse();
        Some(path)
    }
}

/// Every edge whose widened channel overlaps the cell square, paired with
/// the part of its centerline that lies within half a channel width of it.
pub fn edges_under_cell(network: &Network, cell: CellId) -> Vec<(usize, Segment)> {
    let rect = cell.rectangle();
    let radius = 0.5 * network.channel.width_mm;
    (0..network.edges.len())
        .filter_map(|e| {
            network
                .edge_segment(e)
                .clip_within(&rect, radius)
                .map(|s| (e, s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CellId {
        s.parse().unwrap()
    }

    #[test]
    fn cell_rectangles_follow_grid_convention() {
        assert_eq!(cell_rectangle(c("A1")), Rect::new(0.0, 0.0, 10.0, 10.0));
        assert_eq!(cell_rectangle(c("P20")), Rect::new(190.0, 150.0, 200.0, 160.0));
        assert_eq!(cell_rectangle(c("I11")), Rect::new(100.0, 80.0, 110.0, 90.0));
    }

    #[test]
    fn cell_labels_parse_and_print() {
        for cell in CellId::all() {
            assert_eq!(cell.to_string().parse::<CellId>().unwrap(), cell);
        }
        assert_eq!(CellId::all().count(), 320);
        for bad in ["", "Q1", "A0", "A21", "1A", "A1x", "A001"] {
            assert!(bad.parse::<CellId>().is_err(), "{bad}");
        }
        assert_eq!("l9".parse::<CellId>().unwrap(), c("L9"));
    }

    #[test]
    fn containing_cell_matches_rectangle() {
        let p = Point2::new(105.0, 85.0);
        assert_eq!(CellId::containing(&p), Some(c("I11")));
        assert_eq!(CellId::containing(&Point2::new(200.0, 5.0)), None);
        assert_eq!(CellId::containing(&Point2::new(0.0, 0.0)), Some(c("A1")));
    }

    #[test]
    fn empty_point_request_is_empty() {
        let pts = generate_random_points(42, 0, Rect::new(0.0, 0.0, 1.0, 1.0), 0.0).unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn infeasible_packing_is_reported() {
        let err = generate_random_points(1, 50, Rect::new(0.0, 0.0, 10.0, 10.0), 8.0).unwrap_err();
        assert!(matches!(err, SkinError::InfeasiblePacking { requested: 50, .. }));
    }

    #[test]
    fn degenerate_bbox_rejected() {
        assert!(generate_random_points(1, 3, Rect::new(0.0, 0.0, 0.0, 5.0), 0.0).is_err());
    }

    #[test]
    fn minimal_triangle() {
        let t = delaunay(&[
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(1.0, 3.0),
        ])
        .unwrap();
        assert_eq!(t.triangles.len(), 1);
        assert_eq!(t.edges, vec![[0, 1], [0, 2], [1, 2]]);
    }

    #[test]
    fn square_uses_lexicographically_smallest_diagonal() {
        let t = delaunay(&[
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(10.0, 10.0),
            Point2::new(0.0, 10.0),
        ])
        .unwrap();
        assert_eq!(t.triangles.len(), 2);
        assert_eq!(t.edges.len(), 5);
        assert!(t.edges.contains(&[0, 2]));
        assert!(!t.edges.contains(&[1, 3]));

        // Relabelled so that the other diagonal is the smaller pair.
        let t = delaunay(&[
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 10.0),
            Point2::new(10.0, 0.0),
            Point2::new(0.0, 10.0),
        ])
        .unwrap();
        assert!(t.edges.contains(&[0, 1]));
        assert!(!t.edges.contains(&[2, 3]));
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(matches!(
            delaunay(&[Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)]),
            Err(SkinError::DegenerateInput(_))
        ));
        let line: Vec<_> = (0..5).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(delaunay(&line), Err(SkinError::DegenerateInput(_))));
        let dup = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(matches!(delaunay(&dup), Err(SkinError::DegenerateInput(_))));
    }

    #[test]
    fn collinear_prefix_then_apex() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.0, 2.0),
            Point2::new(0.0, 3.0),
            Point2::new(2.0, 1.5),
            Point2::new(-2.0, 1.5),
        ];
        let t = delaunay(&pts).unwrap();
        assert_eq!(pts.len() as i64 - t.edges.len() as i64 + t.triangles.len() as i64, 1);
        for tri in &t.triangles {
            assert!(orient2d(&pts[tri[0]], &pts[tri[1]], &pts[tri[2]]) > 0.0);
        }
    }

    #[test]
    fn segment_rect_clipping() {
        let r = Rect::new(0.0, 0.0, 10.0, 10.0);
        let s = Segment::new(Point2::new(-5.0, 5.0), Point2::new(15.0, 5.0));
        let (t0, t1) = s.clip_to_rect(&r).unwrap();
        assert!((t0 - 0.25).abs() < 1e-12 && (t1 - 0.75).abs() < 1e-12);
        let inner = s.clip_within(&r, 0.0).unwrap();
        assert!((inner.length() - 10.0).abs() < 1e-9);
        let widened = s.clip_within(&r, 2.0).unwrap();
        assert!((widened.length() - 14.0).abs() < 1e-9);

        let off = Segment::new(Point2::new(-5.0, 13.0), Point2::new(15.0, 13.0));
        assert!(off.clip_within(&r, 2.0).is_none());
        assert!((off.distance_to_rect(&r) - 3.0).abs() < 1e-12);
        assert!(off.clip_within(&r, 3.5).is_some());
    }
}
