//! Border following, polygon simplification and membership tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::BinaryMask;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("polygon needs at least one vertex")]
    EmptyPolygon,
    #[error("polygon has repeated consecutive vertex {0:?}")]
    RepeatedVertex(Point),
    #[error("rectangle must have positive width and height")]
    EmptyRect,
}

/// Integer pixel coordinate; serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(i32, i32)", into = "(i32, i32)")]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    fn offset(self, (dx, dy): (i32, i32)) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    fn dist2(self, o: Point) -> i64 {
        let (dx, dy) = ((self.x - o.x) as i64, (self.y - o.y) as i64);
        dx * dx + dy * dy
    }
}

impl From<(i32, i32)> for Point {
    fn from((x, y): (i32, i32)) -> Self {
        Self { x, y }
    }
}

impl From<Point> for (i32, i32) {
    fn from(p: Point) -> Self {
        (p.x, p.y)
    }
}

/// Closed border walk; the closing edge back to the first point is implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<Point>,
}

/// Closed polygon with implicit closure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PolygonRepr", into = "PolygonRepr")]
pub struct Polygon {
    vertices: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct PolygonRepr {
    points: Vec<Point>,
}

impl TryFrom<PolygonRepr> for Polygon {
    type Error = GeometryError;

    fn try_from(r: PolygonRepr) -> Result<Self, GeometryError> {
        Polygon::new(r.points)
    }
}

impl From<Polygon> for PolygonRepr {
    fn from(p: Polygon) -> Self {
        PolygonRepr { points: p.vertices }
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.is_empty() {
            return Err(GeometryError::EmptyPolygon);
        }
        if vertices.len() > 1 {
            for (i, v) in vertices.iter().enumerate() {
                if *v == vertices[(i + 1) % vertices.len()] {
                    return Err(GeometryError::RepeatedVertex(*v));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges `(v[i], v[i+1])` including the closing edge. A single vertex
    /// yields one degenerate edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

/// Pixel rectangle; `x`,`y` is the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Result<Self, GeometryError> {
        if w == 0 || h == 0 {
            return Err(GeometryError::EmptyRect);
        }
        Ok(Self { x, y, w, h })
    }

    pub fn right(&self) -> i64 {
        self.x as i64 + self.w as i64
    }

    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.h as i64
    }

    /// Whether the rectangle's pixels all lie in a `width`×`height` image.
    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x >= 0 && self.y >= 0 && self.right() <= width as i64 && self.bottom() <= height as i64
    }
}

// Clockwise on screen (y grows downward), starting east.
const DIRS: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const WEST: usize = 4;

fn dir_index(from: Point, to: Point) -> usize {
    let d = (to.x - from.x, to.y - from.y);
    DIRS.iter()
        .position(|&k| k == d)
        .expect("points are 8-neighbors")
}

/// Outer border of every 8-connected foreground component, ordered by the
/// raster position of each component's first pixel. Each border is walked
/// clockwise from that topmost-then-leftmost pixel; holes are skipped.
pub fn trace_contours(mask: &BinaryMask) -> Vec<Contour> {
    component_starts(mask)
        .into_iter()
        .map(|s| trace_from(mask, s))
        .collect()
}

fn is_fg(mask: &BinaryMask, p: Point) -> bool {
    mask.get_signed(p.x as i64, p.y as i64)
}

/// Border following from `start`, which must be the first pixel of its
/// component in raster order.
fn trace_from(mask: &BinaryMask, start: Point) -> Contour {
    // The pixel preceding `start` on the border: first foreground neighbor
    // counter-clockwise from west.
    let last = (0..8)
        .map(|k| (WEST + 8 - k) % 8)
        .map(|d| start.offset(DIRS[d]))
        .find(|&p| is_fg(mask, p));
    let Some(last) = last else {
        return Contour {
            points: vec![start],
        };
    };
    let mut points = vec![start];
    let (mut prev, mut cur) = (last, start);
    loop {
        let back = dir_index(cur, prev);
        let next = (1..=8)
            .map(|k| cur.offset(DIRS[(back + k) % 8]))
            .find(|&p| is_fg(mask, p))
            .expect("prev is foreground");
        if cur == last && next == start {
            break;
        }
        points.push(next);
        prev = cur;
        cur = next;
    }
    Contour { points }
}

/// First pixel (raster order) of each 8-connected component, found by
/// union-find over horizontal runs.
fn component_starts(mask: &BinaryMask) -> Vec<Point> {
    struct Run {
        y: u32,
        x0: u32,
        x1: u32,
    }
    let mut runs: Vec<Run> = Vec::new();
    let mut row_start = Vec::with_capacity(mask.height() as usize + 1);
    for y in 0..mask.height() {
        row_start.push(runs.len());
        let row = mask.row(y);
        let mut x = 0usize;
        while x < row.len() {
            if row[x] {
                let x0 = x;
                while x < row.len() && row[x] {
                    x += 1;
                }
                runs.push(Run {
                    y,
                    x0: x0 as u32,
                    x1: x as u32 - 1,
                });
            } else {
                x += 1;
            }
        }
    }
    row_start.push(runs.len());

    let mut parent: Vec<usize> = (0..runs.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for y in 1..mask.height() as usize {
        let (above, here) = (
            row_start[y - 1]..row_start[y],
            row_start[y]..row_start[y + 1],
        );
        let mut j = above.start;
        for i in here {
            // Runs touch under 8-connectivity when their column ranges,
            // widened by one, overlap.
            let (x0, x1) = (runs[i].x0 as i64 - 1, runs[i].x1 as i64 + 1);
            while j < above.end && (runs[j].x1 as i64) < x0 {
                j += 1;
            }
            let mut k = j;
            while k < above.end && runs[k].x0 as i64 <= x1 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, k));
                if a != b {
                    // Keep the earlier run as root.
                    parent[a.max(b)] = a.min(b);
                }
                k += 1;
            }
        }
    }
    // A root is the lowest-numbered run of its component, i.e. the first in raster order.
    (0..runs.len())
        .filter(|&i| find(&mut parent, i) == i)
        .map(|i| Point::new(runs[i].x0 as i32, runs[i].y as i32))
        .collect()
}

/// Squared distance from `p` to segment `a`-`b`, as an exact fraction.
fn seg_dist2(p: Point, a: Point, b: Point) -> (i128, i128) {
    let (vx, vy) = ((b.x - a.x) as i128, (b.y - a.y) as i128);
    let (wx, wy) = ((p.x - a.x) as i128, (p.y - a.y) as i128);
    let len2 = vx * vx + vy * vy;
    if len2 == 0 {
        return (wx * wx + wy * wy, 1);
    }
    let t = wx * vx + wy * vy;
    if t <= 0 {
        (wx * wx + wy * wy, 1)
    } else if t >= len2 {
        (p.dist2(b) as i128, 1)
    } else {
        let cross = vx * wy - vy * wx;
        (cross * cross, len2)
    }
}

/// Distance from `p` to segment `a`-`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (num, den) = seg_dist2(p, a, b);
    (num as f64 / den as f64).sqrt()
}

/// Douglas-Peucker on an open chain; returns the indices kept, ascending.
fn douglas_peucker(chain: &[Point], epsilon: f64) -> Vec<usize> {
    let n = chain.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let eps2 = epsilon * epsilon;
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0usize, n - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let (a, b) = (chain[lo], chain[hi]);
        let mut best = (lo + 1, seg_dist2(chain[lo + 1], a, b));
        for (i, &p) in chain.iter().enumerate().take(hi).skip(lo + 2) {
            let d = seg_dist2(p, a, b);
            // d > best, compared as fractions; strict so the lowest index wins ties.
            if d.0 * best.1 .1 > best.1 .0 * d.1 {
                best = (i, d);
            }
        }
        let (idx, (num, den)) = best;
        if num as f64 > eps2 * den as f64 {
            keep[idx] = true;
            stack.push((lo, idx));
            stack.push((idx, hi));
        }
    }
    (0..n).filter(|&i| keep[i]).collect()
}

fn cross(o: Point, a: Point, b: Point) -> i64 {
    (a.x - o.x) as i64 * (b.y - o.y) as i64 - (a.y - o.y) as i64 * (b.x - o.x) as i64
}

/// Strict convex hull vertices (monotone chain, collinear points dropped).
fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Index pair `(i, j)`, `i < j`, of two mutually farthest contour points,
/// lowest pair on ties.
fn farthest_pair(points: &[Point]) -> (usize, usize) {
    // Farthest pairs are realized by strict hull vertices; for each such
    // coordinate only its first occurrence matters for the tie-break.
    let hull = convex_hull(points);
    let first_index = |q: Point| {
        points
            .iter()
            .position(|&p| p == q)
            .expect("hull point from contour")
    };
    let firsts: Vec<usize> = hull.iter().map(|&q| first_index(q)).collect();
    let mut best: Option<(i64, (usize, usize))> = None;
    for a in 0..hull.len() {
        for b in a + 1..hull.len() {
            let d = hull[a].dist2(hull[b]);
            let pair = (firsts[a].min(firsts[b]), firsts[a].max(firsts[b]));
            let better = match best {
                None => true,
                Some((bd, bp)) => d > bd || (d == bd && pair < bp),
            };
            if better {
                best = Some((d, pair));
            }
        }
    }
    best.map_or((0, 0), |(_, p)| p)
}

/// Douglas-Peucker approximation of a closed contour. The contour is cut at
/// its two mutually farthest points and each half is simplified as an open
/// chain with tolerance `epsilon`.
pub fn simplify(contour: &Contour, epsilon: f64) -> Polygon {
    let pts = &contour.points;
    assert!(!pts.is_empty(), "contour has no points");
    let epsilon = epsilon.max(0.0);
    if pts.len() == 1 {
        return Polygon {
            vertices: pts.clone(),
        };
    }
    let (i, j) = farthest_pair(pts);
    let first: Vec<Point> = pts[i..=j].to_vec();
    let second: Vec<Point> = pts[j..].iter().chain(&pts[..=i]).copied().collect();
    let mut out: Vec<Point> = Vec::new();
    for half in [&first, &second] {
        let kept = douglas_peucker(half, epsilon);
        out.extend(kept[..kept.len() - 1].iter().map(|&k| half[k]));
    }
    dedup_cyclic(out)
}

/// Simplifies an open polyline, keeping both endpoints.
pub fn simplify_open(chain: &[Point], epsilon: f64) -> Vec<Point> {
    douglas_peucker(chain, epsilon.max(0.0))
        .into_iter()
        .map(|k| chain[k])
        .collect()
}

fn dedup_cyclic(mut v: Vec<Point>) -> Polygon {
    v.dedup();
    while v.len() > 1 && v.first() == v.last() {
        v.pop();
    }
    Polygon { vertices: v }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

impl Location {
    /// Membership rule for annotation: the boundary belongs to the polygon.
    pub fn is_member(self) -> bool {
        self != Location::Outside
    }
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    cross(a, b, p) == 0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Exact classification: on an edge is `Boundary`, otherwise even-odd ray
/// crossing toward +x.
pub fn point_in_polygon(p: Point, poly: &Polygon) -> Location {
    if poly.edges().any(|(a, b)| on_segment(p, a, b)) {
        return Location::Boundary;
    }
    let mut inside = false;
    for (a, b) in poly.edges() {
        if (a.y > p.y) != (b.y > p.y) {
            // p.x < intersection x, cleared of the (signed) denominator.
            let lhs = (p.x - a.x) as i64 * (b.y - a.y) as i64;
            let rhs = (p.y - a.y) as i64 * (b.x - a.x) as i64;
            let left_of = if b.y > a.y { lhs < rhs } else { lhs > rhs };
            if left_of {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

/// True iff every vertex lies inside or on the closed rectangle
/// `[x, x+w] × [y, y+h]`.
pub fn polygon_in_rect(poly: &Polygon, roi: &Rect) -> bool {
    poly.vertices.iter().all(|v| {
        let (x, y) = (v.x as i64, v.y as i64);
        x >= roi.x as i64 && x <= roi.right() && y >= roi.y as i64 && y <= roi.bottom()
    })
}

/// Tightest pixel rectangle covering all vertices.
pub fn bounding_box(poly: &Polygon) -> Rect {
    let xs = poly.vertices.iter().map(|v| v.x);
    let ys = poly.vertices.iter().map(|v| v.y);
    let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
    let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
    Rect {
        x: x0,
        y: y0,
        w: (x1 - x0) as u32 + 1,
        h: (y1 - y0) as u32 + 1,
    }
}

/// Horizontal pixel run `x0..=x1` on row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Run {
    pub y: i32,
    pub x0: i32,
    pub x1: i32,
}

impl Run {
    pub fn len(&self) -> u64 {
        (self.x1 - self.x0 + 1) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.x1 < self.x0
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn ceil_div(num: i64, den: i64) -> i64 {
    let q = num.div_euclid(den);
    if num.rem_euclid(den) == 0 {
        q
    } else {
        q + 1
    }
}

/// All integer points whose [`point_in_polygon`] location is Inside or
/// Boundary, as row runs sorted by (y, x).
pub fn polygon_runs(poly: &Polygon) -> Vec<Run> {
    let bb = bounding_box(poly);
    let rows = bb.h as usize;
    let mut crossings: Vec<Vec<i64>> = vec![Vec::new(); rows];
    let mut spans: Vec<Vec<(i64, i64)>> = vec![Vec::new(); rows];
    let row = |y: i32| (y - bb.y) as usize;
    for (a, b) in poly.edges() {
        if a.y != b.y {
            // Half-open rule matching the ray test: rows with min <= y < max.
            let (dy, dx) = ((b.y - a.y) as i64, (b.x - a.x) as i64);
            for y in a.y.min(b.y)..a.y.max(b.y) {
                let num = (y - a.y) as i64 * dx;
                let (num, den) = if dy < 0 { (-num, -dy) } else { (num, dy) };
                crossings[row(y)].push(a.x as i64 + ceil_div(num, den));
            }
        }
        // Lattice points on the edge itself.
        if a.y == b.y {
            spans[row(a.y)].push((a.x.min(b.x) as i64, a.x.max(b.x) as i64));
        } else {
            let (dx, dy) = ((b.x - a.x) as i64, (b.y - a.y) as i64);
            let g = gcd(dx, dy);
            for k in 0..=g {
                let (x, y) = (a.x as i64 + k * dx / g, a.y as i64 + k * dy / g);
                spans[row(y as i32)].push((x, x));
            }
        }
    }
    let mut runs = Vec::new();
    for (r, (mut cs, mut sp)) in crossings.into_iter().zip(spans).enumerate() {
        cs.sort_unstable();
        // Integer x is inside when an odd number of crossings c satisfy x < c.
        for pair in cs.chunks_exact(2) {
            if pair[0] < pair[1] {
                sp.push((pair[0], pair[1] - 1));
            }
        }
        sp.sort_unstable();
        let y = bb.y + r as i32;
        let mut cur: Option<(i64, i64)> = None;
        for (s, e) in sp {
            cur = match cur {
                Some((cs, ce)) if s <= ce + 1 => Some((cs, ce.max(e))),
                Some((cs, ce)) => {
                    runs.push(Run {
                        y,
                        x0: cs as i32,
                        x1: ce as i32,
                    });
                    Some((s, e))
                }
                None => Some((s, e)),
            };
        }
        if let Some((cs, ce)) = cur {
            runs.push(Run {
                y,
                x0: cs as i32,
                x1: ce as i32,
            });
        }
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(i32, i32)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    fn poly(v: &[(i32, i32)]) -> Polygon {
        Polygon::new(pts(v)).unwrap()
    }

    #[test]
    fn trace_empty_and_isolated() {
        assert!(trace_contours(&BinaryMask::empty(4, 4)).is_empty());
        let m = BinaryMask::from_ascii(&["#...", "...#"]);
        let cs = trace_contours(&m);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].points, pts(&[(0, 0)]));
        assert_eq!(cs[1].points, pts(&[(3, 1)]));
    }

    #[test]
    fn trace_solid_block_clockwise() {
        let m = BinaryMask::from_fn(5, 5, |x, y| (1..=3).contains(&x) && (1..=3).contains(&y));
        let cs = trace_contours(&m);
        assert_eq!(cs.len(), 1);
        assert_eq!(
            cs[0].points,
            pts(&[
                (1, 1),
                (2, 1),
                (3, 1),
                (3, 2),
                (3, 3),
                (2, 3),
                (1, 3),
                (1, 2)
            ])
        );
    }

    #[test]
    fn trace_thin_shapes_revisit_pixels() {
        let m = BinaryMask::from_ascii(&["#", "#", "#"]);
        assert_eq!(
            trace_contours(&m)[0].points,
            pts(&[(0, 0), (0, 1), (0, 2), (0, 1)])
        );
        let m = BinaryMask::from_ascii(&["##"]);
        assert_eq!(trace_contours(&m)[0].points, pts(&[(0, 0), (1, 0)]));
    }

    #[test]
    fn trace_skips_holes_and_orders_by_start() {
        let m = BinaryMask::from_ascii(&["....#", "###..", "#.#..", "###..", "....."]);
        let cs = trace_contours(&m);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].points[0], Point::new(4, 0));
        assert_eq!(
            cs[1].points,
            pts(&[
                (0, 1),
                (1, 1),
                (2, 1),
                (2, 2),
                (2, 3),
                (1, 3),
                (0, 3),
                (0, 2)
            ])
        );
    }

    #[test]
    fn trace_diagonal_connectivity() {
        // 8-connected: the diagonal chain is one component; the U shape joins below.
        let m = BinaryMask::from_ascii(&["#.#", ".#.", "#.."]);
        assert_eq!(trace_contours(&m).len(), 1);
        let m = BinaryMask::from_ascii(&["#.#", "#.#", "###"]);
        let cs = trace_contours(&m);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].points[0], Point::new(0, 0));
    }

    #[test]
    fn simplify_collinear_chain() {
        let c = Contour {
            points: pts(&[(0, 0), (1, 0), (2, 0)]),
        };
        assert_eq!(simplify(&c, 0.5).vertices(), &pts(&[(0, 0), (2, 0)])[..]);
        assert_eq!(
            simplify_open(&pts(&[(0, 0), (1, 0), (2, 0)]), 0.5),
            pts(&[(0, 0), (2, 0)])
        );
    }

    #[test]
    fn simplify_rectangle_to_corners() {
        let m = BinaryMask::from_fn(12, 8, |x, y| (2..=9).contains(&x) && (1..=5).contains(&y));
        let c = &trace_contours(&m)[0];
        let p = simplify(c, 1.5);
        let mut v = p.vertices().to_vec();
        v.sort();
        assert_eq!(v, pts(&[(2, 1), (2, 5), (9, 1), (9, 5)]));
        // Zero tolerance drops only collinear interior points.
        assert_eq!(simplify(c, 0.0).len(), 4);
    }

    #[test]
    fn simplify_zero_keeps_direction_changes() {
        let m = BinaryMask::from_ascii(&["###.", "####", "##.."]);
        let c = &trace_contours(&m)[0];
        let p = simplify(c, 0.0);
        for v in c.points.iter() {
            let on_turn = p.vertices().contains(v);
            let d = p
                .edges()
                .map(|(a, b)| point_segment_distance(*v, a, b))
                .fold(f64::INFINITY, f64::min);
            assert!(on_turn || d == 0.0);
        }
        assert!(p.len() >= 5);
    }

    #[test]
    fn pip_square() {
        let sq = poly(&[(0, 0), (10, 0), (10, 10), (0, 10)]);
        assert_eq!(point_in_polygon(Point::new(5, 5), &sq), Location::Inside);
        assert_eq!(point_in_polygon(Point::new(0, 5), &sq), Location::Boundary);
        assert_eq!(
            point_in_polygon(Point::new(10, 10), &sq),
            Location::Boundary
        );
        assert_eq!(point_in_polygon(Point::new(11, 5), &sq), Location::Outside);
        assert_eq!(point_in_polygon(Point::new(-1, 0), &sq), Location::Outside);
    }

    #[test]
    fn pip_degenerate() {
        let one = poly(&[(3, 3)]);
        assert_eq!(point_in_polygon(Point::new(3, 3), &one), Location::Boundary);
        assert_eq!(point_in_polygon(Point::new(3, 4), &one), Location::Outside);
        let seg = poly(&[(0, 0), (4, 2)]);
        assert_eq!(point_in_polygon(Point::new(2, 1), &seg), Location::Boundary);
        assert_eq!(point_in_polygon(Point::new(1, 1), &seg), Location::Outside);
    }

    #[test]
    fn roi_containment() {
        let tri = poly(&[(1, 1), (2, 1), (1, 2)]);
        assert!(polygon_in_rect(&tri, &Rect::new(0, 0, 5, 5).unwrap()));
        assert!(polygon_in_rect(&tri, &Rect::new(0, 0, 2, 2).unwrap()));
        let far = poly(&[(1, 1), (6, 1), (1, 2)]);
        assert!(!polygon_in_rect(&far, &Rect::new(0, 0, 5, 5).unwrap()));
    }

    #[test]
    fn bbox_examples() {
        assert_eq!(
            bounding_box(&poly(&[(3, 4)])),
            Rect {
                x: 3,
                y: 4,
                w: 1,
                h: 1
            }
        );
        assert_eq!(
            bounding_box(&poly(&[(0, 0), (10, 0), (10, 10), (0, 10)])),
            Rect {
                x: 0,
                y: 0,
                w: 11,
                h: 11
            }
        );
    }

    #[test]
    fn polygon_validation_and_json() {
        assert_eq!(Polygon::new(vec![]), Err(GeometryError::EmptyPolygon));
        assert!(Polygon::new(pts(&[(0, 0), (0, 0)])).is_err());
        assert!(Polygon::new(pts(&[(0, 0), (1, 0), (0, 0)])).is_err());
        let p = poly(&[(1, 2), (3, 4), (5, 0)]);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"points":[[1,2],[3,4],[5,0]]}"#);
        assert_eq!(serde_json::from_str::<Polygon>(&json).unwrap(), p);
        assert!(serde_json::from_str::<Polygon>(r#"{"points":[]}"#).is_err());
    }

    #[test]
    fn runs_of_square() {
        let sq = poly(&[(0, 0), (3, 0), (3, 2), (0, 2)]);
        let runs = polygon_runs(&sq);
        assert_eq!(
            runs,
            vec![
                Run { y: 0, x0: 0, x1: 3 },
                Run { y: 1, x0: 0, x1: 3 },
                Run { y: 2, x0: 0, x1: 3 }
            ]
        );
    }

    fn arb_polygon() -> impl Strategy<Value = Polygon> {
        prop::collection::vec((-6i32..14, -6i32..14), 1..9)
            .prop_filter_map("repeated vertex", |v| {
                Polygon::new(v.into_iter().map(Point::from).collect()).ok()
            })
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1u32..14, 1u32..14).prop_flat_map(|(w, h)| {
            prop::collection::vec(prop::bool::weighted(0.45), (w * h) as usize)
                .prop_map(move |b| BinaryMask::new(w, h, b).unwrap())
        })
    }

    proptest! {
        /// Scanline membership equals the per-point test, even for
        /// self-intersecting vertex lists.
        #[test]
        fn runs_match_point_test(p in arb_polygon()) {
            let bb = bounding_box(&p);
            let mut expect = Vec::new();
            for y in bb.y - 1..=bb.y + bb.h as i32 {
                for x in bb.x - 1..=bb.x + bb.w as i32 {
                    if point_in_polygon(Point::new(x, y), &p).is_member() {
                        expect.push((x, y));
                    }
                }
            }
            let mut got: Vec<(i32, i32)> =
                polygon_runs(&p).iter().flat_map(|r| (r.x0..=r.x1).map(move |x| (x, r.y))).collect();
            got.sort_by_key(|&(x, y)| (y, x));
            prop_assert_eq!(got, expect);
        }

        #[test]
        fn contours_are_closed_8_walks(m in arb_mask()) {
            for c in trace_contours(&m) {
                let n = c.points.len();
                for i in 0..n {
                    let (a, b) = (c.points[i], c.points[(i + 1) % n]);
                    prop_assert!(m.get(a.x as u32, a.y as u32));
                    if n > 1 {
                        prop_assert!((a.x - b.x).abs() <= 1 && (a.y - b.y).abs() <= 1 && a != b);
                    }
                }
            }
        }

        #[test]
        fn traced_component_inside_its_polygon(m in arb_mask()) {
            // Every pixel reachable from the start is Inside-or-Boundary of the eps=0 polygon.
            for c in trace_contours(&m) {
                let p = simplify(&c, 0.0);
                let start = c.points[0];
                let mut seen = vec![false; (m.width() * m.height()) as usize];
                let mut stack = vec![start];
                seen[(start.y as u32 * m.width() + start.x as u32) as usize] = true;
                while let Some(q) = stack.pop() {
                    prop_assert!(point_in_polygon(q, &p).is_member(), "{:?} outside {:?}", q, p);
                    for d in DIRS {
                        let r = q.offset(d);
                        if is_fg(&m, r) {
                            let i = (r.y as u32 * m.width() + r.x as u32) as usize;
                            if !seen[i] {
                                seen[i] = true;
                                stack.push(r);
                            }
                        }
                    }
                }
            }
        }

        #[test]
        fn dp_vertex_count_monotone(m in arb_mask(), e1 in 0.0f64..4.0, e2 in 0.0f64..4.0) {
            let (lo, hi) = (e1.min(e2), e1.max(e2));
            for c in trace_contours(&m) {
                prop_assert!(simplify(&c, lo).len() >= simplify(&c, hi).len());
            }
        }

        #[test]
        fn outside_bbox_is_outside(p in arb_polygon(), x in -20i32..30, y in -20i32..30) {
            let bb = bounding_box(&p);
            let inside_bb = x >= bb.x && y >= bb.y && (x as i64) < bb.right() && (y as i64) < bb.bottom();
            if !inside_bb {
                prop_assert_eq!(point_in_polygon(Point::new(x, y), &p), Location::Outside);
            }
        }
    }
}
