//! Planar convex geometry over pixel coordinates.
//!
//! Polygons are stored counter-clockwise in the sense of a positive shoelace
//! sum over `(x, y)` as given. With image axes (y pointing down) that renders
//! clockwise on screen; nothing here depends on the visual orientation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::scalar::Scalar;
use crate::types::Point;

#[inline]
fn cross<T: Scalar>(o: Point<T>, a: Point<T>, b: Point<T>) -> T {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Signed shoelace area of a closed vertex ring.
pub fn signed_area<T: Scalar>(vertices: &[Point<T>]) -> T {
    if vertices.len() < 3 {
        return T::zero();
    }
    let origin = vertices[0];
    let mut acc = T::zero();
    for w in vertices[1..].windows(2) {
        acc = acc + cross(origin, w[0], w[1]);
    }
    acc * T::of(0.5)
}

/// Area-weighted centroid of a simple polygon given by its vertex ring.
pub fn polygon_centroid<T: Scalar>(vertices: &[Point<T>]) -> Result<Point<T>> {
    let a = signed_area(vertices);
    if a.abs() <= T::AREA_EPS {
        return Err(invalid_arg("centroid of a zero-area polygon is undefined"));
    }
    // Fan triangulation from the first vertex keeps magnitudes small.
    let origin = vertices[0];
    let (mut cx, mut cy) = (T::zero(), T::zero());
    for w in vertices[1..].windows(2) {
        let p = w[0].sub(origin);
        let q = w[1].sub(origin);
        let c = p.x * q.y - q.x * p.y;
        cx = cx + (p.x + q.x) * c;
        cy = cy + (p.y + q.y) * c;
    }
    let k = T::of(6.0) * a;
    Ok(Point::new(origin.x + cx / k, origin.y + cy / k))
}

/// Drops repeated and collinear vertices from a ring (tolerance `GEOM_EPS`
/// as perpendicular distance) and orients it counter-clockwise.
fn simplify_ring<T: Scalar>(points: &[Point<T>]) -> Vec<Point<T>> {
    let eps = T::GEOM_EPS;
    let mut ring: Vec<Point<T>> = Vec::with_capacity(points.len());
    for &p in points {
        if ring.last().is_none_or(|&q| q.dist2(p) > eps * eps) {
            ring.push(p);
        }
    }
    while ring.len() > 1 && ring[0].dist2(ring[ring.len() - 1]) <= eps * eps {
        ring.pop();
    }
    let mut changed = true;
    while changed && ring.len() >= 3 {
        changed = false;
        let n = ring.len();
        for i in 0..n {
            let prev = ring[(i + n - 1) % n];
            let cur = ring[i];
            let next = ring[(i + 1) % n];
            let base = next.dist2(prev).sqrt();
            let dist = if base > T::zero() { cross(prev, cur, next).abs() / base } else { T::zero() };
            if dist <= eps {
                ring.remove(i);
                changed = true;
                break;
            }
        }
    }
    if signed_area(&ring) < T::zero() {
        ring.reverse();
    }
    ring
}

fn is_strictly_convex<T: Scalar>(ring: &[Point<T>]) -> bool {
    let n = ring.len();
    n >= 3 && (0..n).all(|i| cross(ring[i], ring[(i + 1) % n], ring[(i + 2) % n]) > T::zero())
}

/// Strictly convex polygon with counter-clockwise vertices and positive area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + serde::Deserialize<'de>"))]
#[serde(try_from = "Vec<Point<T>>", into = "Vec<Point<T>>")]
pub struct ConvexPolygon<T: Scalar> {
    vertices: Vec<Point<T>>,
}

impl<T: Scalar> TryFrom<Vec<Point<T>>> for ConvexPolygon<T> {
    type Error = crate::error::Error;

    fn try_from(v: Vec<Point<T>>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T: Scalar> From<ConvexPolygon<T>> for Vec<Point<T>> {
    fn from(p: ConvexPolygon<T>) -> Self {
        p.vertices
    }
}

impl<T: Scalar> ConvexPolygon<T> {
    /// Validates a vertex ring. Either orientation is accepted; duplicate
    /// and collinear vertices are removed.
    pub fn new(vertices: Vec<Point<T>>) -> Result<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(invalid_arg("polygon has non-finite vertices"));
        }
        let ring = simplify_ring(&vertices);
        if ring.len() < 3 || signed_area(&ring) <= T::AREA_EPS {
            return Err(invalid_arg("polygon is degenerate"));
        }
        if !is_strictly_convex(&ring) {
            return Err(invalid_arg("polygon is not convex"));
        }
        Ok(Self { vertices: ring })
    }

    /// Builds a polygon from the output of a clipping step, which is convex
    /// up to rounding. Returns `None` when the result is empty.
    fn from_clipped(points: &[Point<T>]) -> Option<Self> {
        let ring = simplify_ring(points);
        if ring.len() < 3 || signed_area(&ring) <= T::AREA_EPS {
            return None;
        }
        if is_strictly_convex(&ring) {
            Some(Self { vertices: ring })
        } else {
            convex_hull(&ring)
        }
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: T, y0: T, x1: T, y1: T) -> Result<Self> {
        Self::new(vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)])
    }

    #[inline]
    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn area(&self) -> T {
        signed_area(&self.vertices).abs()
    }

    pub fn centroid(&self) -> Point<T> {
        polygon_centroid(&self.vertices).expect("convex polygon has positive area")
    }

    /// Point-in-polygon test, boundary included up to `tol` px.
    pub fn contains(&self, p: Point<T>, tol: T) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let len = a.dist2(b).sqrt();
            cross(a, b, p) / len >= -tol
        })
    }

    pub fn scaled(&self, k: T) -> Self {
        Self { vertices: self.vertices.iter().map(|p| p.scale(k)).collect() }
    }

    /// Horizontal extent `[x_min, x_max]` of the polygon on row `y`, if the
    /// row crosses it.
    pub fn row_span(&self, y: T) -> Option<(T, T)> {
        let n = self.vertices.len();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let (ymin, ymax) = if a.y <= b.y { (a.y, b.y) } else { (b.y, a.y) };
            if y < ymin || y > ymax {
                continue;
            }
            if a.y == b.y {
                lo = lo.min(a.x.min(b.x));
                hi = hi.max(a.x.max(b.x));
            } else {
                let x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    fn y_range(&self) -> (T, T) {
        self.vertices.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)))
    }

    /// Marks pixels whose integer coordinates lie inside the polygon.
    pub fn rasterize_into(&self, width: usize, height: usize, out: &mut [bool]) {
        let tol = T::GEOM_EPS;
        let (y0, y1) = self.y_range();
        let row_lo = (y0 - tol).ceil().max(T::zero());
        let row_hi = (y1 + tol).floor().min(T::of(height as f64 - 1.0));
        if row_lo > row_hi {
            return;
        }
        let (row_lo, row_hi) = (row_lo.to_f64_lossy() as usize, row_hi.to_f64_lossy() as usize);
        for row in row_lo..=row_hi {
            let y = T::of(row as f64);
            // Nudge rows that touch a vertex exactly so rounding cannot lose them.
            let span = self
                .row_span(y)
                .or_else(|| self.row_span(y + tol))
                .or_else(|| self.row_span(y - tol));
            let Some((xl, xr)) = span else { continue };
            let c0 = (xl - tol).ceil().max(T::zero());
            let c1 = (xr + tol).floor().min(T::of(width as f64 - 1.0));
            if c0 > c1 {
                continue;
            }
            let (c0, c1) = (c0.to_f64_lossy() as usize, c1.to_f64_lossy() as usize);
            out[row * width + c0..=row * width + c1].iter_mut().for_each(|v| *v = true);
        }
    }
}

/// Andrew monotone-chain convex hull. Returns `None` for degenerate input:
/// fewer than three distinct points, or all points (nearly) collinear.
pub fn convex_hull<T: Scalar>(points: &[Point<T>]) -> Option<ConvexPolygon<T>> {
    let mut pts: Vec<Point<T>> = points.iter().copied().filter(|p| p.is_finite()).collect();
    if pts.len() < 3 {
        return None;
    }
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup();
    if pts.len() < 3 {
        return None;
    }
    let mut hull: Vec<Point<T>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point<T>>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= T::zero() {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let ring = simplify_ring(&hull);
    if ring.len() < 3 || signed_area(&ring) <= T::AREA_EPS {
        return None;
    }
    Some(ConvexPolygon { vertices: ring })
}

/// Sutherland–Hodgman step: keeps the part of `poly` on the left of the
/// directed line `a → b` (or on the right when `keep_left` is false).
fn clip_half_plane<T: Scalar>(poly: &[Point<T>], a: Point<T>, b: Point<T>, keep_left: bool) -> Vec<Point<T>> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    if n == 0 {
        return out;
    }
    let side = |p: Point<T>| {
        let s = cross(a, b, p);
        if keep_left {
            s
        } else {
            -s
        }
    };
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let sc = side(cur);
        let sn = side(next);
        if sc >= T::zero() {
            out.push(cur);
        }
        if (sc > T::zero() && sn < T::zero()) || (sc < T::zero() && sn > T::zero()) {
            let t = sc / (sc - sn);
            out.push(Point::new(cur.x + (next.x - cur.x) * t, cur.y + (next.y - cur.y) * t));
        }
    }
    out
}

/// Intersection of two convex polygons, `None` when its area is at most
/// `AREA_EPS`.
pub fn convex_intersection<T: Scalar>(a: &ConvexPolygon<T>, b: &ConvexPolygon<T>) -> Option<ConvexPolygon<T>> {
    let mut ring = a.vertices.clone();
    let n = b.vertices.len();
    for i in 0..n {
        ring = clip_half_plane(&ring, b.vertices[i], b.vertices[(i + 1) % n], true);
        if ring.len() < 3 {
            return None;
        }
    }
    ConvexPolygon::from_clipped(&ring)
}

/// Convex decomposition of `a \ b` for any convex `b`.
///
/// Piece `k` is `a` restricted to the inner side of `b`'s edges `0..k` and
/// the outer side of edge `k`, so pieces are pairwise disjoint and, together
/// with `a ∩ b`, tile `a`.
pub fn convex_subtract<T: Scalar>(a: &ConvexPolygon<T>, b: &ConvexPolygon<T>) -> PolygonSet<T> {
    let mut pieces = Vec::new();
    let mut rest = a.vertices.clone();
    let n = b.vertices.len();
    for k in 0..n {
        let (p, q) = (b.vertices[k], b.vertices[(k + 1) % n]);
        if let Some(piece) = ConvexPolygon::from_clipped(&clip_half_plane(&rest, p, q, false)) {
            pieces.push(piece);
        }
        rest = clip_half_plane(&rest, p, q, true);
        if rest.len() < 3 {
            break;
        }
    }
    PolygonSet::from(pieces)
}

/// Interior-disjoint collection of convex pieces describing one region.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + serde::Deserialize<'de>"))]
#[serde(transparent)]
pub struct PolygonSet<T: Scalar> {
    pieces: Vec<ConvexPolygon<T>>,
}

impl<T: Scalar> From<Vec<ConvexPolygon<T>>> for PolygonSet<T> {
    fn from(pieces: Vec<ConvexPolygon<T>>) -> Self {
        Self { pieces }
    }
}

impl<T: Scalar> PolygonSet<T> {
    pub fn new() -> Self {
        Self { pieces: Vec::new() }
    }

    #[inline]
    pub fn pieces(&self) -> &[ConvexPolygon<T>] {
        &self.pieces
    }

    pub fn into_pieces(self) -> Vec<ConvexPolygon<T>> {
        self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn total_area(&self) -> T {
        self.pieces.iter().fold(T::zero(), |acc, p| acc + p.area())
    }

    /// Area-weighted centroid over all pieces, `None` for an empty set.
    pub fn centroid(&self) -> Option<Point<T>> {
        let total = self.total_area();
        if self.pieces.is_empty() || total <= T::zero() {
            return None;
        }
        let (sx, sy) = self.pieces.iter().fold((T::zero(), T::zero()), |(sx, sy), p| {
            let (c, a) = (p.centroid(), p.area());
            (sx + c.x * a, sy + c.y * a)
        });
        Some(Point::new(sx / total, sy / total))
    }

    pub fn contains(&self, p: Point<T>, tol: T) -> bool {
        self.pieces.iter().any(|piece| piece.contains(p, tol))
    }

    /// Total area shared with another set, summed over piece pairs.
    pub fn intersection_area(&self, other: &PolygonSet<T>) -> T {
        let mut acc = T::zero();
        for a in &self.pieces {
            for b in &other.pieces {
                if let Some(i) = convex_intersection(a, b) {
                    acc = acc + i.area();
                }
            }
        }
        acc
    }

    pub fn scaled(&self, k: T) -> Self {
        Self { pieces: self.pieces.iter().map(|p| p.scaled(k)).collect() }
    }

    /// Row-major pixel membership over a `width × height` raster.
    pub fn rasterize(&self, width: usize, height: usize) -> Vec<bool> {
        let mut out = vec![false; width * height];
        for p in &self.pieces {
            p.rasterize_into(width, height, &mut out);
        }
        out
    }

    pub(crate) fn replace_piece(&mut self, index: usize, with: Vec<ConvexPolygon<T>>) {
        self.pieces.splice(index..=index, with);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    fn square(x: f64, y: f64, s: f64) -> ConvexPolygon<f64> {
        ConvexPolygon::rectangle(x, y, x + s, y + s).unwrap()
    }

    #[test]
    fn hull_drops_interior_point() {
        let h = convex_hull(&[p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.), p(0.5, 0.5)]).unwrap();
        assert_eq!(h.vertices().len(), 4);
        assert!((h.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_degenerate_cases() {
        assert!(convex_hull(&[p(0., 0.), p(1., 1.), p(2., 2.)]).is_none());
        assert!(convex_hull(&[p(0., 0.), p(1., 1.)]).is_none());
        assert!(convex_hull::<f64>(&[]).is_none());
        assert!(convex_hull(&[p(3., 3.); 10]).is_none());
    }

    #[test]
    fn hull_drops_collinear_boundary_points() {
        let h = convex_hull(&[p(0., 0.), p(1., 0.), p(2., 0.), p(2., 2.), p(0., 2.)]).unwrap();
        assert_eq!(h.vertices().len(), 4);
    }

    #[test]
    fn area_examples() {
        assert_eq!(square(0., 0., 1.).area(), 1.0);
        let t = ConvexPolygon::new(vec![p(0., 0.), p(4., 0.), p(0., 3.)]).unwrap();
        assert_eq!(t.area(), 6.0);
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(square(0., 0., 1.).centroid(), p(0.5, 0.5));
        let t = ConvexPolygon::new(vec![p(0., 0.), p(4., 0.), p(0., 3.)]).unwrap().centroid();
        assert!((t.x - 4.0 / 3.0).abs() < 1e-12 && (t.y - 1.0).abs() < 1e-12);
        let subdivided = [p(0., 0.), p(0.25, 0.), p(0.5, 0.), p(0.9, 0.), p(1., 0.), p(1., 1.), p(0., 1.)];
        let c = polygon_centroid(&subdivided).unwrap();
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
        assert!(polygon_centroid(&[p(0., 0.), p(1., 1.), p(2., 2.)]).is_err());
    }

    #[test]
    fn constructor_normalizes_orientation_and_rejects_reflex() {
        let cw = ConvexPolygon::new(vec![p(0., 0.), p(0., 1.), p(1., 1.), p(1., 0.)]).unwrap();
        assert!(signed_area(cw.vertices()) > 0.0);
        let dart = vec![p(0., 0.), p(2., 1.), p(4., 0.), p(2., 4.)];
        assert!(ConvexPolygon::new(dart).is_err());
        assert!(ConvexPolygon::new(vec![p(0., 0.), p(1., 0.), p(f64::NAN, 1.)]).is_err());
    }

    #[test]
    fn intersection_examples() {
        let a = square(0., 0., 1.);
        let same = convex_intersection(&a, &a).unwrap();
        assert!((same.area() - 1.0).abs() < 1e-12);
        assert!(convex_intersection(&a, &square(5., 0., 1.)).is_none());
        let half = convex_intersection(&a, &square(0.5, 0., 1.)).unwrap();
        assert!((half.area() - 0.5).abs() < 1e-12);
        // shared edge only
        assert!(convex_intersection(&a, &square(1., 0., 1.)).is_none());
    }

    #[test]
    fn subtract_examples() {
        let a = square(0., 0., 1.);
        assert!(convex_subtract(&a, &a).is_empty());
        let far = convex_subtract(&a, &square(5., 5., 1.));
        assert_eq!(far.pieces(), &[a.clone()]);
        let right = ConvexPolygon::rectangle(0.5, 0., 1., 1.).unwrap();
        let left = convex_subtract(&a, &right);
        assert_eq!(left.pieces().len(), 1);
        assert!((left.total_area() - 0.5).abs() < 1e-12);
        let c = left.centroid().unwrap();
        assert!((c.x - 0.25).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn subtract_partial_overlap() {
        let a = square(0., 0., 1.);
        let b = square(0.5, 0.5, 1.);
        let rest = convex_subtract(&a, &b);
        assert!((rest.total_area() - 0.75).abs() < 1e-12);
        assert!(rest.intersection_area(&PolygonSet::from(vec![b])) < 1e-12);
    }

    #[test]
    fn subtract_hole_in_middle_conserves_area() {
        let a = square(0., 0., 10.);
        let hole = square(3., 3., 2.);
        let set = convex_subtract(&a, &hole);
        assert_eq!(set.pieces().len(), 4);
        assert!((set.total_area() - 96.0).abs() < 1e-9);
        assert!(set.intersection_area(&PolygonSet::from(vec![hole])) < 1e-9);
    }

    #[test]
    fn rasterize_unit_square_and_triangle() {
        let s = square(1., 1., 2.);
        let r = PolygonSet::from(vec![s]).rasterize(5, 5);
        assert_eq!(r.iter().filter(|&&v| v).count(), 9);
        let t = ConvexPolygon::new(vec![p(0., 0.), p(4., 0.), p(0., 4.)]).unwrap();
        let r = PolygonSet::from(vec![t]).rasterize(5, 5);
        // lattice points with x + y <= 4
        assert_eq!(r.iter().filter(|&&v| v).count(), 15);
    }

    #[test]
    fn works_in_single_precision() {
        let a = ConvexPolygon::<f32>::rectangle(0., 0., 2., 2.).unwrap();
        let b = ConvexPolygon::<f32>::rectangle(1., 0., 3., 2.).unwrap();
        let i = convex_intersection(&a, &b).unwrap();
        assert!((i.area() - 2.0).abs() < 1e-5);
        let rest = convex_subtract(&a, &b);
        assert!((rest.total_area() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn polygon_serde_round_trip() {
        let t = ConvexPolygon::new(vec![p(0., 0.), p(4., 0.), p(0., 3.)]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: ConvexPolygon<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<ConvexPolygon<f64>>("[{\"x\":0,\"y\":0},{\"x\":1,\"y\":1}]").is_err());
    }
}
