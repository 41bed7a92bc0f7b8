//! Polygon kernel.
//!
//! Every geometric quantity the element formulation needs is derived here
//! from a counter-clockwise vertex loop: signed area, area centroid,
//! diameter (largest vertex-to-vertex distance) and per-edge length and
//! outward unit normal. Edge `j` runs from vertex `j` to vertex `j + 1`,
//! wrapping around to vertex 0 after the last vertex.

use nalgebra::{Point2, Vector2};
use thiserror::Error;

/// Relative tolerance for coincident vertices and vanishing area, scaled by
/// the polygon diameter.
pub const GEOMETRIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite vertex coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("vertices {0} and {1} coincide")]
    CoincidentVertices(usize, usize),
    #[error("polygon has zero area")]
    Degenerate,
    #[error("polygon vertices are ordered clockwise (signed area {0:e})")]
    Clockwise(f64),
    #[error("polygon boundary self-intersects (edges {0} and {1})")]
    SelfIntersecting(usize, usize),
}

/// Length and outward unit normal of one polygon edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub length: f64,
    pub normal: Vector2<f64>,
}

/// A simple, counter-clockwise polygon with at least three vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2<f64>>,
}

impl Polygon {
    /// Builds a polygon, rejecting too few vertices, coincident consecutive
    /// vertices, zero area and clockwise orientation. Simplicity is not
    /// checked here; see [`Polygon::check_simple`].
    pub fn new(vertices: Vec<Point2<f64>>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if let Some(i) = vertices
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite()))
        {
            return Err(GeometryError::NonFinite(i));
        }
        let h = max_pairwise_distance(&vertices);
        let tol = GEOMETRIC_TOLERANCE * h;
        for i in 0..n {
            let j = (i + 1) % n;
            if (vertices[j] - vertices[i]).norm() <= tol {
                return Err(GeometryError::CoincidentVertices(i, j));
            }
        }
        let a = signed_area(&vertices);
        if a.abs() <= GEOMETRIC_TOLERANCE * h * h {
            return Err(GeometryError::Degenerate);
        }
        if a < 0.0 {
            return Err(GeometryError::Clockwise(a));
        }
        Ok(Self { vertices })
    }

    /// Convenience constructor from coordinate pairs.
    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self, GeometryError> {
        Self::new(coords.iter().map(|&(x, y)| Point2::new(x, y)).collect())
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Shoelace area; strictly positive.
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Area-weighted centroid from the shoelace moments.
    pub fn centroid(&self) -> Point2<f64> {
        // Moments are taken about the first vertex to limit cancellation for
        // polygons far from the origin.
        let o = self.vertices[0];
        let n = self.vertices.len();
        let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i] - o;
            let q = self.vertices[(i + 1) % n] - o;
            let cross = p.x * q.y - q.x * p.y;
            a2 += cross;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
        }
        Point2::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2))
    }

    /// Largest distance between any two vertices.
    pub fn diameter(&self) -> f64 {
        max_pairwise_distance(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().iter().map(|e| e.length).sum()
    }

    /// Edge `j` joins vertex `j` to vertex `j + 1` (cyclically). For a CCW
    /// loop the outward normal of direction `(dx, dy)` is `(dy, -dx) / |e|`.
    pub fn edges(&self) -> Vec<Edge> {
        let n = self.vertices.len();
        (0..n)
            .map(|j| {
                let d = self.vertices[(j + 1) % n] - self.vertices[j];
                let length = d.norm();
                Edge {
                    length,
                    normal: Vector2::new(d.y, -d.x) / length,
                }
            })
            .collect()
    }

    /// O(n²) test that no two non-adjacent edges touch and no two adjacent
    /// edges fold back onto each other.
    pub fn check_simple(&self) -> Result<(), GeometryError> {
        let v = &self.vertices;
        let n = v.len();
        let tol = GEOMETRIC_TOLERANCE * self.diameter();
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            for j in (i + 1)..n {
                let (c, d) = (v[j], v[(j + 1) % n]);
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // Shared vertex; only a collinear fold-back is invalid.
                    let (shared, p, q) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                    let u = p - shared;
                    let w = q - shared;
                    if cross(&u, &w).abs() <= tol * (u.norm() + w.norm()) && u.dot(&w) > 0.0 {
                        return Err(GeometryError::SelfIntersecting(i, j));
                    }
                } else if segments_touch(a, b, c, d, tol) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(())
    }

    /// Point-in-polygon by the crossing rule. Points on the boundary may
    /// report either side.
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        point_in_loop(&self.vertices, p)
    }
}

/// Signed shoelace area; positive for counter-clockwise loops.
pub fn signed_area(vertices: &[Point2<f64>]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let o = vertices[0];
    let mut a2 = 0.0;
    for i in 1..n - 1 {
        let p = vertices[i] - o;
        let q = vertices[i + 1] - o;
        a2 += p.x * q.y - q.x * p.y;
    }
    0.5 * a2
}

pub fn max_pairwise_distance(points: &[Point2<f64>]) -> f64 {
    let mut best = 0.0_f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max((q - p).norm());
        }
    }
    best
}

pub fn point_in_loop(vertices: &[Point2<f64>], p: &Point2<f64>) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn cross(u: &Vector2<f64>, w: &Vector2<f64>) -> f64 {
    u.x * w.y - u.y * w.x
}

fn orient(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> f64 {
    cross(&(b - a), &(c - a))
}

fn on_segment(a: Point2<f64>, b: Point2<f64>, p: Point2<f64>, tol: f64) -> bool {
    let ab = b - a;
    let len = ab.norm();
    if len == 0.0 {
        return (p - a).norm() <= tol;
    }
    let t = (p - a).dot(&ab) / (len * len);
    let dist = cross(&ab, &(p - a)).abs() / len;
    dist <= tol && t >= -tol / len && t <= 1.0 + tol / len
}

/// True when the closed segments `ab` and `cd` intersect or come within
/// `tol` of each other at an endpoint.
pub(crate) fn segments_touch(
    a: Point2<f64>,
    b: Point2<f64>,
    c: Point2<f64>,
    d: Point2<f64>,
    tol: f64,
) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(c, d, a, tol)
        || on_segment(c, d, b, tol)
        || on_segment(a, b, c, tol)
        || on_segment(a, b, d, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pentagon() -> Polygon {
        Polygon::from_coords(&[(0.0, 0.0), (3.0, 0.0), (3.0, 2.0), (1.5, 4.0), (0.0, 4.0)]).unwrap()
    }

    fn unit_square() -> Polygon {
        Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap()
    }

    #[test]
    fn areas() {
        assert_relative_eq!(unit_square().area(), 1.0);
        assert_relative_eq!(pentagon().area(), 10.5);
    }

    #[test]
    fn clockwise_rejected() {
        let err = Polygon::from_coords(&[(0.0, 4.0), (1.5, 4.0), (3.0, 2.0), (3.0, 0.0), (0.0, 0.0)])
            .unwrap_err();
        assert!(matches!(err, GeometryError::Clockwise(a) if (a + 10.5).abs() < 1e-12));
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0)]).unwrap_err(),
            GeometryError::TooFewVertices(2)
        );
        assert_eq!(
            Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).unwrap_err(),
            GeometryError::Degenerate
        );
        assert_eq!(
            Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).unwrap_err(),
            GeometryError::CoincidentVertices(1, 2)
        );
    }

    #[test]
    fn centroids() {
        let c = unit_square().centroid();
        assert_relative_eq!(c.x, 0.5);
        assert_relative_eq!(c.y, 0.5);
        let c = pentagon().centroid();
        assert!((c.x - 1.3571).abs() < 1e-4);
        assert!((c.y - 1.8095).abs() < 1e-4);
        let t = Polygon::from_coords(&[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)]).unwrap();
        let c = t.centroid();
        assert_relative_eq!(c.x, 1.0, epsilon = 1e-14);
        assert_relative_eq!(c.y, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn diameters() {
        assert_relative_eq!(pentagon().diameter(), 5.0);
        assert_relative_eq!(unit_square().diameter(), 2f64.sqrt());
        let needle = Polygon::from_coords(&[(0.0, 0.0), (10.0, 0.0), (5.0, 0.001)]).unwrap();
        assert!((needle.diameter() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn edge_normals() {
        let e = unit_square().edges();
        assert_relative_eq!(e[0].length, 1.0);
        assert_relative_eq!(e[0].normal, Vector2::new(0.0, -1.0));
        let e = pentagon().edges();
        assert_relative_eq!(e[1].length, 2.0);
        assert_relative_eq!(e[1].normal, Vector2::new(1.0, 0.0));
        assert_relative_eq!(e[2].length, 2.5);
        assert_relative_eq!(e[2].normal, Vector2::new(0.8, 0.6), epsilon = 1e-15);
    }

    #[test]
    fn simplicity() {
        assert!(pentagon().check_simple().is_ok());
        // bow-tie has positive net area when the loops are unbalanced
        let bowtie =
            Polygon::from_coords(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (1.0, -1.0), (0.0, 2.0)])
                .unwrap();
        assert!(matches!(bowtie.check_simple(), Err(GeometryError::SelfIntersecting(..))));
        let concave =
            Polygon::from_coords(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (1.0, 0.5), (0.0, 2.0)])
                .unwrap();
        assert!(concave.check_simple().is_ok());
        assert!(concave.contains(&Point2::new(0.2, 0.4)));
        assert!(!concave.contains(&Point2::new(1.0, 1.0)));
    }
}
