//! Convex polygon and half-space primitives.
//!
//! Polygons are closed: boundary points count as inside, matching the closed
//! time intervals used everywhere else in the planner. Both 1-D polygons
//! (intervals) and counterclockwise 2-D polygons are supported.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for vertex/face consistency and containment checks.
pub const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point has non-finite coordinate at index {0}")]
    NonFiniteCoordinate(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polygon needs at least {needed} vertices in {dim}-D, got {got}")]
    TooFewVertices { needed: usize, dim: usize, got: usize },
    #[error("duplicate vertices at positions {0} and {1}")]
    DuplicateVertices(usize, usize),
    #[error("collinear or degenerate vertices around position {0}")]
    CollinearVertices(usize),
    #[error("vertices are not in counterclockwise order")]
    WrongOrientation,
    #[error("vertices do not describe a convex polygon (reflex corner at position {0})")]
    NonConvex(usize),
    #[error("only 1-D and 2-D polygons are supported, got dimension {0}")]
    UnsupportedDimension(usize),
    #[error("empty point set")]
    EmptyPointSet,
    #[error("mixed point dimensions in input")]
    MixedDimensions,
}

/// A point in the workspace (1-D or 2-D for polygons; any dimension elsewhere).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        for (i, c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(GeometryError::NonFiniteCoordinate(i));
            }
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.coords.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

/// Closed half-space `offset - normal·x >= 0`; `normal` points outward.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        debug_assert!(normal.iter().any(|c| *c != 0.0));
        Self { normal, offset }
    }

    /// Signed margin of `p`: nonnegative inside, negative outside.
    pub fn margin(&self, p: &Point) -> f64 {
        self.offset - p.dot(&self.normal)
    }
}

/// Convex polygon given by vertices and the equivalent face half-spaces.
///
/// Immutable after construction; vertex/face consistency is validated once.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
    faces: Vec<HalfSpace>,
}

impl ConvexPolygon {
    /// Builds a polygon from vertices: two distinct points in 1-D (an
    /// interval), or at least three non-collinear counterclockwise points
    /// in 2-D.
    pub fn from_vertices(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        let dim = vertices.first().map(Point::dim).unwrap_or(0);
        if vertices.iter().any(|v| v.dim() != dim) {
            return Err(GeometryError::MixedDimensions);
        }
        for v in &vertices {
            for (i, c) in v.coords.iter().enumerate() {
                if !c.is_finite() {
                    return Err(GeometryError::NonFiniteCoordinate(i));
                }
            }
        }
        match dim {
            1 => Self::interval_from_vertices(vertices),
            2 => Self::planar_from_vertices(vertices),
            d => Err(GeometryError::UnsupportedDimension(d)),
        }
    }

    fn interval_from_vertices(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 2 {
            return Err(GeometryError::TooFewVertices {
                needed: 2,
                dim: 1,
                got: vertices.len(),
            });
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in &vertices {
            lo = lo.min(v[0]);
            hi = hi.max(v[0]);
        }
        if hi - lo <= GEOM_TOL {
            return Err(GeometryError::DuplicateVertices(0, 1));
        }
        let faces = vec![
            HalfSpace::new(vec![-1.0], -lo), // x >= lo
            HalfSpace::new(vec![1.0], hi),   // x <= hi
        ];
        Ok(Self {
            vertices: vec![Point::from(vec![lo]), Point::from(vec![hi])],
            faces,
        })
    }

    fn planar_from_vertices(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices {
                needed: 3,
                dim: 2,
                got: n,
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = vertices[i][0] - vertices[j][0];
                let dy = vertices[i][1] - vertices[j][1];
                if dx.abs() <= GEOM_TOL && dy.abs() <= GEOM_TOL {
                    return Err(GeometryError::DuplicateVertices(i, j));
                }
            }
        }
        // Cross products of consecutive edges decide orientation and convexity.
        let mut negatives = 0usize;
        let mut positives = 0usize;
        for i in 0..n {
            let a = &vertices[i];
            let b = &vertices[(i + 1) % n];
            let c = &vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            let scale = edge_len(a, b).max(edge_len(b, c)).max(1.0);
            if cross.abs() <= GEOM_TOL * scale * scale {
                return Err(GeometryError::CollinearVertices((i + 1) % n));
            }
            if cross > 0.0 {
                positives += 1;
            } else {
                negatives += 1;
            }
        }
        if negatives > 0 && positives > 0 {
            let first_bad = 0; // report the polygon, position is informative only
            return Err(GeometryError::NonConvex(first_bad));
        }
        if negatives > 0 {
            return Err(GeometryError::WrongOrientation);
        }
        let mut faces = Vec::with_capacity(n);
        for i in 0..n {
            let a = &vertices[i];
            let b = &vertices[(i + 1) % n];
            // Outward normal of a counterclockwise edge.
            let nx = b[1] - a[1];
            let ny = -(b[0] - a[0]);
            let len = (nx * nx + ny * ny).sqrt();
            let normal = vec![nx / len, ny / len];
            let offset = a[0] * normal[0] + a[1] * normal[1];
            faces.push(HalfSpace::new(normal, offset));
        }
        let poly = Self { vertices, faces };
        poly.check_consistency()?;
        Ok(poly)
    }

    fn check_consistency(&self) -> Result<(), GeometryError> {
        let dim = self.dim();
        for v in &self.vertices {
            for f in &self.faces {
                if f.margin(v) < -GEOM_TOL {
                    return Err(GeometryError::NonConvex(0));
                }
            }
        }
        for (fi, f) in self.faces.iter().enumerate() {
            let tight = self
                .vertices
                .iter()
                .filter(|v| f.margin(v).abs() <= 1e-7)
                .count();
            if tight < dim {
                return Err(GeometryError::CollinearVertices(fi));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[HalfSpace] {
        &self.faces
    }

    /// Closed containment test with tolerance `GEOM_TOL`.
    pub fn contains(&self, p: &Point) -> Result<bool, GeometryError> {
        if p.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        Ok(self.faces.iter().all(|f| f.margin(p) >= -GEOM_TOL))
    }

    pub fn centroid(&self) -> Point {
        let dim = self.dim();
        let mut c = vec![0.0; dim];
        for v in &self.vertices {
            for (acc, x) in c.iter_mut().zip(&v.coords) {
                *acc += x;
            }
        }
        for acc in &mut c {
            *acc /= self.vertices.len() as f64;
        }
        Point::from(c)
    }

    pub fn bounding_box(&self) -> BoundingBox {
        bounding_box(&self.vertices).expect("polygon has vertices")
    }
}

impl Serialize for ConvexPolygon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            vertices: &'a [Point],
        }
        Repr {
            vertices: &self.vertices,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConvexPolygon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            vertices: Vec<Point>,
        }
        let repr = Repr::deserialize(d)?;
        ConvexPolygon::from_vertices(repr.vertices).map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lo: Point,
    pub hi: Point,
}

impl BoundingBox {
    pub fn contains(&self, p: &Point) -> bool {
        p.coords
            .iter()
            .zip(self.lo.coords.iter().zip(&self.hi.coords))
            .all(|(x, (lo, hi))| *x >= lo - GEOM_TOL && *x <= hi + GEOM_TOL)
    }
}

fn edge_len(a: &Point, b: &Point) -> f64 {
    a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Componentwise min/max of a non-empty point set.
pub fn bounding_box(points: &[Point]) -> Result<BoundingBox, GeometryError> {
    let first = points.first().ok_or(GeometryError::EmptyPointSet)?;
    let dim = first.dim();
    let mut lo = first.coords.clone();
    let mut hi = first.coords.clone();
    for p in &points[1..] {
        if p.dim() != dim {
            return Err(GeometryError::MixedDimensions);
        }
        for c in 0..dim {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    Ok(BoundingBox {
        lo: Point::from(lo),
        hi: Point::from(hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(coords: &[f64]) -> Point {
        Point::from(coords.to_vec())
    }

    fn unit_square() -> ConvexPolygon {
        ConvexPolygon::from_vertices(vec![
            pt(&[0.0, 0.0]),
            pt(&[1.0, 0.0]),
            pt(&[1.0, 1.0]),
            pt(&[0.0, 1.0]),
        ])
        .unwrap()
    }

    /// Ray-crossing point-in-polygon test, independent of the face
    /// representation used by `contains`.
    fn winding_contains(vertices: &[Point], p: &Point, tol: f64) -> bool {
        let n = vertices.len();
        // On-edge check first so boundary points count as inside.
        for i in 0..n {
            let a = &vertices[i];
            let b = &vertices[(i + 1) % n];
            let ex = b[0] - a[0];
            let ey = b[1] - a[1];
            let px = p[0] - a[0];
            let py = p[1] - a[1];
            let cross = ex * py - ey * px;
            let len2 = ex * ex + ey * ey;
            let t = (px * ex + py * ey) / len2;
            if cross.abs() <= tol * len2.sqrt().max(1.0) && (-tol..=1.0 + tol).contains(&t) {
                return true;
            }
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = (vertices[i][0], vertices[i][1]);
            let (xj, yj) = (vertices[j][0], vertices[j][1]);
            if (yi > p[1]) != (yj > p[1]) {
                let x_int = xj + (p[1] - yj) * (xi - xj) / (yi - yj);
                if p[0] < x_int {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    #[test]
    fn unit_square_has_four_faces_each_tight_at_two_vertices() {
        let sq = unit_square();
        assert_eq!(sq.faces().len(), 4);
        for f in sq.faces() {
            let tight = sq
                .vertices()
                .iter()
                .filter(|v| f.margin(v).abs() <= 1e-12)
                .count();
            assert_eq!(tight, 2);
        }
    }

    #[test]
    fn interval_faces() {
        let iv =
            ConvexPolygon::from_vertices(vec![pt(&[20.0]), pt(&[40.0])]).unwrap();
        assert_eq!(iv.faces().len(), 2);
        assert!(iv.contains(&pt(&[20.0])).unwrap());
        assert!(iv.contains(&pt(&[40.0])).unwrap());
        assert!(iv.contains(&pt(&[30.0])).unwrap());
        assert!(!iv.contains(&pt(&[19.9])).unwrap());
        assert!(!iv.contains(&pt(&[40.1])).unwrap());
        // x >= 20 face evaluates to x - 20.
        assert!((iv.faces()[0].margin(&pt(&[25.0])) - 5.0).abs() < 1e-12);
        // x <= 40 face evaluates to 40 - x.
        assert!((iv.faces()[1].margin(&pt(&[25.0])) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn containment_basic() {
        let sq = unit_square();
        assert!(sq.contains(&pt(&[0.5, 0.5])).unwrap());
        assert!(sq.contains(&pt(&[1.0, 1.0])).unwrap()); // boundary inclusive
        assert!(!sq.contains(&pt(&[1.1, 0.5])).unwrap());
        assert!(matches!(
            sq.contains(&pt(&[0.5])),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        // Clockwise square.
        assert!(matches!(
            ConvexPolygon::from_vertices(vec![
                pt(&[0.0, 0.0]),
                pt(&[0.0, 1.0]),
                pt(&[1.0, 1.0]),
                pt(&[1.0, 0.0]),
            ]),
            Err(GeometryError::WrongOrientation)
        ));
        // Non-convex quad.
        assert!(matches!(
            ConvexPolygon::from_vertices(vec![
                pt(&[0.0, 0.0]),
                pt(&[2.0, 0.0]),
                pt(&[0.5, 0.5]),
                pt(&[0.0, 2.0]),
            ]),
            Err(GeometryError::NonConvex(_))
        ));
        // Duplicate vertex.
        assert!(matches!(
            ConvexPolygon::from_vertices(vec![
                pt(&[0.0, 0.0]),
                pt(&[1.0, 0.0]),
                pt(&[1.0, 0.0]),
                pt(&[0.0, 1.0]),
            ]),
            Err(GeometryError::DuplicateVertices(..))
        ));
        // Collinear triple.
        assert!(matches!(
            ConvexPolygon::from_vertices(vec![
                pt(&[0.0, 0.0]),
                pt(&[1.0, 0.0]),
                pt(&[2.0, 0.0]),
                pt(&[0.0, 1.0]),
            ]),
            Err(GeometryError::CollinearVertices(_))
        ));
        // Degenerate interval.
        assert!(ConvexPolygon::from_vertices(vec![pt(&[3.0]), pt(&[3.0])]).is_err());
    }

    #[test]
    fn vertices_and_centroid_are_inside() {
        let hexagon = ConvexPolygon::from_vertices(vec![
            pt(&[2.0, 0.0]),
            pt(&[4.0, 1.0]),
            pt(&[4.5, 3.0]),
            pt(&[2.5, 4.5]),
            pt(&[0.5, 3.5]),
            pt(&[0.0, 1.5]),
        ])
        .unwrap();
        for v in hexagon.vertices() {
            assert!(hexagon.contains(v).unwrap());
        }
        assert!(hexagon.contains(&hexagon.centroid()).unwrap());
    }

    #[test]
    fn contains_agrees_with_winding_oracle_on_random_points() {
        let hexagon = ConvexPolygon::from_vertices(vec![
            pt(&[2.0, 0.0]),
            pt(&[4.0, 1.0]),
            pt(&[4.5, 3.0]),
            pt(&[2.5, 4.5]),
            pt(&[0.5, 3.5]),
            pt(&[0.0, 1.5]),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut disagreements = 0;
        for _ in 0..1000 {
            let p = pt(&[rng.gen_range(-1.0..6.0), rng.gen_range(-1.0..6.0)]);
            let via_faces = hexagon.contains(&p).unwrap();
            let via_winding = winding_contains(hexagon.vertices(), &p, 1e-9);
            if via_faces != via_winding {
                // Tolerate disagreement only within 1e-6 of the boundary.
                let min_margin = hexagon
                    .faces()
                    .iter()
                    .map(|f| f.margin(&p))
                    .fold(f64::INFINITY, f64::min);
                assert!(min_margin.abs() <= 1e-6, "disagreement away from boundary");
                disagreements += 1;
            }
        }
        assert!(disagreements <= 2);
    }

    #[test]
    fn bounding_box_examples() {
        let bb = bounding_box(&[pt(&[0.0, 0.0]), pt(&[2.0, 1.0])]).unwrap();
        assert_eq!(bb.lo, pt(&[0.0, 0.0]));
        assert_eq!(bb.hi, pt(&[2.0, 1.0]));

        let single = bounding_box(&[pt(&[3.0, -1.0])]).unwrap();
        assert_eq!(single.lo, single.hi);

        assert!(matches!(
            bounding_box(&[]),
            Err(GeometryError::EmptyPointSet)
        ));
    }

    #[test]
    fn polygon_serde_round_trip() {
        let sq = unit_square();
        let json = serde_json::to_string(&sq).unwrap();
        let back: ConvexPolygon = serde_json::from_str(&json).unwrap();
        assert_eq!(sq, back);
    }
}
