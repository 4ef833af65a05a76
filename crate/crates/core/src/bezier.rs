//! Bézier curve algebra: de Casteljau evaluation, differentiation, and the
//! convex-hull containment check the planner's conservatism rests on.

use thiserror::Error;

use crate::geometry::Point;
use crate::milp::{LinExpr, MilpModel, Sense, SolveStatus};
use crate::solvers::{solve_lp, SolverConfig};

#[derive(Debug, Error)]
pub enum BezierError {
    #[error("a Bézier curve needs at least one control point")]
    NoControlPoints,
    #[error("control points have mixed dimensions")]
    MixedDimensions,
    #[error("control point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("derivative needs degree >= 1, curve has degree 0")]
    DegreeTooLow,
    #[error("phase {0} outside [0, 1]")]
    PhaseOutOfRange(f64),
    #[error("hull sampling needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

/// Phasing parameter `s` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Phase(f64);

impl Phase {
    pub const ZERO: Phase = Phase(0.0);
    pub const ONE: Phase = Phase(1.0);

    pub fn new(s: f64) -> Result<Self, BezierError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(BezierError::PhaseOutOfRange(s));
        }
        Ok(Phase(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Polynomial curve in Bernstein form, stored as its control points.
/// Degree 0 (a constant) only arises from differentiation.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve {
    control_points: Vec<Point>,
}

impl BezierCurve {
    pub fn new(control_points: Vec<Point>) -> Result<Self, BezierError> {
        if control_points.is_empty() {
            return Err(BezierError::NoControlPoints);
        }
        let dim = control_points[0].dim();
        for (i, p) in control_points.iter().enumerate() {
            if p.dim() != dim {
                return Err(BezierError::MixedDimensions);
            }
            if p.coords.iter().any(|c| !c.is_finite()) {
                return Err(BezierError::NonFinite(i));
            }
        }
        Ok(Self { control_points })
    }

    /// Convenience constructor for 1-D curves.
    pub fn scalar(values: &[f64]) -> Result<Self, BezierError> {
        Self::new(values.iter().map(|v| Point::from(vec![*v])).collect())
    }

    pub fn degree(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.control_points[0].dim()
    }

    pub fn control_points(&self) -> &[Point] {
        &self.control_points
    }

    /// Evaluates by repeated linear interpolation. Exact at the endpoints:
    /// each lerp is computed as `(1-s)·a + s·b`.
    pub fn evaluate(&self, s: Phase) -> Point {
        let s = s.value();
        let dim = self.dim();
        let mut layer: Vec<Vec<f64>> = self
            .control_points
            .iter()
            .map(|p| p.coords.clone())
            .collect();
        let mut len = layer.len();
        while len > 1 {
            for i in 0..len - 1 {
                for c in 0..dim {
                    layer[i][c] = (1.0 - s) * layer[i][c] + s * layer[i + 1][c];
                }
            }
            len -= 1;
        }
        Point::from(layer.swap_remove(0))
    }

    /// Hodograph: degree `d-1` with control points `d·(p[b+1] - p[b])`.
    pub fn derivative(&self) -> Result<BezierCurve, BezierError> {
        let d = self.degree();
        if d < 1 {
            return Err(BezierError::DegreeTooLow);
        }
        let dim = self.dim();
        let mut pts = Vec::with_capacity(d);
        for b in 0..d {
            let mut coords = Vec::with_capacity(dim);
            for c in 0..dim {
                coords.push(d as f64 * (self.control_points[b + 1][c] - self.control_points[b][c]));
            }
            pts.push(Point::from(coords));
        }
        BezierCurve::new(pts)
    }

    /// Checks that `n_samples` uniformly spaced curve points lie in the
    /// convex hull of the control points (feasibility of a convex
    /// combination, tolerance 1e-8). Intended as a test oracle; it must
    /// return true for every well-formed curve.
    pub fn hull_contains_curve(&self, n_samples: usize) -> Result<bool, BezierError> {
        if n_samples < 2 {
            return Err(BezierError::TooFewSamples(n_samples));
        }
        for k in 0..n_samples {
            let s = Phase::new(k as f64 / (n_samples - 1) as f64)?;
            let p = self.evaluate(s);
            if !point_in_hull(&self.control_points, &p, 1e-8) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Convex-combination membership: is `p` within `tol` of the hull of `pts`?
pub fn point_in_hull(pts: &[Point], p: &Point, tol: f64) -> bool {
    let dim = p.dim();
    let mut m = MilpModel::new();
    let lambdas: Vec<_> = (0..pts.len())
        .map(|i| m.add_continuous(&format!("l{i}"), 0.0, 1.0).unwrap())
        .collect();
    let mut sum = LinExpr::new();
    for &l in &lambdas {
        sum = sum.push(1.0, l);
    }
    m.add_constraint(sum, Sense::Eq, 1.0).unwrap();
    for c in 0..dim {
        let mut e = LinExpr::new();
        for (i, &l) in lambdas.iter().enumerate() {
            e = e.push(pts[i][c], l);
        }
        m.add_constraint(e.clone(), Sense::Le, p[c] + tol).unwrap();
        m.add_constraint(e, Sense::Ge, p[c] - tol).unwrap();
    }
    m.set_objective(LinExpr::constant(0.0), true).unwrap();
    let sol = solve_lp(&m, &SolverConfig::default()).expect("hull LP is well-formed");
    sol.status == SolveStatus::Optimal
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

    #[test]
    fn linear_midpoint() {
        let c = BezierCurve::scalar(&[0.0, 1.0]).unwrap();
        let v = c.evaluate(Phase::new(0.5).unwrap());
        assert_eq!(v[0], 0.5);
    }

    #[test]
    fn endpoints_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = rng.gen_range(1..=6usize);
            let pts: Vec<Point> = (0..=d)
                .map(|_| pt(&[rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]))
                .collect();
            let c = BezierCurve::new(pts.clone()).unwrap();
            assert_eq!(c.evaluate(Phase::ZERO), pts[0]);
            assert_eq!(c.evaluate(Phase::ONE), pts[d]);
        }
    }

    #[test]
    fn quadratic_bump_midpoint_matches_bernstein_sum() {
        // Direct Bernstein evaluation of d=2, points {0, 1, 0} at s = 0.5:
        // 0.25·0 + 2·0.25·1 + 0.25·0 = 0.5.
        let c = BezierCurve::scalar(&[0.0, 1.0, 0.0]).unwrap();
        let v = c.evaluate(Phase::new(0.5).unwrap());
        assert!((v[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn phase_validation() {
        assert!(Phase::new(1.2).is_err());
        assert!(Phase::new(-0.1).is_err());
        assert!(Phase::new(0.0).is_ok());
    }

    #[test]
    fn derivative_control_points() {
        let c = BezierCurve::scalar(&[0.0, 1.0]).unwrap();
        let d = c.derivative().unwrap();
        assert_eq!(d.degree(), 0);
        assert_eq!(d.control_points()[0][0], 1.0);

        let c2 = BezierCurve::scalar(&[0.0, 1.0, 0.0]).unwrap();
        let d2 = c2.derivative().unwrap();
        assert_eq!(d2.control_points()[0][0], 2.0);
        assert_eq!(d2.control_points()[1][0], -2.0);

        assert!(matches!(d.derivative(), Err(BezierError::DegreeTooLow)));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let d = rng.gen_range(2..=5usize);
            let pts: Vec<Point> = (0..=d)
                .map(|_| pt(&[rng.gen_range(-3.0..3.0)]))
                .collect();
            let c = BezierCurve::new(pts).unwrap();
            let dc = c.derivative().unwrap();
            for _ in 0..100 {
                let s: f64 = rng.gen_range(1e-5..1.0 - 1e-5);
                let h = 1e-6;
                let f_plus = c.evaluate(Phase::new(s + h).unwrap())[0];
                let f_minus = c.evaluate(Phase::new(s - h).unwrap())[0];
                let fd = (f_plus - f_minus) / (2.0 * h);
                let an = dc.evaluate(Phase::new(s).unwrap())[0];
                assert!((fd - an).abs() <= 1e-4, "s={s}: fd {fd} vs analytic {an}");
            }
        }
    }

    #[test]
    fn derivative_commutes_with_affine_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let d = rng.gen_range(2..=5usize);
            let pts: Vec<f64> = (0..=d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let a: f64 = rng.gen_range(0.5..2.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let c = BezierCurve::scalar(&pts).unwrap();
            let mapped: Vec<f64> = pts.iter().map(|p| a * p + b).collect();
            let cm = BezierCurve::scalar(&mapped).unwrap();
            // derivative(affine(c)) = a * derivative(c): the offset drops out.
            let d1 = cm.derivative().unwrap();
            let d2 = c.derivative().unwrap();
            for (q1, q2) in d1.control_points().iter().zip(d2.control_points()) {
                assert!((q1[0] - a * q2[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hull_contains_random_curves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let d = rng.gen_range(1..=6usize);
            let pts: Vec<Point> = (0..=d)
                .map(|_| pt(&[rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)]))
                .collect();
            let c = BezierCurve::new(pts).unwrap();
            assert!(c.hull_contains_curve(60).unwrap());
        }
    }

    #[test]
    fn chord_samples_lie_on_hull() {
        let c = BezierCurve::new(vec![pt(&[0.0, 0.0]), pt(&[2.0, 1.0])]).unwrap();
        assert!(c.hull_contains_curve(100).unwrap());
    }

    #[test]
    fn shrunken_hull_excludes_a_curving_curve() {
        // Quartic ramp (0,0)x4 -> (1,1): the curve midpoint sits at 1/16,
        // well below the hull shrunk by 0.5 toward the centroid (0.2, 0.2).
        let pts = vec![
            pt(&[0.0, 0.0]),
            pt(&[0.0, 0.0]),
            pt(&[0.0, 0.0]),
            pt(&[0.0, 0.0]),
            pt(&[1.0, 1.0]),
        ];
        let c = BezierCurve::new(pts.clone()).unwrap();
        let centroid = pt(&[0.2, 0.2]);
        let shrunk: Vec<Point> = pts
            .iter()
            .map(|p| {
                pt(&[
                    centroid[0] + 0.5 * (p[0] - centroid[0]),
                    centroid[1] + 0.5 * (p[1] - centroid[1]),
                ])
            })
            .collect();
        let mid = c.evaluate(Phase::new(0.5).unwrap());
        assert!((mid[0] - 1.0 / 16.0).abs() < 1e-12);
        assert!(!point_in_hull(&shrunk, &mid, 1e-8));
        // Sanity: the true hull does contain it.
        assert!(point_in_hull(&pts, &mid, 1e-8));
    }
}
