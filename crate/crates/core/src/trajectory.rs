//! Concatenated (curvature, temporal) Bézier segment pairs per agent, plan
//! validation, time-domain evaluation `x(t) = r(h⁻¹(t))`, uniform sampling,
//! and the plan file format.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bezier::{BezierCurve, BezierError, Phase};
use crate::geometry::{ConvexPolygon, Point};

/// Join and boundary tolerance for plan invariants.
pub const JOIN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Bezier(#[from] BezierError),
    #[error("curvature and temporal curves must share a degree (r: {r}, h: {h})")]
    DegreeMismatch { r: usize, h: usize },
    #[error("temporal curve must be 1-D, got dimension {0}")]
    TemporalNotScalar(usize),
    #[error("temporal control points decrease between {0} and {1}")]
    NonMonotoneTime(usize, usize),
    #[error("agent {agent} segment {segment}: {source}")]
    Segment {
        agent: usize,
        segment: usize,
        #[source]
        source: Box<TrajectoryError>,
    },
    #[error("agent {agent}: discontinuity between segments {segment} and {next} ({what})")]
    Discontinuity {
        agent: usize,
        segment: usize,
        next: usize,
        what: &'static str,
    },
    #[error("agent {agent}: plan must span [{t0}, {tf}], got [{got_t0}, {got_tf}]")]
    BadSpan {
        agent: usize,
        t0: f64,
        tf: f64,
        got_t0: f64,
        got_tf: f64,
    },
    #[error("plan has no agents or no segments")]
    Empty,
    #[error("agent {agent} has {got} segments, expected {expected}")]
    SegmentCountMismatch {
        agent: usize,
        expected: usize,
        got: usize,
    },
    #[error("time {t} outside plan horizon [{t0}, {tf}]")]
    TimeOutOfRange { t: f64, t0: f64, tf: f64 },
    #[error("index out of range: agent {agent}, segment {segment}")]
    IndexOutOfRange { agent: usize, segment: usize },
    #[error("temporal curve is not strictly increasing where inverted")]
    NonForwardTime,
    #[error("sampling step must be positive, got {0}")]
    BadSampleStep(f64),
    #[error("plan file: {0}")]
    Format(String),
}

/// One trajectory piece: curvature curve `r` over the workspace and a 1-D
/// non-decreasing temporal curve `h` of the same degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    r: BezierCurve,
    h: BezierCurve,
}

impl Segment {
    pub fn new(r: BezierCurve, h: BezierCurve) -> Result<Self, TrajectoryError> {
        if r.degree() != h.degree() {
            return Err(TrajectoryError::DegreeMismatch {
                r: r.degree(),
                h: h.degree(),
            });
        }
        if h.dim() != 1 {
            return Err(TrajectoryError::TemporalNotScalar(h.dim()));
        }
        let hp = h.control_points();
        for b in 0..hp.len() - 1 {
            if hp[b + 1][0] < hp[b][0] - 1e-12 {
                return Err(TrajectoryError::NonMonotoneTime(b, b + 1));
            }
        }
        Ok(Self { r, h })
    }

    pub fn r(&self) -> &BezierCurve {
        &self.r
    }

    pub fn h(&self) -> &BezierCurve {
        &self.h
    }

    pub fn degree(&self) -> usize {
        self.r.degree()
    }

    /// Time span `[h^(0), h^(d)]`.
    pub fn time_span(&self) -> (f64, f64) {
        let hp = self.h.control_points();
        (hp[0][0], hp[hp.len() - 1][0])
    }

    pub fn duration(&self) -> f64 {
        let (a, b) = self.time_span();
        b - a
    }
}

/// All segments of one agent, with C0/C1 joins.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrajectory {
    segments: Vec<Segment>,
}

impl AgentTrajectory {
    pub fn new(agent: usize, segments: Vec<Segment>) -> Result<Self, TrajectoryError> {
        if segments.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for i in 0..segments.len() - 1 {
            let a = &segments[i];
            let b = &segments[i + 1];
            let a_r_last = a.r.control_points().last().unwrap();
            let b_r_first = &b.r.control_points()[0];
            if !points_close(a_r_last, b_r_first, JOIN_TOL) {
                return Err(TrajectoryError::Discontinuity {
                    agent,
                    segment: i,
                    next: i + 1,
                    what: "position (C0)",
                });
            }
            let a_h_last = a.h.control_points().last().unwrap();
            let b_h_first = &b.h.control_points()[0];
            if (a_h_last[0] - b_h_first[0]).abs() > JOIN_TOL {
                return Err(TrajectoryError::Discontinuity {
                    agent,
                    segment: i,
                    next: i + 1,
                    what: "time (C0)",
                });
            }
            let a_dr = a.r.derivative()?;
            let b_dr = b.r.derivative()?;
            if !points_close(
                a_dr.control_points().last().unwrap(),
                &b_dr.control_points()[0],
                JOIN_TOL * a.degree() as f64 * 2.0,
            ) {
                return Err(TrajectoryError::Discontinuity {
                    agent,
                    segment: i,
                    next: i + 1,
                    what: "curvature rate (C1)",
                });
            }
            let a_dh = a.h.derivative()?;
            let b_dh = b.h.derivative()?;
            let a_last = a_dh.control_points().last().unwrap()[0];
            let b_first = b_dh.control_points()[0][0];
            if (a_last - b_first).abs() > JOIN_TOL * a.degree() as f64 * 2.0 {
                return Err(TrajectoryError::Discontinuity {
                    agent,
                    segment: i,
                    next: i + 1,
                    what: "time rate (C1)",
                });
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }
}

fn points_close(a: &Point, b: &Point, tol: f64) -> bool {
    a.dim() == b.dim()
        && a.coords
            .iter()
            .zip(&b.coords)
            .all(|(x, y)| (x - y).abs() <= tol)
}

/// The planner's output: per-agent segment concatenations over `[t0, tf]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAgentPlan {
    agents: Vec<AgentTrajectory>,
    t0: f64,
    tf: f64,
}

impl MultiAgentPlan {
    pub fn new(agents: Vec<AgentTrajectory>, t0: f64, tf: f64) -> Result<Self, TrajectoryError> {
        if agents.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        let n_seg = agents[0].segments().len();
        for (k, a) in agents.iter().enumerate() {
            if a.segments().len() != n_seg {
                return Err(TrajectoryError::SegmentCountMismatch {
                    agent: k,
                    expected: n_seg,
                    got: a.segments().len(),
                });
            }
            let (start, _) = a.segments()[0].time_span();
            let (_, end) = a.segments()[n_seg - 1].time_span();
            if (start - t0).abs() > JOIN_TOL || (end - tf).abs() > JOIN_TOL {
                return Err(TrajectoryError::BadSpan {
                    agent: k,
                    t0,
                    tf,
                    got_t0: start,
                    got_tf: end,
                });
            }
        }
        Ok(Self { agents, t0, tf })
    }

    pub fn agents(&self) -> &[AgentTrajectory] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_segments(&self) -> usize {
        self.agents[0].segments().len()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn dim(&self) -> usize {
        self.agents[0].segments()[0].r().dim()
    }

    /// Time span of segment `i` of agent `k`.
    pub fn time_span(&self, k: usize, i: usize) -> Result<(f64, f64), TrajectoryError> {
        let seg = self
            .agents
            .get(k)
            .and_then(|a| a.segments().get(i))
            .ok_or(TrajectoryError::IndexOutOfRange {
                agent: k,
                segment: i,
            })?;
        Ok(seg.time_span())
    }

    /// Position and velocity of agent `k` at time `t`. Ties at shared
    /// segment boundaries resolve to the earlier segment; the values agree
    /// there by the continuity invariant.
    pub fn state_at(&self, k: usize, t: f64) -> Result<(Point, Point), TrajectoryError> {
        if t < self.t0 - JOIN_TOL || t > self.tf + JOIN_TOL {
            return Err(TrajectoryError::TimeOutOfRange {
                t,
                t0: self.t0,
                tf: self.tf,
            });
        }
        let agent = self
            .agents
            .get(k)
            .ok_or(TrajectoryError::IndexOutOfRange { agent: k, segment: 0 })?;
        let t = t.clamp(self.t0, self.tf);
        let seg = agent
            .segments()
            .iter()
            .find(|s| {
                let (a, b) = s.time_span();
                t >= a - JOIN_TOL && t <= b + JOIN_TOL
            })
            .ok_or(TrajectoryError::NonForwardTime)?;
        let (a, b) = seg.time_span();
        let s = if t <= a {
            Phase::ZERO
        } else if t >= b {
            Phase::ONE
        } else {
            invert_time(seg.h(), t)?
        };
        let pos = seg.r().evaluate(s);
        let dr = seg.r().derivative()?.evaluate(s);
        let dh = seg.h().derivative()?.evaluate(s)[0];
        if dh <= 0.0 {
            return Err(TrajectoryError::NonForwardTime);
        }
        let vel = Point::from(dr.coords.iter().map(|c| c / dh).collect::<Vec<_>>());
        Ok((pos, vel))
    }

    /// Samples all agents on the grid `t0, t0+dt, …` with `tf` always
    /// included.
    pub fn sample(&self, dt: f64) -> Result<SampledSignal, TrajectoryError> {
        if dt <= 0.0 {
            return Err(TrajectoryError::BadSampleStep(dt));
        }
        let mut times = Vec::new();
        let mut t = self.t0;
        while t < self.tf - 1e-12 {
            times.push(t);
            t += dt;
        }
        times.push(self.tf);
        let mut per_agent = Vec::with_capacity(self.agents.len());
        for k in 0..self.agents.len() {
            let mut series = Vec::with_capacity(times.len());
            for &t in &times {
                let (pos, _) = self.state_at(k, t)?;
                series.push(pos);
            }
            per_agent.push(series);
        }
        Ok(SampledSignal { times, per_agent })
    }
}

/// Solves `h(s) = t` by bisection; valid because `h` is non-decreasing.
fn invert_time(h: &BezierCurve, t: f64) -> Result<Phase, TrajectoryError> {
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = h.evaluate(Phase::new(mid).expect("mid in range"))[0];
        if (v - t).abs() <= JOIN_TOL {
            return Ok(Phase::new(mid).unwrap());
        }
        if v < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Phase::new(0.5 * (lo + hi)).unwrap())
}

/// Per-agent position time series on a shared grid. Evaluation outside the
/// grid clamps to the boundary samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub times: Vec<f64>,
    /// `per_agent[k][ti]` is the position of agent `k` at `times[ti]`.
    pub per_agent: Vec<Vec<Point>>,
}

impl SampledSignal {
    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn tf(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn n_agents(&self) -> usize {
        self.per_agent.len()
    }

    pub fn dim(&self) -> usize {
        self.per_agent[0][0].dim()
    }

    /// Linear interpolation with boundary clamping.
    pub fn value_at(&self, agent: usize, t: f64) -> Point {
        let series = &self.per_agent[agent];
        if t <= self.times[0] {
            return series[0].clone();
        }
        if t >= *self.times.last().unwrap() {
            return series.last().unwrap().clone();
        }
        let idx = self.times.partition_point(|&x| x <= t);
        let (i0, i1) = (idx - 1, idx);
        let (t0, t1) = (self.times[i0], self.times[i1]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let a = &series[i0];
        let b = &series[i1];
        Point::from(
            a.coords
                .iter()
                .zip(&b.coords)
                .map(|(x, y)| (1.0 - w) * x + w * y)
                .collect::<Vec<_>>(),
        )
    }
}

/// One plan-validation finding.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub agent: usize,
    pub segment: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NonForwardTime,
    Discontinuity,
    BadSpan,
    VelocityBound,
    OutsideWorkspace,
    InsideObstacle,
}

/// Everything `validate` needs to check a plan against its scenario.
pub struct ValidationContext<'a> {
    pub t0: f64,
    pub tf: f64,
    pub eps_time: f64,
    pub vmin: &'a [Vec<f64>],
    pub vmax: &'a [Vec<f64>],
    pub workspace: &'a ConvexPolygon,
    pub obstacles: &'a [ConvexPolygon],
}

/// Checks plan invariants plus sampled velocity bounds and free-workspace
/// membership (100 samples per segment). Reports findings, never fails.
pub fn validate(plan: &MultiAgentPlan, ctx: &ValidationContext) -> Vec<Violation> {
    let mut out = Vec::new();
    let vel_tol = 1e-6;
    for (k, agent) in plan.agents().iter().enumerate() {
        for (i, seg) in agent.segments().iter().enumerate() {
            let d = seg.degree() as f64;
            let hp = seg.h().control_points();
            for b in 0..hp.len() - 1 {
                let gap = hp[b + 1][0] - hp[b][0];
                if d * gap < ctx.eps_time - 1e-9 {
                    out.push(Violation {
                        agent: k,
                        segment: i,
                        kind: ViolationKind::NonForwardTime,
                        detail: format!(
                            "time-rate control point {b} is {:.3e}, below eps_time {:.3e}",
                            d * gap,
                            ctx.eps_time
                        ),
                    });
                }
            }
        }
        // Joins.
        for i in 0..agent.segments().len() - 1 {
            let a = &agent.segments()[i];
            let b = &agent.segments()[i + 1];
            let pos_ok = points_close(
                a.r().control_points().last().unwrap(),
                &b.r().control_points()[0],
                JOIN_TOL,
            );
            let time_ok = (a.h().control_points().last().unwrap()[0]
                - b.h().control_points()[0][0])
                .abs()
                <= JOIN_TOL;
            if !pos_ok || !time_ok {
                out.push(Violation {
                    agent: k,
                    segment: i,
                    kind: ViolationKind::Discontinuity,
                    detail: "C0/C1 discontinuity at segment join".into(),
                });
            }
        }
        let (start, _) = agent.segments()[0].time_span();
        let (_, end) = agent.segments().last().unwrap().time_span();
        if (start - ctx.t0).abs() > JOIN_TOL || (end - ctx.tf).abs() > JOIN_TOL {
            out.push(Violation {
                agent: k,
                segment: 0,
                kind: ViolationKind::BadSpan,
                detail: format!("plan spans [{start}, {end}], scenario wants [{}, {}]", ctx.t0, ctx.tf),
            });
        }
        // Sampled kinematics and workspace membership.
        for (i, seg) in agent.segments().iter().enumerate() {
            for step in 0..=100 {
                let s = Phase::new(step as f64 / 100.0).unwrap();
                let pos = seg.r().evaluate(s);
                let dr = seg.r().derivative().unwrap().evaluate(s);
                let dh = seg.h().derivative().unwrap().evaluate(s)[0];
                if dh > 0.0 {
                    for c in 0..pos.dim() {
                        let v = dr[c] / dh;
                        if v < ctx.vmin[k][c] - vel_tol || v > ctx.vmax[k][c] + vel_tol {
                            out.push(Violation {
                                agent: k,
                                segment: i,
                                kind: ViolationKind::VelocityBound,
                                detail: format!(
                                    "velocity component {c} = {v:.6} outside [{}, {}]",
                                    ctx.vmin[k][c], ctx.vmax[k][c]
                                ),
                            });
                            break;
                        }
                    }
                }
                if !ctx.workspace.contains(&pos).unwrap_or(false) {
                    out.push(Violation {
                        agent: k,
                        segment: i,
                        kind: ViolationKind::OutsideWorkspace,
                        detail: format!("sample at s={} leaves the workspace", s.value()),
                    });
                    break;
                }
                for obs in ctx.obstacles {
                    let strictly_inside = obs
                        .faces()
                        .iter()
                        .all(|f| f.margin(&pos) >= 1e-9);
                    if strictly_inside {
                        out.push(Violation {
                            agent: k,
                            segment: i,
                            kind: ViolationKind::InsideObstacle,
                            detail: format!("sample at s={} enters an obstacle", s.value()),
                        });
                        break;
                    }
                }
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFileSegment {
    r: Vec<Vec<f64>>,
    h: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFileAgent {
    segments: Vec<PlanFileSegment>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    t0: f64,
    tf: f64,
    dim: usize,
    degree: usize,
    agents: Vec<PlanFileAgent>,
}

/// Serializes a plan losslessly (shortest round-trip decimals).
pub fn write_plan(plan: &MultiAgentPlan) -> String {
    let file = PlanFile {
        t0: plan.t0(),
        tf: plan.tf(),
        dim: plan.dim(),
        degree: plan.agents()[0].segments()[0].degree(),
        agents: plan
            .agents()
            .iter()
            .map(|a| PlanFileAgent {
                segments: a
                    .segments()
                    .iter()
                    .map(|s| PlanFileSegment {
                        r: s.r()
                            .control_points()
                            .iter()
                            .map(|p| p.coords.clone())
                            .collect(),
                        h: s.h().control_points().iter().map(|p| p[0]).collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("plan serialization cannot fail")
}

/// Parses and fully validates a plan file.
pub fn read_plan(text: &str) -> Result<MultiAgentPlan, TrajectoryError> {
    let file: PlanFile =
        serde_json::from_str(text).map_err(|e| TrajectoryError::Format(e.to_string()))?;
    if file.agents.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    let n_seg = file.agents[0].segments.len();
    let mut agents = Vec::with_capacity(file.agents.len());
    for (k, fa) in file.agents.iter().enumerate() {
        if fa.segments.len() != n_seg || n_seg == 0 {
            return Err(TrajectoryError::SegmentCountMismatch {
                agent: k,
                expected: n_seg.max(1),
                got: fa.segments.len(),
            });
        }
        let mut segments = Vec::with_capacity(n_seg);
        for (i, fs) in fa.segments.iter().enumerate() {
            if fs.r.len() != file.degree + 1 || fs.h.len() != file.degree + 1 {
                return Err(TrajectoryError::Format(format!(
                    "agent {k} segment {i}: expected {} control points, got r={}, h={}",
                    file.degree + 1,
                    fs.r.len(),
                    fs.h.len()
                )));
            }
            for (b, p) in fs.r.iter().enumerate() {
                if p.len() != file.dim {
                    return Err(TrajectoryError::Format(format!(
                        "agent {k} segment {i} control point {b}: expected dim {}, got {}",
                        file.dim,
                        p.len()
                    )));
                }
            }
            let r = BezierCurve::new(fs.r.iter().map(|p| Point::from(p.clone())).collect())?;
            let h = BezierCurve::new(fs.h.iter().map(|v| Point::from(vec![*v])).collect())?;
            let seg = Segment::new(r, h).map_err(|e| TrajectoryError::Segment {
                agent: k,
                segment: i,
                source: Box::new(e),
            })?;
            segments.push(seg);
        }
        agents.push(AgentTrajectory::new(k, segments)?);
    }
    MultiAgentPlan::new(agents, file.t0, file.tf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexPolygon;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(coords: &[f64]) -> Point {
        Point::from(coords.to_vec())
    }

    /// Straight-line plan in 1-D: r from x0 to x1, h the identity time map.
    fn linear_plan(x0: f64, x1: f64, t0: f64, tf: f64, d: usize) -> MultiAgentPlan {
        let r_pts: Vec<f64> = (0..=d)
            .map(|b| x0 + (x1 - x0) * b as f64 / d as f64)
            .collect();
        let h_pts: Vec<f64> = (0..=d)
            .map(|b| t0 + (tf - t0) * b as f64 / d as f64)
            .collect();
        let seg = Segment::new(
            BezierCurve::scalar(&r_pts).unwrap(),
            BezierCurve::scalar(&h_pts).unwrap(),
        )
        .unwrap();
        MultiAgentPlan::new(vec![AgentTrajectory::new(0, vec![seg]).unwrap()], t0, tf).unwrap()
    }

    #[test]
    fn time_span_basics() {
        let seg = Segment::new(
            BezierCurve::scalar(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap(),
            BezierCurve::scalar(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(seg.time_span(), (0.0, 4.0));

        let plan = linear_plan(0.0, 10.0, 2.0, 7.0, 3);
        assert_eq!(plan.time_span(0, 0).unwrap(), (2.0, 7.0));
        assert!(plan.time_span(0, 1).is_err());
    }

    #[test]
    fn identity_time_map_state() {
        let plan = linear_plan(0.0, 10.0, 0.0, 10.0, 3);
        let (pos, vel) = plan.state_at(0, 3.0).unwrap();
        assert!((pos[0] - 3.0).abs() < 1e-9);
        assert!((vel[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn state_at_t0_is_exact() {
        let plan = linear_plan(2.5, 9.0, 0.0, 4.0, 4);
        let (pos, _) = plan.state_at(0, 0.0).unwrap();
        assert_eq!(pos[0], 2.5);
        assert!(plan.state_at(0, -0.1).is_err());
        assert!(plan.state_at(0, 4.2).is_err());
    }

    #[test]
    fn nonlinear_h_matches_parametric_sampling() {
        // Quadratic r and a nonlinear (but monotone) h.
        let r = BezierCurve::scalar(&[0.0, 5.0, 3.0]).unwrap();
        let h = BezierCurve::scalar(&[0.0, 0.5, 4.0]).unwrap();
        let seg = Segment::new(r.clone(), h.clone()).unwrap();
        let plan =
            MultiAgentPlan::new(vec![AgentTrajectory::new(0, vec![seg]).unwrap()], 0.0, 4.0)
                .unwrap();
        for k in 0..=1000 {
            let s = Phase::new(k as f64 / 1000.0).unwrap();
            let t = h.evaluate(s)[0];
            let expected = r.evaluate(s)[0];
            let (pos, _) = plan.state_at(0, t).unwrap();
            assert!(
                (pos[0] - expected).abs() <= 1e-6,
                "s={} t={t}: {} vs {expected}",
                s.value(),
                pos[0]
            );
        }
    }

    #[test]
    fn plan_continuity_is_lipschitz_in_time() {
        let r = BezierCurve::scalar(&[0.0, 2.0, 1.5, 4.0]).unwrap();
        let h = BezierCurve::scalar(&[0.0, 1.0, 2.5, 4.0]).unwrap();
        let seg = Segment::new(r, h).unwrap();
        let plan =
            MultiAgentPlan::new(vec![AgentTrajectory::new(0, vec![seg]).unwrap()], 0.0, 4.0)
                .unwrap();
        // Velocity bound from control points: |dr|max / |dh|min.
        let vmax = 3.0 * 2.0 / (3.0 * 1.0); // max dr cp = 6, min dh cp = 3
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let t1: f64 = rng.gen_range(0.0..4.0);
            let t2: f64 = rng.gen_range(0.0..4.0);
            let (p1, _) = plan.state_at(0, t1).unwrap();
            let (p2, _) = plan.state_at(0, t2).unwrap();
            assert!((p1[0] - p2[0]).abs() <= vmax * (t1 - t2).abs() + 1e-6);
        }
    }

    #[test]
    fn segment_constructor_rejects_bad_curves() {
        let r = BezierCurve::scalar(&[0.0, 1.0]).unwrap();
        let h3 = BezierCurve::scalar(&[0.0, 0.5, 1.0]).unwrap();
        assert!(matches!(
            Segment::new(r.clone(), h3),
            Err(TrajectoryError::DegreeMismatch { .. })
        ));
        let h_dec = BezierCurve::scalar(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            Segment::new(r, h_dec),
            Err(TrajectoryError::NonMonotoneTime(..))
        ));
    }

    #[test]
    fn sampling_grid() {
        let plan = linear_plan(0.0, 10.0, 0.0, 10.0, 2);
        let sig = plan.sample(10.0).unwrap();
        assert_eq!(sig.times, vec![0.0, 10.0]);
        assert_eq!(sig.per_agent[0][0][0], 0.0);
        assert_eq!(sig.per_agent[0][1][0], 10.0);

        let sig2 = plan.sample(3.0).unwrap();
        assert_eq!(sig2.times.len(), 5); // 0, 3, 6, 9, 10
        assert!((sig2.times[4] - 10.0).abs() < 1e-12);
        // Identity map + linear r: samples on a straight line.
        for (t, p) in sig2.times.iter().zip(&sig2.per_agent[0]) {
            assert!((p[0] - t).abs() < 1e-9);
        }
        assert!(plan.sample(0.0).is_err());
    }

    #[test]
    fn interpolation_clamps_outside_horizon() {
        let plan = linear_plan(0.0, 10.0, 0.0, 10.0, 2);
        let sig = plan.sample(1.0).unwrap();
        assert_eq!(sig.value_at(0, -5.0)[0], 0.0);
        assert_eq!(sig.value_at(0, 50.0)[0], 10.0);
        assert!((sig.value_at(0, 2.5)[0] - 2.5).abs() < 1e-9);
    }

    #[test]
    fn h_inversion_round_trip() {
        let r = BezierCurve::scalar(&[1.0, 4.0, 2.0, 6.0]).unwrap();
        let h = BezierCurve::scalar(&[0.0, 2.0, 2.5, 5.0]).unwrap();
        let seg = Segment::new(r.clone(), h.clone()).unwrap();
        let plan =
            MultiAgentPlan::new(vec![AgentTrajectory::new(0, vec![seg]).unwrap()], 0.0, 5.0)
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let s = Phase::new(rng.gen_range(0.0..1.0)).unwrap();
            let t = h.evaluate(s)[0];
            let (pos, _) = plan.state_at(0, t).unwrap();
            assert!((pos[0] - r.evaluate(s)[0]).abs() <= 1e-6);
        }
    }

    #[test]
    fn validate_flags_problems() {
        let ws = ConvexPolygon::from_vertices(vec![pt(&[-100.0]), pt(&[100.0])]).unwrap();
        let vmin = vec![vec![-2.0]];
        let vmax = vec![vec![2.0]];
        let ctx = ValidationContext {
            t0: 0.0,
            tf: 10.0,
            eps_time: 1e-3,
            vmin: &vmin,
            vmax: &vmax,
            workspace: &ws,
            obstacles: &[],
        };
        let good = linear_plan(0.0, 10.0, 0.0, 10.0, 3);
        assert!(validate(&good, &ctx).is_empty());

        // Stalled time curve: consecutive equal h control points.
        let r = BezierCurve::scalar(&[0.0, 0.0, 0.0]).unwrap();
        let h = BezierCurve::scalar(&[0.0, 0.0, 10.0]).unwrap();
        let stalled = MultiAgentPlan::new(
            vec![AgentTrajectory::new(0, vec![Segment::new(r, h).unwrap()]).unwrap()],
            0.0,
            10.0,
        )
        .unwrap();
        let findings = validate(&stalled, &ctx);
        assert!(findings
            .iter()
            .any(|v| v.kind == ViolationKind::NonForwardTime));

        // Too fast for the bounds.
        let fast = linear_plan(0.0, 50.0, 0.0, 10.0, 3);
        assert!(validate(&fast, &ctx)
            .iter()
            .any(|v| v.kind == ViolationKind::VelocityBound));
    }

    #[test]
    fn mismatched_joint_control_points_rejected() {
        let s1 = Segment::new(
            BezierCurve::scalar(&[0.0, 1.0]).unwrap(),
            BezierCurve::scalar(&[0.0, 1.0]).unwrap(),
        )
        .unwrap();
        let s2 = Segment::new(
            BezierCurve::scalar(&[2.0, 3.0]).unwrap(),
            BezierCurve::scalar(&[1.0, 2.0]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            AgentTrajectory::new(0, vec![s1, s2]),
            Err(TrajectoryError::Discontinuity { .. })
        ));
    }

    #[test]
    fn plan_file_round_trip() {
        let r = BezierCurve::new(vec![
            pt(&[0.1234567890123456, 1.0]),
            pt(&[0.5, 2.0 / 3.0]),
            pt(&[1.0, 0.333333333333333314829616256247]),
        ])
        .unwrap();
        let h = BezierCurve::scalar(&[0.0, 1.7320508075688772, 3.0]).unwrap();
        let seg = Segment::new(r, h).unwrap();
        let plan =
            MultiAgentPlan::new(vec![AgentTrajectory::new(0, vec![seg]).unwrap()], 0.0, 3.0)
                .unwrap();
        let text = write_plan(&plan);
        let back = read_plan(&text).unwrap();
        assert_eq!(plan, back);
    }

    #[test]
    fn plan_file_errors_name_agent_and_segment() {
        let text = r#"{
            "t0": 0.0, "tf": 1.0, "dim": 1, "degree": 2,
            "agents": [
                {"segments": [{"r": [[0.0],[0.5],[1.0]], "h": [0.0,0.5,1.0]}]},
                {"segments": []}
            ]
        }"#;
        match read_plan(text) {
            Err(TrajectoryError::SegmentCountMismatch { agent, .. }) => assert_eq!(agent, 1),
            other => panic!("unexpected: {other:?}"),
        }

        let bad_h = r#"{
            "t0": 0.0, "tf": 1.0, "dim": 1, "degree": 2,
            "agents": [
                {"segments": [{"r": [[0.0],[0.5],[1.0]], "h": [0.0,0.8,0.5]}]}
            ]
        }"#;
        match read_plan(bad_h) {
            Err(TrajectoryError::BadSpan { .. }) | Err(TrajectoryError::Segment { .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
