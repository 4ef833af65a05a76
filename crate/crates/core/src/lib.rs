//! Continuous-time multi-agent trajectory synthesis that maximizes the
//! asynchronous temporal robustness (ATR) of a signal temporal logic
//! specification.
//!
//! Trajectories are parameterized per agent by concatenated Bézier segment
//! pairs: a curvature curve `r(s)` and a strictly increasing temporal curve
//! `h(s)`, so the physical trajectory is `x(t) = r(h⁻¹(t))`. The planner
//! translates a scenario plus an STL formula into a mixed-integer linear
//! program whose objective is a conservative per-segment ATR, solves it with
//! an embedded branch-and-bound (or an external solver over LP files), and
//! certifies every returned plan with an independent brute-force monitor.

pub mod bezier;
pub mod encoder;
pub mod geometry;
pub mod milp;
pub mod monitor;
pub mod scenario;
pub mod solvers;
pub mod stl;
pub mod trajectory;

pub use bezier::{BezierCurve, Phase};
pub use encoder::{EncodedModel, ModelStats};
pub use geometry::{BoundingBox, ConvexPolygon, HalfSpace, Point};
pub use milp::{LinExpr, MilpModel, MilpSolution, Sense, SolveStatus, VarId, VarKind};
pub use monitor::RobustnessMode;
pub use scenario::Scenario;
pub use solvers::{SolverBackend, SolverConfig, SolverStats};
pub use stl::{Formula, Interval, LinearAtom, Predicate};
pub use trajectory::{AgentTrajectory, MultiAgentPlan, SampledSignal, Segment};
