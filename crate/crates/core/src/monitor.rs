//! Independent brute-force ATR oracle on sampled signals, plus the
//! conservative per-segment characteristic. This module is the correctness
//! anchor: every plan the planner returns is re-checked here.
//!
//! Shifts beyond the signal horizon clamp to the boundary state (a robot
//! parked at its start or goal). The same convention backs the encoder's
//! horizon handling, so the two sides stay comparable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::stl::{Formula, Predicate};
use crate::trajectory::{MultiAgentPlan, SampledSignal};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal does not satisfy the predicate at t = {t} (margin {margin})")]
    UnsatisfiedAt { t: f64, margin: f64 },
    #[error("signal does not satisfy the formula")]
    UnsatisfiedFormula,
    #[error("grid step and tolerance must be positive (dk = {dk}, tol = {tol})")]
    BadGrid { dk: f64, tol: f64 },
    #[error(transparent)]
    Stl(#[from] crate::stl::StlError),
    #[error("plan index out of range: agent {agent}, segment {segment}")]
    IndexOutOfRange { agent: usize, segment: usize },
}

/// Per-agent time shift κ (seconds), keyed by agent index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShiftVector {
    pub kappa: BTreeMap<usize, f64>,
}

impl ShiftVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, agent: usize, kappa: f64) -> Self {
        self.kappa.insert(agent, kappa);
        self
    }

    pub fn get(&self, agent: usize) -> f64 {
        self.kappa.get(&agent).copied().unwrap_or(0.0)
    }
}

/// Which shift box the robustness quantifies over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobustnessMode {
    /// κ ∈ [-τ, τ]
    Atr,
    /// κ ∈ [0, τ]
    Right,
    /// κ ∈ [-τ, 0]
    Left,
}

impl RobustnessMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RobustnessMode::Atr => "atr",
            RobustnessMode::Right => "right",
            RobustnessMode::Left => "left",
        }
    }

    fn kappa_range(&self, tau: f64) -> (f64, f64) {
        match self {
            RobustnessMode::Atr => (-tau, tau),
            RobustnessMode::Right => (0.0, tau),
            RobustnessMode::Left => (-tau, 0.0),
        }
    }
}

const SAT_TOL: f64 = 1e-9;

/// `min` over atoms of `μ` at `x_k(clamp(t + κ_k))` with linear
/// interpolation between samples. The sign is the shifted characteristic.
pub fn shifted_predicate_value(
    signal: &SampledSignal,
    pred: &Predicate,
    t: f64,
    kappa: &ShiftVector,
) -> Result<f64, MonitorError> {
    if signal.times.is_empty() || signal.per_agent.is_empty() {
        return Err(MonitorError::EmptySignal);
    }
    let state = |agent: usize| -> Point { signal.value_at(agent, t + kappa.get(agent)) };
    Ok(pred.margin(&state))
}

/// Largest τ (bisection to `tol`) such that every κ on the `dk` grid of the
/// mode's box keeps the predicate satisfied at `t`. Requires the unshifted
/// signal to satisfy the predicate at `t`.
pub fn oracle_pred_atr(
    signal: &SampledSignal,
    pred: &Predicate,
    t: f64,
    mode: RobustnessMode,
    dk: f64,
    tol: f64,
) -> Result<f64, MonitorError> {
    if dk <= 0.0 || tol <= 0.0 {
        return Err(MonitorError::BadGrid { dk, tol });
    }
    let margin = shifted_predicate_value(signal, pred, t, &ShiftVector::new())?;
    if margin < -SAT_TOL {
        return Err(MonitorError::UnsatisfiedAt { t, margin });
    }
    let agents: Vec<usize> = pred.relevant_agents().into_iter().collect();
    let horizon = signal.tf() - signal.t0();

    let check = |tau: f64| -> bool { box_holds(signal, pred, t, mode, tau, dk, &agents) };

    if check(horizon) {
        return Ok(horizon);
    }
    let mut lo = 0.0;
    let mut hi = horizon;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if check(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Checks all κ-grid corners of the box `[range(τ)]^{|agents|}`, extremes
/// first so violations surface early.
fn box_holds(
    signal: &SampledSignal,
    pred: &Predicate,
    t: f64,
    mode: RobustnessMode,
    tau: f64,
    dk: f64,
    agents: &[usize],
) -> bool {
    let (lo, hi) = mode.kappa_range(tau);
    let span = hi - lo;
    let n = ((span / dk).ceil() as usize).max(1);
    // Grid values ordered by decreasing |κ|.
    let mut values: Vec<f64> = (0..=n).map(|j| lo + span * j as f64 / n as f64).collect();
    values.sort_by(|a, b| b.abs().total_cmp(&a.abs()));

    let mut idx = vec![0usize; agents.len()];
    let mut kappa = ShiftVector::new();
    loop {
        for (ai, &agent) in agents.iter().enumerate() {
            kappa.kappa.insert(agent, values[idx[ai]]);
        }
        let v = shifted_predicate_value(signal, pred, t, &kappa).unwrap_or(f64::NEG_INFINITY);
        if v < -SAT_TOL {
            return false;
        }
        // Advance the mixed-radix counter.
        let mut pos = 0;
        loop {
            if pos == agents.len() {
                return true;
            }
            idx[pos] += 1;
            if idx[pos] <= n {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Recursive ATR of a formula on the signal's own time grid: Always takes
/// the min over grid points in its interval, Eventually the max, with
/// min/max through the Boolean operators. `None` marks a qualitatively
/// violated subformula (an Or absorbs it; a violated root is an error).
fn formula_atr_rec(
    signal: &SampledSignal,
    formula: &Formula,
    mode: RobustnessMode,
    dk: f64,
    tol: f64,
) -> Result<Option<f64>, MonitorError> {
    match formula {
        Formula::Pred(p) => {
            let t = signal.t0();
            match oracle_pred_atr(signal, p, t, mode, dk, tol) {
                Ok(v) => Ok(Some(v)),
                Err(MonitorError::UnsatisfiedAt { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        }
        Formula::Always(iv, p) => {
            let mut min_tau = f64::INFINITY;
            let mut any = false;
            for &t in signal
                .times
                .iter()
                .filter(|&&t| t >= iv.lo - SAT_TOL && t <= iv.hi + SAT_TOL)
            {
                any = true;
                match oracle_pred_atr(signal, p, t, mode, dk, tol) {
                    Ok(v) => min_tau = min_tau.min(v),
                    Err(MonitorError::UnsatisfiedAt { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            Ok(if any { Some(min_tau) } else { None })
        }
        Formula::Eventually(iv, p) => {
            let mut best: Option<f64> = None;
            for &t in signal
                .times
                .iter()
                .filter(|&&t| t >= iv.lo - SAT_TOL && t <= iv.hi + SAT_TOL)
            {
                match oracle_pred_atr(signal, p, t, mode, dk, tol) {
                    Ok(v) => best = Some(best.map_or(v, |b: f64| b.max(v))),
                    Err(MonitorError::UnsatisfiedAt { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(best)
        }
        Formula::And(a, b) => {
            let va = formula_atr_rec(signal, a, mode, dk, tol)?;
            let vb = formula_atr_rec(signal, b, mode, dk, tol)?;
            Ok(match (va, vb) {
                (Some(x), Some(y)) => Some(x.min(y)),
                _ => None,
            })
        }
        Formula::Or(a, b) => {
            let va = formula_atr_rec(signal, a, mode, dk, tol)?;
            let vb = formula_atr_rec(signal, b, mode, dk, tol)?;
            Ok(match (va, vb) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (Some(x), None) | (None, Some(x)) => Some(x),
                (None, None) => None,
            })
        }
    }
}

/// Formula-level oracle. The unshifted signal must satisfy the formula.
pub fn oracle_formula_atr(
    signal: &SampledSignal,
    formula: &Formula,
    mode: RobustnessMode,
    dk: f64,
    tol: f64,
) -> Result<f64, MonitorError> {
    if !crate::stl::qualitative_sat(formula, signal)? {
        return Err(MonitorError::UnsatisfiedFormula);
    }
    formula_atr_rec(signal, formula, mode, dk, tol)?.ok_or(MonitorError::UnsatisfiedFormula)
}

/// Resamples the signal with each agent shifted by its κ (clamped at the
/// horizon).
pub fn shift_signal(signal: &SampledSignal, kappa: &ShiftVector) -> SampledSignal {
    let per_agent = (0..signal.n_agents())
        .map(|a| {
            let k = kappa.get(a);
            signal
                .times
                .iter()
                .map(|&t| signal.value_at(a, t + k))
                .collect()
        })
        .collect();
    SampledSignal {
        times: signal.times.clone(),
        per_agent,
    }
}

/// Conservative segment characteristic: +1 iff, for every atom, every
/// combination of one control point from segment `i` of agent `k` with one
/// control point from each temporally intersecting segment of every other
/// relevant agent satisfies `μ >= 0`. Because `μ` is linear, the minimum
/// over that product decomposes into per-agent control-point minima.
pub fn segment_char(
    plan: &MultiAgentPlan,
    pred: &Predicate,
    k: usize,
    i: usize,
) -> Result<i32, MonitorError> {
    let span_ki = plan
        .time_span(k, i)
        .map_err(|_| MonitorError::IndexOutOfRange { agent: k, segment: i })?;
    for atom in &pred.atoms {
        let mut value = atom.offset;
        for (agent, coeffs) in &atom.coeffs {
            let contribution = if *agent == k {
                control_point_min(plan, *agent, i..i + 1, coeffs)
            } else {
                let mut min_v = f64::INFINITY;
                for j in 0..plan.n_segments() {
                    let span_lj = plan.time_span(*agent, j).unwrap();
                    let intersects = span_lj.0 <= span_ki.1 + 1e-12 && span_lj.1 >= span_ki.0 - 1e-12;
                    if intersects {
                        min_v = min_v.min(control_point_min(plan, *agent, j..j + 1, coeffs));
                    }
                }
                min_v
            };
            if !contribution.is_finite() {
                // No intersecting segment: cannot happen since all agents
                // share the horizon, but stay conservative.
                return Ok(-1);
            }
            value += contribution;
        }
        if value < 0.0 {
            return Ok(-1);
        }
    }
    Ok(1)
}

fn control_point_min(
    plan: &MultiAgentPlan,
    agent: usize,
    segments: std::ops::Range<usize>,
    coeffs: &[f64],
) -> f64 {
    let mut min_v = f64::INFINITY;
    for j in segments {
        for cp in plan.agents()[agent].segments()[j].r().control_points() {
            min_v = min_v.min(cp.dot(coeffs));
        }
    }
    min_v
}
