//! Branch-and-bound over the bounded-variable simplex.
//!
//! Best-bound node selection with node-id tie-break, branching on the most
//! fractional binary with variable-id tie-break. Deterministic: identical
//! models produce identical incumbents.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::milp::{MilpModel, MilpSolution, SolveStatus, VarKind};
use crate::solvers::simplex::solve_lp_with_bounds;
use crate::solvers::{SolveError, SolverConfig, SolverStats};

struct Node {
    id: u64,
    /// Upper bound inherited from the parent LP (for maximization).
    bound: f64,
    depth: u32,
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// LP solution already computed for exactly these bounds (strong
    /// branching solves the children while scoring candidates).
    solution: Option<MilpSolution>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: larger bound first; ties go to the lower node id.
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub fn solve_milp_embedded(
    model: &MilpModel,
    config: &SolverConfig,
) -> Result<(MilpSolution, SolverStats), SolveError> {
    let root_lb: Vec<f64> = model.vars().iter().map(|v| v.lb).collect();
    let root_ub: Vec<f64> = model.vars().iter().map(|v| v.ub).collect();
    solve_milp_with_bounds(model, &root_lb, &root_ub, config)
}

/// Branch-and-bound with root bound overrides (used to fix variables from
/// the outside, e.g. probing a partially pinned model).
pub fn solve_milp_with_bounds(
    model: &MilpModel,
    root_lb: &[f64],
    root_ub: &[f64],
    config: &SolverConfig,
) -> Result<(MilpSolution, SolverStats), SolveError> {
    let start = Instant::now();
    let maximize = model.objective().map(|(_, m)| *m).unwrap_or(true);
    // Internally treat everything as maximization for bound bookkeeping.
    let orient = if maximize { 1.0 } else { -1.0 };

    let binaries: Vec<usize> = model
        .vars()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.id)
        .collect();

    let root_lb = root_lb.to_vec();
    let root_ub = root_ub.to_vec();

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        bound: f64::INFINITY,
        depth: 0,
        lb: root_lb,
        ub: root_ub,
        solution: None,
    });
    let mut next_id: u64 = 1;

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes: u64 = 0;
    let mut total_iters: u64 = 0;
    let mut hit_limit = false;
    let mut saw_unknown_lp = false;

    while let Some(node) = heap.pop() {
        if nodes >= config.node_limit || start.elapsed().as_secs_f64() > config.time_limit_secs {
            hit_limit = true;
            // The popped node still carries the best bound; put it back so
            // the final gap accounts for it.
            heap.push(node);
            break;
        }
        let bar = incumbent
            .as_ref()
            .map(|(inc, _)| inc * (1.0 + config.relative_gap) + 1e-9);
        if let Some(bar) = bar {
            if node.bound <= bar {
                continue;
            }
        }
        nodes += 1;
        let sol = match node.solution {
            Some(s) => s,
            None => {
                let (s, iters) = solve_lp_with_bounds(model, &node.lb, &node.ub, config)?;
                total_iters += iters;
                s
            }
        };
        match sol.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unknown => {
                // Numerical trouble in this subtree; give up on certifying.
                saw_unknown_lp = true;
                continue;
            }
            SolveStatus::Optimal => {}
        }
        let obj = sol.objective.unwrap();
        let oriented = orient * obj;
        if let Some(bar) = bar {
            if oriented <= bar {
                continue;
            }
        }

        // Fractional binaries, most fractional first (lowest id on ties).
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        for &b in &binaries {
            if node.lb[b] > 0.5 || node.ub[b] < 0.5 {
                continue; // already fixed
            }
            let v = sol.values[b];
            let frac = (v - v.round()).abs();
            if frac > config.integrality_tol {
                candidates.push((frac, b));
            }
        }

        if candidates.is_empty() {
            // Integral: candidate incumbent.
            let better = match &incumbent {
                None => true,
                Some((inc, _)) => oriented > *inc,
            };
            if better {
                let mut values = sol.values;
                for &b in &binaries {
                    values[b] = values[b].round();
                }
                incumbent = Some((oriented, values));
            }
            continue;
        }

        // LP-guided dive for incumbents on a deterministic schedule.
        if nodes == 1 || (incumbent.is_none() && nodes % 8 == 1) || nodes % 64 == 1 {
            if let Some((obj, values)) = dive_for_incumbent(
                model,
                &binaries,
                &node.lb,
                &node.ub,
                config,
                start,
                &mut total_iters,
            )? {
                let oriented_dive = orient * obj;
                let better = match &incumbent {
                    None => true,
                    Some((inc, _)) => oriented_dive > *inc,
                };
                if better {
                    incumbent = Some((oriented_dive, values));
                }
            }
        }

        // Branch selection: among the most fractional candidates, estimate
        // each variable's bound-tightening power. Variables are probed by
        // solving both child LPs the first time they come up; afterwards
        // the recorded score is reused (first-probe pseudocosts). The
        // probed children of the chosen variable are pushed with their own
        // bounds and solutions.
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let probe_budget = match node.depth {
            0..=1 => 16,
            2..=5 => 8,
            _ => 3,
        };
        let consider = match node.depth {
            0..=1 => 24,
            2..=5 => 16,
            _ => 8,
        };
        candidates.truncate(consider.min(candidates.len()));
        let mut branch_var = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        let mut chosen_children: Vec<(f64, Option<MilpSolution>, f64)> = Vec::new();
        let mut probes_used = 0usize;
        for &(_, b) in &candidates {
            if let Some(&hist) = pseudocost.get(&b) {
                if hist > best_score + 1e-12 {
                    best_score = hist;
                    branch_var = b;
                    chosen_children = Vec::new();
                }
                continue;
            }
            if probes_used >= probe_budget {
                continue;
            }
            probes_used += 1;
            let mut score = 0.0;
            let mut children: Vec<(f64, Option<MilpSolution>, f64)> = Vec::new();
            for side in [0.0, 1.0] {
                let mut l = node.lb.clone();
                let mut u = node.ub.clone();
                l[b] = side;
                u[b] = side;
                let (csol, ci) = solve_lp_with_bounds(model, &l, &u, config)?;
                total_iters += ci;
                let cb = match csol.status {
                    SolveStatus::Optimal => orient * csol.objective.unwrap(),
                    SolveStatus::Infeasible => f64::NEG_INFINITY,
                    SolveStatus::Unknown => oriented, // keep the parent bound
                };
                score += (oriented - cb).min(1e6);
                children.push((side, Some(csol), cb.min(oriented)));
            }
            pseudocost.insert(b, score);
            if score > best_score + 1e-12 {
                best_score = score;
                branch_var = b;
                chosen_children = children;
            }
        }
        if branch_var == usize::MAX {
            // All candidates were beyond the probe budget; fall back to the
            // most fractional one.
            branch_var = candidates[0].1;
        }

        for (side, csol, cbound) in chosen_children {
            if !cbound.is_finite() {
                continue; // infeasible child
            }
            if let Some(bar) = incumbent
                .as_ref()
                .map(|(inc, _)| inc * (1.0 + config.relative_gap) + 1e-9)
            {
                if cbound <= bar {
                    continue;
                }
            }
            let mut l = node.lb.clone();
            let mut u = node.ub.clone();
            l[branch_var] = side;
            u[branch_var] = side;
            l[branch_var] = side;
            heap.push(Node {
                id: next_id,
                bound: cbound,
                depth: node.depth + 1,
                lb: l,
                ub: u,
                solution: csol,
            });
            next_id += 1;
        }
    }

    let wall = start.elapsed().as_secs_f64();
    let open_bound = heap.peek().map(|n| n.bound);
    let (status, objective, values, gap) = match incumbent {
        Some((inc, values)) => {
            let ub = match open_bound {
                Some(b) => b.max(inc),
                None => inc,
            };
            let gap = ((ub - inc) / inc.abs().max(1e-9)).max(0.0);
            let proven = open_bound.is_none() || gap <= config.relative_gap;
            let status = if proven && !saw_unknown_lp {
                SolveStatus::Optimal
            } else if proven {
                // An LP subproblem failed numerically; the incumbent may not
                // be globally optimal.
                SolveStatus::Unknown
            } else {
                SolveStatus::Unknown
            };
            (status, Some(orient * inc), values, gap)
        }
        None => {
            if hit_limit || saw_unknown_lp {
                (SolveStatus::Unknown, None, Vec::new(), f64::INFINITY)
            } else {
                (SolveStatus::Infeasible, None, Vec::new(), f64::INFINITY)
            }
        }
    };

    Ok((
        MilpSolution {
            status,
            objective,
            values,
        },
        SolverStats {
            nodes,
            gap,
            wall_secs: wall,
            simplex_iters: total_iters,
        },
    ))
}

/// Fixes fractional binaries one at a time (most nearly integral first,
/// lowest id on ties), re-solving the LP after each fix, with a single
/// flip retry per infeasible step. Returns an integral feasible solution
/// and its objective if the dive lands.
fn dive_for_incumbent(
    model: &MilpModel,
    binaries: &[usize],
    lb0: &[f64],
    ub0: &[f64],
    config: &SolverConfig,
    start: Instant,
    total_iters: &mut u64,
) -> Result<Option<(f64, Vec<f64>)>, SolveError> {
    let mut lb = lb0.to_vec();
    let mut ub = ub0.to_vec();
    // (var, value, flipped already): on infeasibility flip once, on a second
    // failure release the variable and leave it to later steps.
    let mut last_fix: Option<(usize, f64, bool)> = None;
    let mut skipped = vec![false; model.n_vars()];
    let mut steps = 0usize;
    let step_budget = 3 * binaries.len() + 16;
    loop {
        if start.elapsed().as_secs_f64() > config.time_limit_secs {
            return Ok(None);
        }
        let (sol, iters) = solve_lp_with_bounds(model, &lb, &ub, config)?;
        *total_iters += iters;
        match sol.status {
            SolveStatus::Optimal => {}
            _ => match last_fix.take() {
                Some((v, val, false)) => {
                    let flipped = 1.0 - val;
                    lb[v] = flipped;
                    ub[v] = flipped;
                    last_fix = Some((v, flipped, true));
                    continue;
                }
                Some((v, _, true)) => {
                    lb[v] = lb0[v];
                    ub[v] = ub0[v];
                    skipped[v] = true;
                    continue;
                }
                None => return Ok(None),
            },
        }
        // Most nearly integral fractional binary that is still free.
        let order = std::env::var("ATRPLAN_BB_DIVE").unwrap_or_default();
        let mut pick = usize::MAX;
        let mut best = f64::INFINITY;
        let mut all_integral = true;
        for &b in binaries {
            let v = sol.values[b];
            let frac = (v - v.round()).abs();
            if frac > config.integrality_tol {
                all_integral = false;
                if lb[b] > 0.5 || ub[b] < 0.5 || skipped[b] {
                    continue;
                }
                let key = match order.as_str() {
                    "mostfrac" => -frac,
                    "idasc" => b as f64,
                    "iddesc" => -(b as f64),
                    _ => frac,
                };
                if key < best - 1e-12 {
                    best = key;
                    pick = b;
                }
            }
        }
        if all_integral {
            let mut values = sol.values;
            for &b in binaries {
                values[b] = values[b].round();
            }
            let obj = sol.objective.unwrap();
            return Ok(Some((obj, values)));
        }
        if pick == usize::MAX {
            // Only skipped variables remain fractional.
            return Ok(None);
        }
        steps += 1;
        if steps > step_budget {
            return Ok(None);
        }
        // Probe both fixings and keep the one with the better relaxation
        // (the maximize orientation is handled by the caller's model).
        let strong = std::env::var_os("ATRPLAN_BB_STRONG").map_or(true, |v| v != "0");
        let rounded = sol.values[pick].round().clamp(0.0, 1.0);
        if !strong {
            lb[pick] = rounded;
            ub[pick] = rounded;
            last_fix = Some((pick, rounded, false));
            continue;
        }
        let maximize = model.objective().map(|(_, m)| *m).unwrap_or(true);
        let orient = if maximize { 1.0 } else { -1.0 };
        let mut chosen = rounded;
        {
            lb[pick] = rounded;
            ub[pick] = rounded;
            let (a, ia) = solve_lp_with_bounds(model, &lb, &ub, config)?;
            *total_iters += ia;
            let other = 1.0 - rounded;
            lb[pick] = other;
            ub[pick] = other;
            let (b, ib) = solve_lp_with_bounds(model, &lb, &ub, config)?;
            *total_iters += ib;
            let score = |s: &MilpSolution| match s.status {
                SolveStatus::Optimal => orient * s.objective.unwrap(),
                _ => f64::NEG_INFINITY,
            };
            if score(&a) >= score(&b) {
                chosen = rounded;
            } else {
                chosen = other;
            }
        }
        lb[pick] = chosen;
        ub[pick] = chosen;
        last_fix = Some((pick, chosen, false));
    }
}
