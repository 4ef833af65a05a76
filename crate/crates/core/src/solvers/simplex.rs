//! Dense two-phase primal simplex over bounded variables.
//!
//! Nonbasic variables sit at either bound; Dantzig pricing with a switch to
//! Bland's rule after a run of degenerate pivots guards against cycling.
//! Rows become equalities via slack columns; rows without a usable identity
//! slack get a phase-1 artificial that is pinned to zero afterwards. Pinned
//! columns (fixed variables, retired artificials) can never enter the basis
//! and are skipped in every scan and row operation.

use crate::milp::{MilpModel, MilpSolution, Sense, SolveStatus};
use crate::solvers::{SolveError, SolverConfig};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const RATIO_TIE_TOL: f64 = 1e-9;
const DEGENERATE_SWITCH: u32 = 60;

/// Solves the LP relaxation of `model` with the given bound overrides
/// (binaries are treated as continuous within their overridden bounds).
/// Returns the solution and the simplex iteration count.
pub fn solve_lp_with_bounds(
    model: &MilpModel,
    lb: &[f64],
    ub: &[f64],
    config: &SolverConfig,
) -> Result<(MilpSolution, u64), SolveError> {
    let n = model.n_vars();
    assert_eq!(lb.len(), n);
    assert_eq!(ub.len(), n);
    for v in model.vars() {
        if !lb[v.id].is_finite() || ub[v.id] == f64::NEG_INFINITY {
            return Err(SolveError::UnboundedVariable(v.name.clone()));
        }
    }
    for j in 0..n {
        if lb[j] > ub[j] + 1e-12 {
            return Ok((MilpSolution::infeasible(), 0));
        }
    }

    let (obj_expr, maximize) = match model.objective() {
        Some((e, m)) => (e.clone(), *m),
        None => (crate::milp::LinExpr::new(), true),
    };
    let sign = if maximize { 1.0 } else { -1.0 };
    let mut obj = vec![0.0; n];
    for (c, v) in &obj_expr.terms {
        obj[*v] += *c;
    }

    let m_rows = model.n_constraints();
    let n_slack = model
        .constraints()
        .iter()
        .filter(|c| c.sense != Sense::Eq)
        .count();

    // First pass: shifted right-hand sides, slack placement, and which rows
    // need a phase-1 artificial (those without a +1 identity slack after
    // sign normalization).
    let mut rhs = vec![0.0; m_rows];
    let mut negate = vec![false; m_rows];
    let mut slack_col = vec![usize::MAX; m_rows];
    let mut art_col = vec![usize::MAX; m_rows];
    {
        let mut next_slack = n;
        for (i, c) in model.constraints().iter().enumerate() {
            let mut b = c.rhs;
            for (coef, v) in &c.expr.terms {
                b -= *coef * lb[*v];
            }
            negate[i] = b < 0.0;
            rhs[i] = b.abs();
            if c.sense != Sense::Eq {
                slack_col[i] = next_slack;
                next_slack += 1;
            }
        }
    }
    let mut next_col = n + n_slack;
    for (i, c) in model.constraints().iter().enumerate() {
        let slack_positive = match c.sense {
            Sense::Le => !negate[i],
            Sense::Ge => negate[i],
            Sense::Eq => false,
        };
        if !slack_positive {
            art_col[i] = next_col;
            next_col += 1;
        }
    }
    let total = next_col;
    let rhs_scale = rhs.iter().fold(1.0_f64, |a, b| a.max(*b));

    // Column ranges after shifting every variable to [0, range].
    let mut range = vec![f64::INFINITY; total];
    for j in 0..n {
        range[j] = (ub[j] - lb[j]).max(0.0);
    }

    let mut tab = vec![0.0; m_rows * total];
    let mut basis = vec![0usize; m_rows];
    let mut beta = vec![0.0; m_rows];
    let mut any_artificial = false;
    for (i, c) in model.constraints().iter().enumerate() {
        let row = &mut tab[i * total..(i + 1) * total];
        let s = if negate[i] { -1.0 } else { 1.0 };
        for (coef, v) in &c.expr.terms {
            row[*v] += s * coef;
        }
        if slack_col[i] != usize::MAX {
            row[slack_col[i]] = s * if c.sense == Sense::Le { 1.0 } else { -1.0 };
        }
        if art_col[i] == usize::MAX {
            basis[i] = slack_col[i];
        } else {
            row[art_col[i]] = 1.0;
            basis[i] = art_col[i];
            any_artificial = true;
        }
        beta[i] = rhs[i];
    }

    let mut iters: u64 = 0;
    let iter_budget = 400 * (m_rows + total) as u64 + 4000;

    let mut st = Tableau {
        m: m_rows,
        total,
        tab,
        beta,
        basis,
        at_upper: vec![false; total],
        range,
        d: vec![0.0; total],
        active: Vec::new(),
    };
    st.rebuild_active();

    // Phase 1: drive artificials out.
    if any_artificial {
        let art_rows: Vec<usize> = (0..m_rows).filter(|&i| art_col[i] != usize::MAX).collect();
        for j in 0..total {
            let mut d = 0.0;
            for &i in &art_rows {
                d += st.tab[i * total + j];
            }
            st.d[j] = d;
        }
        for &i in &art_rows {
            st.d[art_col[i]] = 0.0;
        }
        match core_loop(&mut st, &mut iters, iter_budget) {
            CoreResult::Optimal => {}
            CoreResult::Unbounded => return Err(SolveError::IterationLimit),
            CoreResult::IterLimit => return Ok((MilpSolution::unknown(), iters)),
        }
        let infeas: f64 = (0..m_rows)
            .filter(|&i| st.basis[i] >= n + n_slack)
            .map(|i| st.beta[i].max(0.0))
            .sum();
        if infeas > config.feasibility_tol * rhs_scale.max(1.0) * 10.0 {
            return Ok((MilpSolution::infeasible(), iters));
        }
        for i in 0..m_rows {
            if art_col[i] != usize::MAX {
                st.range[art_col[i]] = 0.0;
            }
        }
        st.rebuild_active();
    }

    // Phase 2: real objective on the shifted variables.
    for j in 0..st.total {
        let cj = if j < n { sign * obj[j] } else { 0.0 };
        let mut d = cj;
        for i in 0..m_rows {
            let b = st.basis[i];
            let cb = if b < n { sign * obj[b] } else { 0.0 };
            if cb != 0.0 {
                d -= cb * st.tab[i * st.total + j];
            }
        }
        st.d[j] = d;
    }
    match core_loop(&mut st, &mut iters, iter_budget) {
        CoreResult::Optimal => {}
        CoreResult::Unbounded | CoreResult::IterLimit => {
            return Ok((MilpSolution::unknown(), iters))
        }
    }

    // Recover original-space values.
    let mut shifted = vec![0.0; st.total];
    for j in 0..st.total {
        if st.at_upper[j] && st.range[j].is_finite() {
            shifted[j] = st.range[j];
        }
    }
    for i in 0..m_rows {
        shifted[st.basis[i]] = st.beta[i];
    }
    let mut values = vec![0.0; n];
    for j in 0..n {
        values[j] = (lb[j] + shifted[j]).clamp(lb[j], ub[j]);
    }
    let objective = obj_expr.eval(&values);

    // Guard against numerically corrupted bases.
    let mut worst = 0.0_f64;
    for c in model.constraints() {
        let v = c.expr.eval(&values);
        let viol = match c.sense {
            Sense::Le => v - c.rhs,
            Sense::Ge => c.rhs - v,
            Sense::Eq => (v - c.rhs).abs(),
        };
        worst = worst.max(viol);
    }
    if worst > config.feasibility_tol * rhs_scale.max(1.0) * 100.0 {
        return Ok((MilpSolution::unknown(), iters));
    }

    Ok((
        MilpSolution {
            status: SolveStatus::Optimal,
            objective: Some(objective),
            values,
        },
        iters,
    ))
}

struct Tableau {
    m: usize,
    total: usize,
    tab: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    at_upper: Vec<bool>,
    range: Vec<f64>,
    /// Reduced-cost row for the current phase, maintained by pivots.
    d: Vec<f64>,
    /// Columns that can still enter the basis (range > 0); only these are
    /// maintained by row operations. Basis columns are never read.
    active: Vec<u32>,
}

impl Tableau {
    fn rebuild_active(&mut self) {
        self.active = (0..self.total as u32)
            .filter(|&j| self.range[j as usize] > 0.0)
            .collect();
    }
}

enum CoreResult {
    Optimal,
    Unbounded,
    IterLimit,
}

fn core_loop(st: &mut Tableau, iters: &mut u64, budget: u64) -> CoreResult {
    let m = st.m;
    let total = st.total;
    let mut degenerate_run: u32 = 0;
    let mut bland = false;
    let mut in_basis = vec![false; total];
    for &b in &st.basis {
        in_basis[b] = true;
    }

    loop {
        *iters += 1;
        if *iters > budget {
            return CoreResult::IterLimit;
        }

        // Entering column: Dantzig by default, lowest index under Bland.
        let mut enter = usize::MAX;
        let mut best = COST_TOL;
        for &ju in &st.active {
            let j = ju as usize;
            if in_basis[j] {
                continue;
            }
            let d = st.d[j];
            let eligible = if st.at_upper[j] {
                -d > COST_TOL
            } else {
                d > COST_TOL
            };
            if !eligible {
                continue;
            }
            if bland {
                enter = j;
                break;
            }
            if d.abs() > best {
                best = d.abs();
                enter = j;
            }
        }
        if enter == usize::MAX {
            return CoreResult::Optimal;
        }
        let sigma = if st.at_upper[enter] { -1.0 } else { 1.0 };

        // Ratio test, pass 1: smallest step over all blocking events.
        let mut t_min = st.range[enter];
        for i in 0..m {
            let g = sigma * st.tab[i * total + enter];
            if g > PIVOT_TOL {
                let lim = st.beta[i].max(0.0) / g;
                if lim < t_min {
                    t_min = lim;
                }
            } else if g < -PIVOT_TOL {
                let cap = st.range[st.basis[i]];
                if cap.is_finite() {
                    let lim = (cap - st.beta[i]).max(0.0) / (-g);
                    if lim < t_min {
                        t_min = lim;
                    }
                }
            }
        }
        if !t_min.is_finite() {
            return CoreResult::Unbounded;
        }

        if t_min <= 1e-10 {
            degenerate_run += 1;
            if degenerate_run > DEGENERATE_SWITCH {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }

        // Bound flip if the entering variable's own range is the (tied)
        // minimum: no basis change needed.
        if st.range[enter].is_finite() && st.range[enter] <= t_min + RATIO_TIE_TOL {
            let u = st.range[enter];
            for i in 0..m {
                st.beta[i] -= sigma * u * st.tab[i * total + enter];
            }
            st.at_upper[enter] = !st.at_upper[enter];
            continue;
        }

        // Ratio test, pass 2: choose the leaving row among ties.
        let mut leave_row = usize::MAX;
        let mut leave_to_upper = false;
        for i in 0..m {
            let g = sigma * st.tab[i * total + enter];
            let (lim, to_upper) = if g > PIVOT_TOL {
                (st.beta[i].max(0.0) / g, false)
            } else if g < -PIVOT_TOL {
                let cap = st.range[st.basis[i]];
                if !cap.is_finite() {
                    continue;
                }
                ((cap - st.beta[i]).max(0.0) / (-g), true)
            } else {
                continue;
            };
            if lim > t_min + RATIO_TIE_TOL {
                continue;
            }
            let take = if leave_row == usize::MAX {
                true
            } else if bland {
                st.basis[i] < st.basis[leave_row]
            } else {
                st.tab[i * total + enter].abs() > st.tab[leave_row * total + enter].abs()
            };
            if take {
                leave_row = i;
                leave_to_upper = to_upper;
            }
        }
        if leave_row == usize::MAX {
            return CoreResult::Unbounded;
        }

        // Pivot.
        let r = leave_row;
        let pivot = st.tab[r * total + enter];
        let entering_start = if st.at_upper[enter] { st.range[enter] } else { 0.0 };
        let entering_value = entering_start + sigma * t_min;
        let leaving = st.basis[r];

        for i in 0..m {
            if i != r {
                st.beta[i] -= sigma * t_min * st.tab[i * total + enter];
            }
        }

        let inv = 1.0 / pivot;
        {
            let row = &mut st.tab[r * total..(r + 1) * total];
            for &ju in &st.active {
                row[ju as usize] *= inv;
            }
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = st.tab[i * total + enter];
            if f != 0.0 {
                let (lo_rows, hi_rows) = st.tab.split_at_mut(r * total);
                let (pivot_row, rest) = hi_rows.split_at_mut(total);
                let row_i = if i < r {
                    &mut lo_rows[i * total..(i + 1) * total]
                } else {
                    &mut rest[(i - r - 1) * total..(i - r) * total]
                };
                for &ju in &st.active {
                    let j = ju as usize;
                    row_i[j] -= f * pivot_row[j];
                }
            }
        }
        let fd = st.d[enter];
        if fd != 0.0 {
            let (d_row, tab) = (&mut st.d, &st.tab);
            let pivot_row = &tab[r * total..(r + 1) * total];
            for &ju in &st.active {
                let j = ju as usize;
                d_row[j] -= fd * pivot_row[j];
            }
        }

        st.beta[r] = entering_value;
        st.basis[r] = enter;
        in_basis[enter] = true;
        in_basis[leaving] = false;
        st.at_upper[leaving] = leave_to_upper;
        st.at_upper[enter] = false;
    }
}
