use super::*;
use crate::milp::SolveStatus;
use crate::solvers::{solve_lp_with_bounds, solve_milp_embedded, SolverConfig};

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn scenario_1d(spec: &str, n_segments: usize, extra: &str) -> Scenario {
    let text = format!(
        r#"{{
            "dim": 1,
            "agents": [
                {{"x0": [0.0], "v0": [0.0], "vmin": [-5.0], "vmax": [5.0]{extra}}}
            ],
            "t0": 0.0, "tf": 10.0,
            "n_segments": {n_segments},
            "degree": 2,
            "workspace": {{"vertices": [[-20.0], [20.0]]}},
            "spec": "{spec}"
        }}"#
    );
    Scenario::from_json(&text).unwrap()
}

#[test]
fn trivial_scenario_solves_with_exact_endpoints() {
    let mut sc = scenario_1d("G[0,10] hs(1,[1],15)", 1, r#", "xf": [1.0]"#);
    sc.robustness = crate::monitor::RobustnessMode::Right;
    let f = sc.formula().unwrap();
    let enc = encode(&sc, &f).unwrap();
    let (sol, _) = solve_milp_embedded(&enc.model, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let (plan, theta, stats) = extract_plan(&enc, &sol, &sc).unwrap();
    assert!(theta > 0.0);
    assert!(stats.n_binaries > 0);
    let (p0, _) = plan.state_at(0, 0.0).unwrap();
    assert!((p0[0] - 0.0).abs() < 1e-9);
    let (pf, _) = plan.state_at(0, 10.0).unwrap();
    assert!((pf[0] - 1.0).abs() < 1e-6);
}

#[test]
fn velocity_bound_makes_scenario_infeasible() {
    // Must cover 40 units in 10 s with |v| <= 1: impossible.
    let text = r#"{
        "dim": 1,
        "agents": [
            {"x0": [-20.0], "v0": [0.0], "xf": [20.0], "vmin": [-1.0], "vmax": [1.0]}
        ],
        "t0": 0.0, "tf": 10.0,
        "n_segments": 2,
        "degree": 2,
        "workspace": {"vertices": [[-20.0], [20.0]]},
        "spec": "G[0,10] hs(1,[1],100)"
    }"#;
    let sc = Scenario::from_json(text).unwrap();
    let f = sc.formula().unwrap();
    let enc = encode(&sc, &f).unwrap();
    let (sol, _) = solve_milp_embedded(&enc.model, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn zspat_single_follows_control_points() {
    // Start below zero, must be nonnegative during [6,9]: the climbing
    // segment keeps a negative control point, the covering segment cannot.
    let mut sc = scenario_1d("G[6,9] hs(1,[1],0)", 2, "");
    sc.agents[0].x0 = vec![-5.0];
    let f = sc.formula().unwrap();
    let enc = encode(&sc, &f).unwrap();
    let (sol, _) = solve_milp_embedded(&enc.model, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let p = &enc.index.preds[0];
    assert_eq!(sol.value(p.zspat[&(0, 0)]).round() as i64, 0);
    assert_eq!(sol.value(p.zspat[&(0, 1)]).round() as i64, 1);

    // Forcing the violating segment's indicator to 1 contradicts x0 < 0
    // already at the LP level.
    let mut lb: Vec<f64> = enc.model.vars().iter().map(|v| v.lb).collect();
    let mut ub: Vec<f64> = enc.model.vars().iter().map(|v| v.ub).collect();
    let z = p.zspat[&(0, 0)];
    lb[z] = 1.0;
    ub[z] = 1.0;
    let (forced, _) = solve_lp_with_bounds(&enc.model, &lb, &ub, &cfg()).unwrap();
    assert_eq!(forced.status, SolveStatus::Infeasible);
}

/// Pins every trajectory variable to the given control points.
fn pin_trajectory(
    enc: &mut EncodedModel,
    r_vals: &[Vec<Vec<Vec<f64>>>],
    h_vals: &[Vec<Vec<f64>>],
) {
    for (k, agent) in r_vals.iter().enumerate() {
        for (i, seg) in agent.iter().enumerate() {
            for (b, cp) in seg.iter().enumerate() {
                for (c, v) in cp.iter().enumerate() {
                    enc.model
                        .add_constraint(LinExpr::var(enc.index.r[k][i][b][c]), Sense::Eq, *v)
                        .unwrap();
                }
            }
        }
    }
    for (k, agent) in h_vals.iter().enumerate() {
        for (i, seg) in agent.iter().enumerate() {
            for (b, v) in seg.iter().enumerate() {
                enc.model
                    .add_constraint(LinExpr::var(enc.index.h[k][i][b]), Sense::Eq, *v)
                    .unwrap();
            }
        }
    }
}

/// Checks that a two-sided reified binary is forced to `expected` given the
/// pinned trajectory: fixing it the other way is LP-infeasible.
fn assert_forced(enc: &EncodedModel, var: VarId, expected: bool) {
    let mut lb: Vec<f64> = enc.model.vars().iter().map(|v| v.lb).collect();
    let mut ub: Vec<f64> = enc.model.vars().iter().map(|v| v.ub).collect();
    let wrong = if expected { 0.0 } else { 1.0 };
    lb[var] = wrong;
    ub[var] = wrong;
    let (sol, _) = solve_lp_with_bounds(&enc.model, &lb, &ub, &cfg()).unwrap();
    assert_eq!(
        sol.status,
        SolveStatus::Infeasible,
        "{} should be forced to {}",
        enc.model.var(var).name,
        expected as i64
    );
    let right = if expected { 1.0 } else { 0.0 };
    lb[var] = right;
    ub[var] = right;
    let (sol, _) = solve_lp_with_bounds(&enc.model, &lb, &ub, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal, "consistent side must stay feasible");
}

/// Layout with five segments per agent mirroring the ordering example:
/// agent 1 (index 0) has uneven spans and leaves the rendezvous range in
/// its last segment; agent 2 (index 1) has uniform spans.
struct OrderingFixture {
    enc: EncodedModel,
    sc: Scenario,
}

fn ordering_fixture() -> OrderingFixture {
    let text = r#"{
        "dim": 1,
        "agents": [
            {"x0": [1.0], "v0": [0.0], "vmin": [-10.0], "vmax": [10.0]},
            {"x0": [0.0], "v0": [0.0], "vmin": [-10.0], "vmax": [10.0]}
        ],
        "t0": 0.0, "tf": 10.0,
        "n_segments": 5,
        "degree": 2,
        "workspace": {"vertices": [[-20.0], [20.0]]},
        "spec": "G[2,3] close(1,2,5.0)"
    }"#;
    let sc = Scenario::from_json(text).unwrap();
    let f = sc.formula().unwrap();
    let mut enc = encode(&sc, &f).unwrap();

    // Agent 0: spans [0,1.5],[1.5,3],[3,5],[5,7],[7,10] with C1 time joins
    // (consecutive rate control points shared); parked at 1 except the last
    // segment, which runs out to 10.
    let diffs = [0.75, 0.75, 0.75, 1.25, 0.75, 2.25];
    let mut h0 = Vec::new();
    let mut t = 0.0_f64;
    for i in 0..5 {
        let a = t;
        let m = a + diffs[i];
        let b = m + diffs[i + 1];
        h0.push(vec![a, m, b]);
        t = b;
    }
    assert!((t - 10.0).abs() < 1e-12);
    let r0 = vec![
        vec![vec![1.0], vec![1.0], vec![1.0]],
        vec![vec![1.0], vec![1.0], vec![1.0]],
        vec![vec![1.0], vec![1.0], vec![1.0]],
        vec![vec![1.0], vec![1.0], vec![1.0]],
        vec![vec![1.0], vec![1.0], vec![10.0]],
    ];
    // Agent 1: uniform spans [0,2],...,[8,10], parked at 0.
    let mut h1 = Vec::new();
    for i in 0..5 {
        let a = 2.0 * i as f64;
        h1.push(vec![a, a + 1.0, a + 2.0]);
    }
    let r1 = vec![vec![vec![0.0], vec![0.0], vec![0.0]]; 5];

    pin_trajectory(&mut enc, &[r0, r1], &[h0, h1]);
    OrderingFixture { enc, sc }
}

#[test]
fn ordering_indicators_reproduce_span_pattern() {
    let fx = ordering_fixture();
    let p = &fx.enc.index.preds[0];
    // z^+ of agent 0's segments relative to (agent 1, segment 2): ends
    // [1.5, 3, 5, 7, 10] compared against 6.
    let expected_plus = [false, false, false, true, true];
    for (j, &e) in expected_plus.iter().enumerate() {
        assert_forced(&fx.enc, p.zplus[&(0, j, 1, 2)], e);
    }
    // z^-: starts [0, 1.5, 3, 5, 7] compared against 4.
    let expected_minus = [true, true, true, false, false];
    for (j, &e) in expected_minus.iter().enumerate() {
        assert_forced(&fx.enc, p.zminus[&(0, j, 1, 2)], e);
    }
    // Temporal intersection with [4, 6]: spans of agent 0 vs segment 2 of
    // agent 1: [3,5] and [5,7] intersect (closed), [0,1.5],[1.5,3] do not,
    // [7,10] does not.
    let expected_temp = [false, false, true, true, false];
    for (j, &e) in expected_temp.iter().enumerate() {
        assert_forced(&fx.enc, p.ztemp_of(1, 2, 0, j), e);
    }
}

#[test]
fn theta0_matches_first_violator_gap_and_horizon_cap() {
    let fx = ordering_fixture();
    let p = &fx.enc.index.preds[0];
    // Fix the discrete layer to its forced truth, then read the budget
    // variables at the LP level.
    let mut lb: Vec<f64> = fx.enc.model.vars().iter().map(|v| v.lb).collect();
    let mut ub: Vec<f64> = fx.enc.model.vars().iter().map(|v| v.ub).collect();
    let spans0: [(f64, f64); 5] = [(0.0, 1.5), (1.5, 3.0), (3.0, 5.0), (5.0, 7.0), (7.0, 10.0)];
    let spans1: [(f64, f64); 5] = [(0.0, 2.0), (2.0, 4.0), (4.0, 6.0), (6.0, 8.0), (8.0, 10.0)];
    // Pair satisfaction: only agent 0's last segment violates close(.,.,5)
    // (it reaches 10, distance 10 > 5 from agent 1 parked at 0).
    let violating0 = [false, false, false, false, true];
    let mut fix = |var: VarId, v: f64| {
        lb[var] = v;
        ub[var] = v;
    };
    for i in 0..5 {
        for j in 0..5 {
            let inter = spans0[i].0 <= spans1[j].1 && spans0[i].1 >= spans1[j].0;
            fix(p.ztemp_of(0, i, 1, j), if inter { 1.0 } else { 0.0 });
            fix(p.zpair_of(0, i, 1, j), if violating0[i] { 0.0 } else { 1.0 });
            fix(p.zplus[&(0, i, 1, j)], if spans0[i].1 >= spans1[j].1 { 1.0 } else { 0.0 });
            fix(p.zminus[&(0, i, 1, j)], if spans0[i].0 <= spans1[j].0 { 1.0 } else { 0.0 });
            fix(p.zplus[&(1, j, 0, i)], if spans1[j].1 >= spans0[i].1 { 1.0 } else { 0.0 });
            fix(p.zminus[&(1, j, 0, i)], if spans1[j].0 <= spans0[i].0 { 1.0 } else { 0.0 });
        }
    }
    // Aggregates: agent 0 violates only in its last segment; agent 1's
    // segments 3 and 4 temporally intersect that violating segment.
    for i in 0..5 {
        fix(p.zspat[&(0, i)], if violating0[i] { 0.0 } else { 1.0 });
    }
    let agg1 = [1.0, 1.0, 1.0, 0.0, 0.0];
    for j in 0..5 {
        fix(p.zspat[&(1, j)], agg1[j]);
    }

    // θ^{0,+}(agent 1, segment 2): first later violator of agent 0 is its
    // segment 4 starting at 7, so the budget is 7 - 6 = 1.
    let tp = p.th0[&(1, 2, 0, true)];
    let mut m = fx.enc.model.clone();
    m.set_objective(LinExpr::var(tp), true).unwrap();
    let (sol, _) = solve_lp_with_bounds(&m, &lb, &ub, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(
        (sol.objective.unwrap() - 1.0).abs() < 1e-6,
        "theta0+ = {}",
        sol.objective.unwrap()
    );

    // θ^{0,-}(agent 1, segment 2): no earlier violator, capped by the
    // horizon start: h(1,2)^(0) - t0 = 4.
    let tm = p.th0[&(1, 2, 0, false)];
    m.set_objective(LinExpr::var(tm), true).unwrap();
    let (sol, _) = solve_lp_with_bounds(&m, &lb, &ub, &cfg()).unwrap();
    assert!(
        (sol.objective.unwrap() - 4.0).abs() < 1e-6,
        "theta0- = {}",
        sol.objective.unwrap()
    );
}

#[test]
fn chain_accumulates_durations_until_first_violation() {
    // Single agent, three segments of duration 10 each; the predicate
    // (x >= 0) holds on the first two segments and fails on the third.
    let text = r#"{
        "dim": 1,
        "agents": [
            {"x0": [5.0], "v0": [0.0], "vmin": [-10.0], "vmax": [10.0]}
        ],
        "t0": 0.0, "tf": 30.0,
        "n_segments": 3,
        "degree": 2,
        "workspace": {"vertices": [[-20.0], [20.0]]},
        "spec": "G[1,2] hs(1,[1],0)",
        "robustness": "right"
    }"#;
    let sc = Scenario::from_json(text).unwrap();
    let f = sc.formula().unwrap();
    let mut enc = encode(&sc, &f).unwrap();
    let h = vec![vec![
        vec![0.0, 5.0, 10.0],
        vec![10.0, 15.0, 20.0],
        vec![20.0, 25.0, 30.0],
    ]];
    let r = vec![vec![
        vec![vec![5.0], vec![5.0], vec![5.0]],
        vec![vec![5.0], vec![5.0], vec![5.0]],
        vec![vec![5.0], vec![-5.0], vec![-5.0]],
    ]];
    pin_trajectory(&mut enc, &r, &h);

    let p = &enc.index.preds[0];
    let mut lb: Vec<f64> = enc.model.vars().iter().map(|v| v.lb).collect();
    let mut ub: Vec<f64> = enc.model.vars().iter().map(|v| v.ub).collect();
    let mut fix = |var: VarId, v: f64| {
        lb[var] = v;
        ub[var] = v;
    };
    // z^spat pattern [1, 1, 0] is forced; fix it together with every
    // per-control-point reification so the LP probe is exact.
    let zs_expected = [1.0, 1.0, 0.0];
    for i in 0..3 {
        fix(p.zspat[&(0, i)], zs_expected[i]);
    }
    for v in enc.model.vars() {
        if v.name.starts_with("zsr_p0_k0_i0") || v.name.starts_with("zsr_p0_k0_i1") {
            fix(v.id, 1.0);
        }
    }
    // The third segment has one violating control point (the later two).
    fix(enc.model.lookup("zsr_p0_k0_i2_a0_b0").unwrap(), 1.0);
    fix(enc.model.lookup("zsr_p0_k0_i2_a0_b1").unwrap(), 0.0);
    fix(enc.model.lookup("zsr_p0_k0_i2_a0_b2").unwrap(), 0.0);
    // Chain selectors for θ^{+}(0, 0): m = 1 keeps the satisfying second
    // segment (cap branch), m = 2 hits the violating third segment at the
    // accumulated duration B(1) = 10.
    fix(enc.model.lookup("wp_p0_k0_i0_m1").unwrap(), 1.0);
    fix(enc.model.lookup("wp_p0_k0_i0_m2").unwrap(), 0.0);

    let chain = p.chain[&(0, 0, true, 0)];
    let mut m = enc.model.clone();
    m.set_objective(LinExpr::var(chain), true).unwrap();
    let (sol, _) = solve_lp_with_bounds(&m, &lb, &ub, &cfg()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(
        (sol.objective.unwrap() - 10.0).abs() < 1e-6,
        "chain = {}",
        sol.objective.unwrap()
    );
}

#[test]
fn per_pred_stats_scale_with_segments() {
    // Two-agent predicate: quadratic in N; one-agent predicate: near-linear.
    let joint_counts: Vec<f64> = [2usize, 4, 8]
        .iter()
        .map(|&n| {
            let text = format!(
                r#"{{
                    "dim": 1,
                    "agents": [
                        {{"x0": [0.0], "v0": [0.0], "vmin": [-5.0], "vmax": [5.0]}},
                        {{"x0": [1.0], "v0": [0.0], "vmin": [-5.0], "vmax": [5.0]}}
                    ],
                    "t0": 0.0, "tf": 10.0,
                    "n_segments": {n},
                    "degree": 2,
                    "workspace": {{"vertices": [[-20.0], [20.0]]}},
                    "spec": "G[2,3] close(1,2,5.0)"
                }}"#
            );
            let sc = Scenario::from_json(&text).unwrap();
            let f = sc.formula().unwrap();
            let enc = encode(&sc, &f).unwrap();
            enc.index.stats.per_pred[0].binaries as f64
        })
        .collect();
    let ratios: Vec<f64> = [2.0f64, 4.0, 8.0]
        .iter()
        .zip(&joint_counts)
        .map(|(n, b)| b / (n * n))
        .collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
    assert!(hi <= 2.0 * lo, "quadratic fit violated: {ratios:?}");

    let single_counts: Vec<f64> = [2usize, 4, 8]
        .iter()
        .map(|&n| {
            let sc = scenario_1d("G[2,3] hs(1,[1],0)", n, "");
            let f = sc.formula().unwrap();
            let enc = encode(&sc, &f).unwrap();
            enc.index.stats.per_pred[0].binaries as f64
        })
        .collect();
    let ratios: Vec<f64> = [2.0f64, 4.0, 8.0]
        .iter()
        .zip(&single_counts)
        .map(|(n, b)| b / n)
        .collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
    assert!(hi <= 2.0 * lo, "linear fit violated: {ratios:?}");
}

#[test]
fn emitted_lp_is_deterministic() {
    let sc = scenario_1d("G[2,3] hs(1,[1],0)", 3, "");
    let f = sc.formula().unwrap();
    let a = encode(&sc, &f).unwrap().model.emit_lp().unwrap();
    let b = encode(&sc, &f).unwrap().model.emit_lp().unwrap();
    assert_eq!(a, b);
}
