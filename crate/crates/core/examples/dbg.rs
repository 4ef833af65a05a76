use atrplan::encoder::{encode, extract_plan};
use atrplan::scenario::Scenario;
use atrplan::solvers::{solve_lp, solve_milp_embedded, SolverConfig};
use std::time::Instant;

fn main() {
    let text = r#"{
        "dim": 1,
        "agents": [
            {"x0": [0.0], "v0": [0.0], "vmin": [-1.5], "vmax": [1.5]}
        ],
        "t0": 0.0, "tf": 100.0,
        "n_segments": 4,
        "degree": 4,
        "workspace": {"vertices": [[-50.0], [50.0]]},
        "spec": "G[20,30] hs(1,[1],-20) && G[60,70] hs(1,[-1],10)",
        "robustness": "right"
    }"#;
    let sc = Scenario::from_json(text).unwrap();
    let f = sc.formula().unwrap();
    let enc = encode(&sc, &f).unwrap();
    println!("vars={} bins={} cons={}", enc.model.n_vars(), enc.model.n_binaries(), enc.model.n_constraints());
    let cfg = SolverConfig::default();
    let t0 = Instant::now();
    let lp = solve_lp(&enc.model, &cfg).unwrap();
    println!("LP: {:?} obj={:?} in {:.3}s", lp.status, lp.objective, t0.elapsed().as_secs_f64());
    let t0 = Instant::now();
    let (sol, stats) = solve_milp_embedded(&enc.model, &cfg).unwrap();
    println!("MILP: {:?} obj={:?} nodes={} iters={} wall={:.2}s",
        sol.status, sol.objective, stats.nodes, stats.simplex_iters, t0.elapsed().as_secs_f64());
    if sol.status == atrplan::milp::SolveStatus::Optimal {
        let (plan, theta, _) = extract_plan(&enc, &sol, &sc).unwrap();
        println!("theta = {theta}");
        for i in 0..4 {
            let (a, b) = plan.time_span(0, i).unwrap();
            let (p0, _) = plan.state_at(0, a).unwrap();
            let (p1, _) = plan.state_at(0, b).unwrap();
            println!("seg {i}: [{a:.3}, {b:.3}] z: {:.3} -> {:.3}", p0[0], p1[0]);
        }
    }
}
