//! MILP backends behind one interface: an embedded branch-and-bound over a
//! dense bounded-variable simplex, and a bridge to external solvers via LP
//! and solution files.

mod branch_bound;
mod simplex;

use std::io::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use thiserror::Error;

use crate::milp::{self, MilpError, MilpModel, MilpSolution, SolveStatus};

pub use branch_bound::{solve_milp_embedded, solve_milp_with_bounds};
pub use simplex::solve_lp_with_bounds;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("variable `{0}` has an unbounded domain; the solver needs finite boxes")]
    UnboundedVariable(String),
    #[error("simplex iteration limit exceeded (numerical trouble)")]
    IterationLimit,
    #[error("external backend selected but no command template configured")]
    MissingExternalCommand,
    #[error("external solver failed (exit code {code:?}): {stderr}")]
    ExternalFailed { code: Option<i32>, stderr: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverBackend {
    Embedded,
    External,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub relative_gap: f64,
    pub node_limit: u64,
    pub time_limit_secs: f64,
    pub backend: SolverBackend,
    /// External command with `{lp}` and `{sol}` placeholders.
    pub external_cmd: Option<String>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            relative_gap: 1e-6,
            node_limit: 200_000,
            time_limit_secs: 300.0,
            backend: SolverBackend::Embedded,
            external_cmd: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolverStats {
    pub nodes: u64,
    pub gap: f64,
    pub wall_secs: f64,
    pub simplex_iters: u64,
}

/// Solves the model with the configured backend.
pub fn solve_milp(
    model: &MilpModel,
    config: &SolverConfig,
) -> Result<(MilpSolution, SolverStats), SolveError> {
    match config.backend {
        SolverBackend::Embedded => solve_milp_embedded(model, config),
        SolverBackend::External => solve_milp_external(model, config),
    }
}

/// Solves the LP relaxation (binaries treated as continuous on [0, 1]).
pub fn solve_lp(model: &MilpModel, config: &SolverConfig) -> Result<MilpSolution, SolveError> {
    let lb: Vec<f64> = model.vars().iter().map(|v| v.lb).collect();
    let ub: Vec<f64> = model.vars().iter().map(|v| v.ub).collect();
    let (sol, _iters) = solve_lp_with_bounds(model, &lb, &ub, config)?;
    Ok(sol)
}

static EXTERNAL_RUN_ID: AtomicU64 = AtomicU64::new(0);

/// Emits the LP file, runs the external command template, and parses the
/// solution file it produces.
pub fn solve_milp_external(
    model: &MilpModel,
    config: &SolverConfig,
) -> Result<(MilpSolution, SolverStats), SolveError> {
    let template = config
        .external_cmd
        .as_deref()
        .ok_or(SolveError::MissingExternalCommand)?;
    let start = Instant::now();
    let run = EXTERNAL_RUN_ID.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("atrplan-{}-{}", std::process::id(), run));
    std::fs::create_dir_all(&dir)?;
    let lp_path = dir.join("model.lp");
    let sol_path = dir.join("model.sol");
    let lp_text = model.emit_lp()?;
    let mut f = std::fs::File::create(&lp_path)?;
    f.write_all(lp_text.as_bytes())?;
    drop(f);

    let cmd = template
        .replace("{lp}", &lp_path.to_string_lossy())
        .replace("{sol}", &sol_path.to_string_lossy());
    let output = std::process::Command::new("sh").arg("-c").arg(&cmd).output()?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
        let _ = std::fs::remove_dir_all(&dir);
        return Err(SolveError::ExternalFailed {
            code: output.status.code(),
            stderr,
        });
    }
    let text = std::fs::read_to_string(&sol_path)?;
    let sol = milp::parse_solution(model, &text)?;
    let _ = std::fs::remove_dir_all(&dir);
    let stats = SolverStats {
        nodes: 0,
        gap: if sol.status == SolveStatus::Optimal {
            0.0
        } else {
            f64::INFINITY
        },
        wall_secs: start.elapsed().as_secs_f64(),
        simplex_iters: 0,
    };
    Ok((sol, stats))
}
