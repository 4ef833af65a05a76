//! Solver-agnostic mixed-integer linear model: variables, linear
//! expressions, constraints, big-M reification helpers, deterministic LP
//! text emission, and solution-file parsing.
//!
//! The LP dialect is fixed so that emission is byte-identical across runs:
//! terms render in variable-id order with explicit coefficients, and
//! coefficients use the shortest round-trip decimal form.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

pub type VarId = usize;

/// Strict-side margin used by reified inequalities.
pub const EPS_STRICT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("invalid variable name `{0}`")]
    InvalidName(String),
    #[error("bounds lb={lb} > ub={ub} for variable `{name}`")]
    BadBounds { name: String, lb: f64, ub: f64 },
    #[error("binary variable `{0}` must have bounds [0, 1]")]
    BadBinaryBounds(String),
    #[error("unknown variable id {0}")]
    UnknownVarId(VarId),
    #[error("unknown variable name `{0}`")]
    UnknownVarName(String),
    #[error("model has no objective")]
    NoObjective,
    #[error("non-finite coefficient in expression")]
    NonFiniteCoefficient,
    #[error("big-M and eps must be positive (M={m}, eps={eps})")]
    BadReifyParams { m: f64, eps: f64 },
    #[error("variable `{0}` has a half-bounded range; LP text requires both bounds finite or both infinite")]
    HalfBounded(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("solution value {value} for `{name}` violates bounds [{lb}, {ub}]")]
    ValueOutOfBounds {
        name: String,
        value: f64,
        lb: f64,
        ub: f64,
    },
    #[error("solution value {value} for binary `{name}` is not integral")]
    NonIntegralBinary { name: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

/// Linear expression `Σ coeff·var + constant`, normalized to at most one
/// term per variable in ascending id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(f64, VarId)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(id: VarId) -> Self {
        Self {
            terms: vec![(1.0, id)],
            constant: 0.0,
        }
    }

    pub fn term(coeff: f64, id: VarId) -> Self {
        Self {
            terms: vec![(coeff, id)],
            constant: 0.0,
        }
    }

    pub fn push(mut self, coeff: f64, id: VarId) -> Self {
        self.terms.push((coeff, id));
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add(mut self, other: &LinExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn sub(mut self, other: &LinExpr) -> Self {
        for (c, v) in &other.terms {
            self.terms.push((-c, *v));
        }
        self.constant -= other.constant;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for (c, _) in &mut self.terms {
            *c *= s;
        }
        self.constant *= s;
        self
    }

    fn normalize(&mut self) {
        self.terms.sort_by_key(|(_, v)| *v);
        let mut merged: Vec<(f64, VarId)> = Vec::with_capacity(self.terms.len());
        for &(c, v) in &self.terms {
            match merged.last_mut() {
                Some((mc, mv)) if *mv == v => *mc += c,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|(c, _)| *c != 0.0);
        self.terms = merged;
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(c, v)| c * values[*v])
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn as_str(&self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// Linear constraint `expr <sense> rhs`; the expression constant is folded
/// into the right-hand side on insertion.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unknown,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "OPTIMAL",
            SolveStatus::Infeasible => "INFEASIBLE",
            SolveStatus::Unknown => "UNKNOWN",
        }
    }
}

/// Result of solving a model. `values` is indexed by variable id and is
/// empty unless the status is optimal.
#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: Vec<f64>,
}

impl MilpSolution {
    pub fn value(&self, id: VarId) -> f64 {
        self.values[id]
    }

    pub fn infeasible() -> Self {
        Self {
            status: SolveStatus::Infeasible,
            objective: None,
            values: Vec::new(),
        }
    }

    pub fn unknown() -> Self {
        Self {
            status: SolveStatus::Unknown,
            objective: None,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    vars: Vec<Variable>,
    by_name: HashMap<String, VarId>,
    constraints: Vec<Constraint>,
    objective: Option<(LinExpr, bool)>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: &str,
        kind: VarKind,
        lb: f64,
        ub: f64,
    ) -> Result<VarId, MilpError> {
        if !valid_name(name) {
            return Err(MilpError::InvalidName(name.to_string()));
        }
        if self.by_name.contains_key(name) {
            return Err(MilpError::DuplicateName(name.to_string()));
        }
        if kind == VarKind::Binary && (lb != 0.0 || ub != 1.0) {
            return Err(MilpError::BadBinaryBounds(name.to_string()));
        }
        if lb > ub {
            return Err(MilpError::BadBounds {
                name: name.to_string(),
                lb,
                ub,
            });
        }
        let id = self.vars.len();
        self.vars.push(Variable {
            id,
            name: name.to_string(),
            kind,
            lb,
            ub,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_continuous(&mut self, name: &str, lb: f64, ub: f64) -> Result<VarId, MilpError> {
        self.add_variable(name, VarKind::Continuous, lb, ub)
    }

    pub fn add_binary(&mut self, name: &str) -> Result<VarId, MilpError> {
        self.add_variable(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_constraint(
        &mut self,
        mut expr: LinExpr,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize, MilpError> {
        expr.normalize();
        for (c, v) in &expr.terms {
            if !c.is_finite() {
                return Err(MilpError::NonFiniteCoefficient);
            }
            if *v >= self.vars.len() {
                return Err(MilpError::UnknownVarId(*v));
            }
        }
        let rhs = rhs - expr.constant;
        expr.constant = 0.0;
        if !rhs.is_finite() {
            return Err(MilpError::NonFiniteCoefficient);
        }
        let id = self.constraints.len();
        self.constraints.push(Constraint { expr, sense, rhs });
        Ok(id)
    }

    /// Replaces any prior objective.
    pub fn set_objective(&mut self, mut expr: LinExpr, maximize: bool) -> Result<(), MilpError> {
        expr.normalize();
        for (c, v) in &expr.terms {
            if !c.is_finite() {
                return Err(MilpError::NonFiniteCoefficient);
            }
            if *v >= self.vars.len() {
                return Err(MilpError::UnknownVarId(*v));
            }
        }
        self.objective = Some((expr, maximize));
        Ok(())
    }

    /// Adds a binary `z` with `z = 1 ⇔ expr >= 0`, assuming `|expr| <= M`
    /// over the variable box. `z = 0` forces `expr <= -eps`. When the
    /// expression's range over the variable bounds is tighter than the
    /// caller's M, the tighter constant is used (a smaller valid big-M
    /// strengthens the relaxation without changing the reified meaning).
    pub fn reify_geq(
        &mut self,
        name: &str,
        expr: LinExpr,
        m: f64,
        eps: f64,
    ) -> Result<VarId, MilpError> {
        if m <= 0.0 || eps <= 0.0 {
            return Err(MilpError::BadReifyParams { m, eps });
        }
        let mut m = m;
        if let Some((lo, hi)) = self.expr_range(&expr) {
            m = m.min(lo.abs().max(hi.abs()) + 1.0).max(eps * 10.0);
        }
        let z = self.add_binary(name)?;
        // expr >= -M(1-z)  <=>  expr - M z >= -M
        self.add_constraint(expr.clone().push(-m, z), Sense::Ge, -m)?;
        // expr <= -eps + M z  <=>  expr - M z <= -eps
        self.add_constraint(expr.push(-m, z), Sense::Le, -eps)?;
        Ok(z)
    }

    /// Interval of an expression over the variable bounds, when finite.
    pub fn expr_range(&self, expr: &LinExpr) -> Option<(f64, f64)> {
        let mut lo = expr.constant;
        let mut hi = expr.constant;
        for (c, v) in &expr.terms {
            let var = &self.vars[*v];
            if !var.lb.is_finite() || !var.ub.is_finite() {
                return None;
            }
            let a = c * var.lb;
            let b = c * var.ub;
            lo += a.min(b);
            hi += a.max(b);
        }
        Some((lo, hi))
    }

    /// Adds a binary `z = AND(terms)`: `z <= t_i` and `z >= Σ t_i - n + 1`.
    pub fn add_and(&mut self, name: &str, terms: &[VarId]) -> Result<VarId, MilpError> {
        let z = self.add_binary(name)?;
        let mut sum = LinExpr::new();
        for t in terms {
            self.add_constraint(
                LinExpr::var(z).push(-1.0, *t),
                Sense::Le,
                0.0,
            )?;
            sum = sum.push(1.0, *t);
        }
        self.add_constraint(
            LinExpr::var(z).sub(&sum),
            Sense::Ge,
            1.0 - terms.len() as f64,
        )?;
        Ok(z)
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id]
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> Option<&(LinExpr, bool)> {
        self.objective.as_ref()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn render_expr(&self, out: &mut String, expr: &LinExpr) {
        let mut first = true;
        for (c, v) in &expr.terms {
            let name = &self.vars[*v].name;
            if first {
                if *c < 0.0 {
                    let _ = write!(out, "- {} {}", fmt_num(-c), name);
                } else {
                    let _ = write!(out, "{} {}", fmt_num(*c), name);
                }
                first = false;
            } else if *c < 0.0 {
                let _ = write!(out, " - {} {}", fmt_num(-c), name);
            } else {
                let _ = write!(out, " + {} {}", fmt_num(*c), name);
            }
        }
        if expr.constant != 0.0 || first {
            if first {
                let _ = write!(out, "{}", fmt_num(expr.constant));
            } else if expr.constant < 0.0 {
                let _ = write!(out, " - {}", fmt_num(-expr.constant));
            } else {
                let _ = write!(out, " + {}", fmt_num(expr.constant));
            }
        }
    }

    /// Deterministic LP text for the model. Identical build sequences yield
    /// byte-identical output.
    pub fn emit_lp(&self) -> Result<String, MilpError> {
        let (obj, maximize) = self.objective.as_ref().ok_or(MilpError::NoObjective)?;
        let mut out = String::new();
        out.push_str(if *maximize { "Maximize\n" } else { "Minimize\n" });
        out.push_str(" obj: ");
        self.render_expr(&mut out, obj);
        out.push('\n');
        out.push_str("Subject To\n");
        for (k, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{}: ", k);
            self.render_expr(&mut out, &c.expr);
            let _ = writeln!(out, " {} {}", c.sense.as_str(), fmt_num(c.rhs));
        }
        out.push_str("Bounds\n");
        for v in &self.vars {
            match (v.lb.is_finite(), v.ub.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lb), v.name, fmt_num(v.ub));
                }
                (false, false) => {
                    let _ = writeln!(out, " {} free", v.name);
                }
                _ => return Err(MilpError::HalfBounded(v.name.clone())),
            }
        }
        let binaries: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binaries\n ");
            out.push_str(&binaries.join(" "));
            out.push('\n');
        }
        out.push_str("End\n");
        Ok(out)
    }
}

/// Shortest round-trip decimal for a coefficient.
fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{}", x)
    }
}

/// Writes a solution in the text format consumed by `parse_solution`.
pub fn format_solution(model: &MilpModel, sol: &MilpSolution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "status {}", sol.status.as_str());
    if sol.status == SolveStatus::Optimal {
        let _ = writeln!(out, "objective {}", sol.objective.unwrap_or(0.0));
        for v in model.vars() {
            let _ = writeln!(out, "var {} {}", v.name, sol.values[v.id]);
        }
    }
    out
}

/// Parses a solution file against the model. Missing variables default to
/// their lower bound; unknown names are rejected.
pub fn parse_solution(model: &MilpModel, text: &str) -> Result<MilpSolution, MilpError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (ln, first) = lines.next().ok_or(MilpError::Parse {
        line: 1,
        msg: "empty solution file".into(),
    })?;
    let status = match first.trim().strip_prefix("status ") {
        Some("OPTIMAL") => SolveStatus::Optimal,
        Some("INFEASIBLE") => SolveStatus::Infeasible,
        Some("UNKNOWN") => SolveStatus::Unknown,
        _ => {
            return Err(MilpError::Parse {
                line: ln + 1,
                msg: format!("expected `status OPTIMAL|INFEASIBLE|UNKNOWN`, got `{first}`"),
            })
        }
    };
    if status != SolveStatus::Optimal {
        return Ok(MilpSolution {
            status,
            objective: None,
            values: Vec::new(),
        });
    }
    let (ln, second) = lines.next().ok_or(MilpError::Parse {
        line: ln + 2,
        msg: "missing objective line".into(),
    })?;
    let objective: f64 = second
        .trim()
        .strip_prefix("objective ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or(MilpError::Parse {
            line: ln + 1,
            msg: format!("expected `objective <decimal>`, got `{second}`"),
        })?;
    let mut values: Vec<f64> = model.vars().iter().map(|v| {
        if v.lb.is_finite() { v.lb } else { 0.0 }
    }).collect();
    for (ln, line) in lines {
        let rest = line.trim().strip_prefix("var ").ok_or(MilpError::Parse {
            line: ln + 1,
            msg: format!("expected `var <name> <decimal>`, got `{line}`"),
        })?;
        let mut parts = rest.split_whitespace();
        let name = parts.next().ok_or(MilpError::Parse {
            line: ln + 1,
            msg: "missing variable name".into(),
        })?;
        let value: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(MilpError::Parse {
                line: ln + 1,
                msg: format!("missing or malformed value for `{name}`"),
            })?;
        let id = model
            .lookup(name)
            .ok_or_else(|| MilpError::UnknownVarName(name.to_string()))?;
        values[id] = value;
    }
    for v in model.vars() {
        let x = values[v.id];
        if x < v.lb - 1e-6 || x > v.ub + 1e-6 {
            return Err(MilpError::ValueOutOfBounds {
                name: v.name.clone(),
                value: x,
                lb: v.lb,
                ub: v.ub,
            });
        }
        if v.kind == VarKind::Binary && (x - x.round()).abs() > 1e-6 {
            return Err(MilpError::NonIntegralBinary {
                name: v.name.clone(),
                value: x,
            });
        }
    }
    Ok(MilpSolution {
        status,
        objective: Some(objective),
        values,
    })
}

/// Parses the LP dialect produced by `emit_lp` back into a model.
pub fn parse_lp(text: &str) -> Result<MilpModel, MilpError> {
    #[derive(PartialEq)]
    enum Section {
        Start,
        Objective,
        Constraints,
        Bounds,
        Binaries,
        End,
    }
    struct PendingConstraint {
        terms: Vec<(f64, String)>,
        sense: Sense,
        rhs: f64,
    }

    fn parse_terms(body: &str, line: usize) -> Result<(Vec<(f64, String)>, f64), MilpError> {
        let mut terms = Vec::new();
        let mut constant = 0.0;
        let toks: Vec<&str> = body.split_whitespace().collect();
        let mut i = 0;
        let mut sign = 1.0;
        let mut first = true;
        while i < toks.len() {
            if !first || toks[i] == "-" || toks[i] == "+" {
                sign = match toks[i] {
                    "+" => 1.0,
                    "-" => -1.0,
                    t => {
                        return Err(MilpError::Parse {
                            line,
                            msg: format!("expected sign, got `{t}`"),
                        })
                    }
                };
                i += 1;
            }
            first = false;
            let coeff: f64 = toks
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or(MilpError::Parse {
                    line,
                    msg: format!("expected coefficient at token {i}"),
                })?;
            i += 1;
            // A bare number (no following name) is a constant term.
            match toks.get(i) {
                Some(name) if valid_name(name) => {
                    terms.push((sign * coeff, name.to_string()));
                    i += 1;
                }
                _ => constant += sign * coeff,
            }
        }
        Ok((terms, constant))
    }

    let mut section = Section::Start;
    let mut maximize = true;
    let mut objective: Option<(Vec<(f64, String)>, f64)> = None;
    let mut pending: Vec<PendingConstraint> = Vec::new();
    let mut bounds: Vec<(String, f64, f64)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "Maximize" | "Minimize" => {
                maximize = line == "Maximize";
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Constraints;
                continue;
            }
            "Bounds" => {
                section = Section::Bounds;
                continue;
            }
            "Binaries" => {
                section = Section::Binaries;
                continue;
            }
            "End" => {
                section = Section::End;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Objective => {
                let body = line.split_once(':').map(|(_, b)| b).unwrap_or(line);
                objective = Some(parse_terms(body, ln)?);
            }
            Section::Constraints => {
                let body = line
                    .split_once(':')
                    .map(|(_, b)| b)
                    .ok_or(MilpError::Parse {
                        line: ln,
                        msg: "constraint line missing `name:` prefix".into(),
                    })?;
                let (sense, pos) = if let Some(p) = body.find("<=") {
                    (Sense::Le, p)
                } else if let Some(p) = body.find(">=") {
                    (Sense::Ge, p)
                } else if let Some(p) = body.find('=') {
                    (Sense::Eq, p)
                } else {
                    return Err(MilpError::Parse {
                        line: ln,
                        msg: "constraint missing sense".into(),
                    });
                };
                let lhs = &body[..pos];
                let rhs_str = body[pos..].trim_start_matches(['<', '>', '=']).trim();
                let rhs: f64 = rhs_str.parse().map_err(|_| MilpError::Parse {
                    line: ln,
                    msg: format!("malformed right-hand side `{rhs_str}`"),
                })?;
                let (terms, constant) = parse_terms(lhs, ln)?;
                pending.push(PendingConstraint {
                    terms,
                    sense,
                    rhs: rhs - constant,
                });
            }
            Section::Bounds => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() == 2 && toks[1] == "free" {
                    bounds.push((toks[0].to_string(), f64::NEG_INFINITY, f64::INFINITY));
                } else if toks.len() == 5 && toks[1] == "<=" && toks[3] == "<=" {
                    let lb: f64 = toks[0].parse().map_err(|_| MilpError::Parse {
                        line: ln,
                        msg: "malformed lower bound".into(),
                    })?;
                    let ub: f64 = toks[4].parse().map_err(|_| MilpError::Parse {
                        line: ln,
                        msg: "malformed upper bound".into(),
                    })?;
                    bounds.push((toks[2].to_string(), lb, ub));
                } else {
                    return Err(MilpError::Parse {
                        line: ln,
                        msg: format!("malformed bounds line `{line}`"),
                    });
                }
            }
            Section::Binaries => {
                binaries.extend(line.split_whitespace().map(|s| s.to_string()));
            }
            Section::Start | Section::End => {
                return Err(MilpError::Parse {
                    line: ln,
                    msg: format!("unexpected content `{line}`"),
                });
            }
        }
    }

    let mut model = MilpModel::new();
    for (name, lb, ub) in &bounds {
        let kind = if binaries.iter().any(|b| b == name) {
            VarKind::Binary
        } else {
            VarKind::Continuous
        };
        model.add_variable(name, kind, *lb, *ub)?;
    }
    for pc in pending {
        let mut expr = LinExpr::new();
        for (c, name) in pc.terms {
            let id = model
                .lookup(&name)
                .ok_or_else(|| MilpError::UnknownVarName(name.clone()))?;
            expr = expr.push(c, id);
        }
        model.add_constraint(expr, pc.sense, pc.rhs)?;
    }
    if let Some((terms, constant)) = objective {
        let mut expr = LinExpr::constant(constant);
        for (c, name) in terms {
            let id = model
                .lookup(&name)
                .ok_or_else(|| MilpError::UnknownVarName(name.clone()))?;
            expr = expr.push(c, id);
        }
        model.set_objective(expr, maximize)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_registration() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("theta_phi", 0.0, 10.0).unwrap();
        assert_eq!(x, 0);
        assert!(matches!(
            m.add_continuous("theta_phi", 0.0, 1.0),
            Err(MilpError::DuplicateName(_))
        ));
        assert!(matches!(
            m.add_variable("z", VarKind::Binary, 0.0, 2.0),
            Err(MilpError::BadBinaryBounds(_))
        ));
        assert!(matches!(
            m.add_continuous("bad name", 0.0, 1.0),
            Err(MilpError::InvalidName(_))
        ));
        assert!(matches!(
            m.add_continuous("w", 2.0, 1.0),
            Err(MilpError::BadBounds { .. })
        ));
    }

    #[test]
    fn constraint_requires_known_variables() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        m.add_constraint(LinExpr::var(x), Sense::Le, 3.0).unwrap();
        assert!(matches!(
            m.add_constraint(LinExpr::var(99), Sense::Le, 1.0),
            Err(MilpError::UnknownVarId(99))
        ));
    }

    #[test]
    fn objective_replaces_prior() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        m.set_objective(LinExpr::var(x), true).unwrap();
        m.set_objective(LinExpr::term(2.0, x), false).unwrap();
        let (obj, maximize) = m.objective().unwrap();
        assert_eq!(obj.terms, vec![(2.0, x)]);
        assert!(!maximize);
    }

    #[test]
    fn emit_lp_golden() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        m.add_constraint(LinExpr::var(x), Sense::Le, 3.0).unwrap();
        m.set_objective(LinExpr::var(x), true).unwrap();
        let lp = m.emit_lp().unwrap();
        let expected = "Maximize\n obj: 1 x\nSubject To\n c0: 1 x <= 3\nBounds\n 0 <= x <= 10\nEnd\n";
        assert_eq!(lp, expected);
        assert_eq!(lp.lines().count(), 7);
    }

    #[test]
    fn emit_lp_with_binary_section() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let z = m.add_binary("z").unwrap();
        m.add_constraint(LinExpr::var(x).push(1.0, z), Sense::Le, 1.5)
            .unwrap();
        m.set_objective(LinExpr::var(x).push(1.0, z), true).unwrap();
        let lp = m.emit_lp().unwrap();
        assert!(lp.contains("Binaries\n z\n"));
    }

    #[test]
    fn emit_is_deterministic() {
        let build = || {
            let mut m = MilpModel::new();
            let x = m.add_continuous("x", -1.5, 2.5).unwrap();
            let y = m.add_continuous("y", 0.0, 1.0).unwrap();
            let z = m.add_binary("z").unwrap();
            m.add_constraint(
                LinExpr::term(0.25, y).push(-3.0, x).push(1.0, z),
                Sense::Ge,
                -2.0,
            )
            .unwrap();
            m.set_objective(LinExpr::var(x).push(-0.5, y), true).unwrap();
            m.emit_lp().unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn emit_parse_round_trip_is_structurally_identical() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", -1.5, 2.5).unwrap();
        let y = m.add_continuous("y_free", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let z = m.add_binary("z0").unwrap();
        m.add_constraint(
            LinExpr::term(0.25, y).push(-3.0, x).push(1.0, z),
            Sense::Ge,
            -2.0,
        )
        .unwrap();
        m.add_constraint(LinExpr::var(x).push(1.0, y), Sense::Eq, 0.125)
            .unwrap();
        m.set_objective(LinExpr::var(x).push(-0.5, y).plus_const(1.0), true)
            .unwrap();
        let lp = m.emit_lp().unwrap();
        let back = parse_lp(&lp).unwrap();
        assert_eq!(back.emit_lp().unwrap(), lp);
        assert_eq!(back.n_vars(), m.n_vars());
        assert_eq!(back.n_constraints(), m.n_constraints());
        for (a, b) in m.vars().iter().zip(back.vars()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.lb, b.lb);
            assert_eq!(a.ub, b.ub);
        }
    }

    #[test]
    fn parse_solution_cases() {
        let mut m = MilpModel::new();
        m.add_continuous("x", 0.0, 10.0).unwrap();
        let sol = parse_solution(&m, "status OPTIMAL\nobjective 3\nvar x 3\n").unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, Some(3.0));
        assert_eq!(sol.values, vec![3.0]);

        let infeasible = parse_solution(&m, "status INFEASIBLE\n").unwrap();
        assert_eq!(infeasible.status, SolveStatus::Infeasible);
        assert!(infeasible.values.is_empty());

        assert!(matches!(
            parse_solution(&m, "status OPTIMAL\nobjective 0\nvar y 1\n"),
            Err(MilpError::UnknownVarName(_))
        ));
        assert!(matches!(
            parse_solution(&m, "status OPTIMAL\nobjective 0\nvar x nope\n"),
            Err(MilpError::Parse { .. })
        ));
        // Missing variables default to lb.
        let defaulted = parse_solution(&m, "status OPTIMAL\nobjective 0\n").unwrap();
        assert_eq!(defaulted.values, vec![0.0]);
        // Bound violations rejected.
        assert!(matches!(
            parse_solution(&m, "status OPTIMAL\nobjective 0\nvar x 11\n"),
            Err(MilpError::ValueOutOfBounds { .. })
        ));
    }

    #[test]
    fn reify_geq_smoke() {
        // Full truth-table verification lives in the solvers tests where the
        // reified model can actually be solved.
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", -1.0, 1.0).unwrap();
        let z = m.reify_geq("z", LinExpr::var(x), 2.0, 1e-6).unwrap();
        assert_eq!(m.var(z).kind, VarKind::Binary);
        assert_eq!(m.n_constraints(), 2);
        assert!(matches!(
            m.reify_geq("z2", LinExpr::var(x), -1.0, 1e-6),
            Err(MilpError::BadReifyParams { .. })
        ));
    }
}
