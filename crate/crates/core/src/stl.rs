//! STL fragment over joint-linear predicates: AST, concrete-syntax parser,
//! atom desugaring, and qualitative semantics on sampled signals.
//!
//! Grammar (ASCII):
//!   phi  := or_expr
//!   or   := and_expr { "||" and_expr }
//!   and  := term { "&&" term }
//!   term := psi | "(" phi ")"
//!   psi  := atom | ("G" | "F") "[" num "," num "]" atom
//!   atom := "in(" agent "," region ")"
//!         | "close(" agent "," agent "," num ")"
//!         | "hs(" agent "," "[" num {"," num} "]" "," num ")"
//!
//! `&&` binds tighter than `||`; chains fold to the right. Agents are
//! 1-based in the concrete syntax and 0-based in the AST.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::geometry::{ConvexPolygon, Point};
use crate::trajectory::SampledSignal;

#[derive(Debug, Error)]
pub enum StlError {
    #[error("parse error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("parse error at byte {pos}: unknown region `{name}`")]
    UnknownRegion { pos: usize, name: String },
    #[error("parse error at byte {pos}: agent index {index} out of range 1..={n}")]
    AgentOutOfRange { pos: usize, index: usize, n: usize },
    #[error("parse error at byte {pos}: nested temporal operator")]
    NestedTemporal { pos: usize },
    #[error("parse error at byte {pos}: interval [{lo}, {hi}] has lo > hi")]
    BadInterval { pos: usize, lo: f64, hi: f64 },
    #[error("close() distance must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("close() needs two distinct agents")]
    CloseSameAgent,
    #[error("region `{name}` has dimension {got}, scenario dimension is {want}")]
    RegionDimension { name: String, got: usize, want: usize },
    #[error("hs() coefficient vector has length {got}, workspace dimension is {want}")]
    HsDimension { got: usize, want: usize },
    #[error("formula interval [{lo}, {hi}] exceeds the signal horizon [{t0}, {tf}]")]
    IntervalBeyondHorizon { lo: f64, hi: f64, t0: f64, tf: f64 },
}

/// One linear inequality over the joint state: `Σ_k a_k·x_k + b >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAtom {
    /// Per-agent coefficient vectors, keyed by 0-based agent index.
    pub coeffs: BTreeMap<usize, Vec<f64>>,
    pub offset: f64,
}

impl LinearAtom {
    pub fn new(coeffs: BTreeMap<usize, Vec<f64>>, offset: f64) -> Self {
        debug_assert!(coeffs
            .values()
            .any(|v| v.iter().any(|c| *c != 0.0)));
        Self { coeffs, offset }
    }

    /// Evaluates `μ` given a position per agent (indexed by agent id).
    pub fn eval(&self, state: &dyn Fn(usize) -> Point) -> f64 {
        let mut v = self.offset;
        for (agent, a) in &self.coeffs {
            let x = state(*agent);
            v += x.dot(a);
        }
        v
    }
}

/// Conjunction of linear atoms treated as a single convex predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub atoms: Vec<LinearAtom>,
    /// Source form, kept for printing.
    pub source: AtomSpec,
}

impl Predicate {
    /// Agents whose states influence the predicate.
    pub fn relevant_agents(&self) -> BTreeSet<usize> {
        self.atoms
            .iter()
            .flat_map(|a| a.coeffs.keys().copied())
            .collect()
    }

    /// `min` over atoms of `μ` at the given joint state; satisfaction is a
    /// nonnegative value.
    pub fn margin(&self, state: &dyn Fn(usize) -> Point) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.eval(state))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Concrete atom as written, so formulas can be printed back.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomSpec {
    /// `in(agent, region)` with the region name (0-based agent).
    In { agent: usize, region: String },
    /// `close(a, b, eps)` (0-based agents).
    Close { a: usize, b: usize, eps: f64 },
    /// `hs(agent, coeffs, offset)` (0-based agent).
    HalfSpace {
        agent: usize,
        coeffs: Vec<f64>,
        offset: f64,
    },
}

/// Closed time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        if lo < 0.0 || hi < lo {
            None
        } else {
            Some(Self { lo, hi })
        }
    }
}

/// STL fragment: temporal operators apply only to predicates, so nesting is
/// unrepresentable.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Pred(Predicate),
    Always(Interval, Predicate),
    Eventually(Interval, Predicate),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    /// All temporal intervals in the formula.
    pub fn intervals(&self) -> Vec<Interval> {
        match self {
            Formula::Pred(_) => Vec::new(),
            Formula::Always(i, _) | Formula::Eventually(i, _) => vec![*i],
            Formula::And(a, b) | Formula::Or(a, b) => {
                let mut v = a.intervals();
                v.extend(b.intervals());
                v
            }
        }
    }

    /// Canonical concrete syntax; `parse(print(f)) == f`.
    pub fn print(&self) -> String {
        fn atom_str(p: &Predicate) -> String {
            match &p.source {
                AtomSpec::In { agent, region } => format!("in({},{})", agent + 1, region),
                AtomSpec::Close { a, b, eps } => format!("close({},{},{})", a + 1, b + 1, eps),
                AtomSpec::HalfSpace {
                    agent,
                    coeffs,
                    offset,
                } => {
                    let cs: Vec<String> = coeffs.iter().map(|c| format!("{c}")).collect();
                    format!("hs({},[{}],{})", agent + 1, cs.join(","), offset)
                }
            }
        }
        match self {
            Formula::Pred(p) => atom_str(p),
            Formula::Always(i, p) => format!("G[{},{}] {}", i.lo, i.hi, atom_str(p)),
            Formula::Eventually(i, p) => format!("F[{},{}] {}", i.lo, i.hi, atom_str(p)),
            Formula::And(a, b) => {
                let left = match **a {
                    Formula::And(..) | Formula::Or(..) => format!("({})", a.print()),
                    _ => a.print(),
                };
                let right = match **b {
                    Formula::Or(..) => format!("({})", b.print()),
                    _ => b.print(),
                };
                format!("{left} && {right}")
            }
            Formula::Or(a, b) => {
                let left = match **a {
                    Formula::Or(..) => format!("({})", a.print()),
                    _ => a.print(),
                };
                format!("{left} || {}", b.print())
            }
        }
    }
}

/// Expands an atom into its linear-inequality conjunction.
pub fn desugar(
    spec: AtomSpec,
    regions: &BTreeMap<String, ConvexPolygon>,
    dim: usize,
) -> Result<Predicate, StlError> {
    let atoms = match &spec {
        AtomSpec::In { agent, region } => {
            let poly = regions.get(region).ok_or_else(|| StlError::UnknownRegion {
                pos: 0,
                name: region.clone(),
            })?;
            if poly.dim() != dim {
                return Err(StlError::RegionDimension {
                    name: region.clone(),
                    got: poly.dim(),
                    want: dim,
                });
            }
            poly.faces()
                .iter()
                .map(|f| {
                    let mut coeffs = BTreeMap::new();
                    coeffs.insert(*agent, f.normal.iter().map(|c| -c).collect());
                    LinearAtom::new(coeffs, f.offset)
                })
                .collect()
        }
        AtomSpec::Close { a, b, eps } => {
            if *eps <= 0.0 {
                return Err(StlError::NonPositiveEps(*eps));
            }
            if a == b {
                return Err(StlError::CloseSameAgent);
            }
            let mut atoms = Vec::with_capacity(2 * dim);
            for c in 0..dim {
                let mut unit = vec![0.0; dim];
                unit[c] = 1.0;
                let neg: Vec<f64> = unit.iter().map(|v| -v).collect();
                // eps - (x_a - x_b)_c >= 0
                let mut m1 = BTreeMap::new();
                m1.insert(*a, neg.clone());
                m1.insert(*b, unit.clone());
                atoms.push(LinearAtom::new(m1, *eps));
                // eps + (x_a - x_b)_c >= 0
                let mut m2 = BTreeMap::new();
                m2.insert(*a, unit);
                m2.insert(*b, neg);
                atoms.push(LinearAtom::new(m2, *eps));
            }
            atoms
        }
        AtomSpec::HalfSpace {
            agent,
            coeffs,
            offset,
        } => {
            if coeffs.len() != dim {
                return Err(StlError::HsDimension {
                    got: coeffs.len(),
                    want: dim,
                });
            }
            let mut m = BTreeMap::new();
            m.insert(*agent, coeffs.clone());
            vec![LinearAtom::new(m, *offset)]
        }
    };
    Ok(Predicate { atoms, source: spec })
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    regions: &'a BTreeMap<String, ConvexPolygon>,
    dim: usize,
    n_agents: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, StlError> {
        Err(StlError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), StlError> {
        if self.eat(token) {
            Ok(())
        } else {
            self.err(format!("expected `{token}`"))
        }
    }

    fn number(&mut self) -> Result<f64, StlError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text;
        let mut i = self.pos;
        if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
            i += 1;
        }
        let digits_start = i;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            i += 1;
            if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
                i += 1;
            }
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i == digits_start {
            return self.err("expected a number");
        }
        let s = std::str::from_utf8(&bytes[start..i]).unwrap();
        let v: f64 = s
            .parse()
            .map_err(|_| StlError::Syntax {
                pos: start,
                msg: format!("malformed number `{s}`"),
            })?;
        self.pos = i;
        Ok(v)
    }

    fn agent_index(&mut self) -> Result<usize, StlError> {
        self.skip_ws();
        let start = self.pos;
        let v = self.number()?;
        let idx = v as usize;
        if v.fract() != 0.0 || idx == 0 || idx > self.n_agents {
            return Err(StlError::AgentOutOfRange {
                pos: start,
                index: idx,
                n: self.n_agents,
            });
        }
        Ok(idx - 1)
    }

    fn identifier(&mut self) -> Result<String, StlError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text;
        let mut i = self.pos;
        while i < bytes.len()
            && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
        {
            i += 1;
        }
        if i == start {
            return self.err("expected an identifier");
        }
        self.pos = i;
        Ok(std::str::from_utf8(&bytes[start..i]).unwrap().to_string())
    }

    fn atom(&mut self) -> Result<Predicate, StlError> {
        self.skip_ws();
        let start = self.pos;
        if self.eat("in(") {
            let agent = self.agent_index()?;
            self.expect(",")?;
            let name = self.identifier()?;
            self.expect(")")?;
            if !self.regions.contains_key(&name) {
                return Err(StlError::UnknownRegion { pos: start, name });
            }
            desugar(AtomSpec::In { agent, region: name }, self.regions, self.dim)
        } else if self.eat("close(") {
            let a = self.agent_index()?;
            self.expect(",")?;
            let b = self.agent_index()?;
            self.expect(",")?;
            let eps = self.number()?;
            self.expect(")")?;
            desugar(AtomSpec::Close { a, b, eps }, self.regions, self.dim)
        } else if self.eat("hs(") {
            let agent = self.agent_index()?;
            self.expect(",")?;
            self.expect("[")?;
            let mut coeffs = vec![self.number()?];
            while self.eat(",") {
                coeffs.push(self.number()?);
            }
            self.expect("]")?;
            self.expect(",")?;
            let offset = self.number()?;
            self.expect(")")?;
            desugar(
                AtomSpec::HalfSpace {
                    agent,
                    coeffs,
                    offset,
                },
                self.regions,
                self.dim,
            )
        } else {
            self.err("expected an atom: in(...), close(...), or hs(...)")
        }
    }

    fn psi(&mut self) -> Result<Formula, StlError> {
        self.skip_ws();
        let op = if self.peek() == Some(b'G') && !self.text[self.pos..].starts_with(b"G[") {
            None // not a temporal operator after all
        } else if self.eat("G[") {
            Some(true)
        } else if self.eat("F[") {
            Some(false)
        } else {
            None
        };
        match op {
            Some(always) => {
                let lo_pos = self.pos;
                let lo = self.number()?;
                self.expect(",")?;
                let hi = self.number()?;
                self.expect("]")?;
                let interval = Interval::new(lo, hi).ok_or(StlError::BadInterval {
                    pos: lo_pos,
                    lo,
                    hi,
                })?;
                // A temporal operator here would be nesting; the grammar
                // forbids it but report it clearly.
                self.skip_ws();
                if self.text[self.pos..].starts_with(b"G[")
                    || self.text[self.pos..].starts_with(b"F[")
                {
                    return Err(StlError::NestedTemporal { pos: self.pos });
                }
                let p = self.atom()?;
                Ok(if always {
                    Formula::Always(interval, p)
                } else {
                    Formula::Eventually(interval, p)
                })
            }
            None => Ok(Formula::Pred(self.atom()?)),
        }
    }

    fn term(&mut self) -> Result<Formula, StlError> {
        if self.eat("(") {
            let f = self.or_expr()?;
            self.expect(")")?;
            Ok(f)
        } else {
            self.psi()
        }
    }

    fn and_expr(&mut self) -> Result<Formula, StlError> {
        let mut parts = vec![self.term()?];
        while self.eat("&&") {
            parts.push(self.term()?);
        }
        Ok(fold_right(parts, |a, b| Formula::And(Box::new(a), Box::new(b))))
    }

    fn or_expr(&mut self) -> Result<Formula, StlError> {
        let mut parts = vec![self.and_expr()?];
        while self.eat("||") {
            parts.push(self.and_expr()?);
        }
        Ok(fold_right(parts, |a, b| Formula::Or(Box::new(a), Box::new(b))))
    }
}

fn fold_right(mut parts: Vec<Formula>, join: impl Fn(Formula, Formula) -> Formula) -> Formula {
    let mut acc = parts.pop().expect("non-empty");
    while let Some(f) = parts.pop() {
        acc = join(f, acc);
    }
    acc
}

/// Parses a specification string against the scenario's regions, workspace
/// dimension, and agent count.
pub fn parse(
    text: &str,
    regions: &BTreeMap<String, ConvexPolygon>,
    dim: usize,
    n_agents: usize,
) -> Result<Formula, StlError> {
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        regions,
        dim,
        n_agents,
    };
    let f = p.or_expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return p.err("trailing input");
    }
    Ok(f)
}

/// Standard sampled semantics: Always quantifies over every grid point in
/// the closed interval, Eventually over any. Satisfaction of a predicate is
/// `margin >= -1e-9` at the sample.
pub fn qualitative_sat(formula: &Formula, signal: &SampledSignal) -> Result<bool, StlError> {
    let (t0, tf) = (signal.t0(), signal.tf());
    for iv in formula.intervals() {
        if iv.lo < t0 - 1e-9 || iv.hi > tf + 1e-9 {
            return Err(StlError::IntervalBeyondHorizon {
                lo: iv.lo,
                hi: iv.hi,
                t0,
                tf,
            });
        }
    }
    Ok(eval_sat(formula, signal))
}

fn pred_holds_at(p: &Predicate, signal: &SampledSignal, ti: usize) -> bool {
    let state = |agent: usize| signal.per_agent[agent][ti].clone();
    p.margin(&state) >= -1e-9
}

fn eval_sat(formula: &Formula, signal: &SampledSignal) -> bool {
    match formula {
        Formula::Pred(p) => pred_holds_at(p, signal, 0),
        Formula::Always(iv, p) => signal
            .times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= iv.lo - 1e-9 && t <= iv.hi + 1e-9)
            .all(|(ti, _)| pred_holds_at(p, signal, ti)),
        Formula::Eventually(iv, p) => signal
            .times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= iv.lo - 1e-9 && t <= iv.hi + 1e-9)
            .any(|(ti, _)| pred_holds_at(p, signal, ti)),
        Formula::And(a, b) => eval_sat(a, signal) && eval_sat(b, signal),
        Formula::Or(a, b) => eval_sat(a, signal) || eval_sat(b, signal),
    }
}
