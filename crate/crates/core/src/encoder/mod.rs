//! Scenario + formula to MILP translation, and plan extraction from a
//! solution.
//!
//! Variable layout is deterministic: trajectory variables first (curvature
//! then temporal, agent-major), then per-predicate indicator and robustness
//! families in formula order, then operator variables bottom-up.
//!
//! Robustness variables are only ever bounded from above; because the
//! objective maximizes through min-chains, they attain their bounds at the
//! optimum without equality constraints.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bezier::BezierCurve;
use crate::geometry::{BoundingBox, Point};
use crate::milp::{LinExpr, MilpError, MilpModel, MilpSolution, Sense, SolveStatus, VarId, EPS_STRICT};
use crate::monitor::RobustnessMode;
use crate::scenario::{Scenario, ScenarioError};
use crate::stl::{Formula, Interval, LinearAtom, Predicate};
use crate::trajectory::{self, AgentTrajectory, MultiAgentPlan, Segment, TrajectoryError};

#[cfg(test)]
mod tests;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("predicates over more than two agents are not supported (got {0})")]
    TooManyAgents(usize),
    #[error("cannot extract a plan from a {0:?} solution")]
    NotOptimal(SolveStatus),
    #[error("extracted plan violates `{0}`; this indicates an encoder bug")]
    ExtractedPlanInvalid(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Model size bookkeeping, total and per predicate occurrence.
#[derive(Debug, Clone, Default)]
pub struct ModelStats {
    pub n_vars: usize,
    pub n_binaries: usize,
    pub n_constraints: usize,
    pub per_pred: Vec<PredStats>,
}

#[derive(Debug, Clone)]
pub struct PredStats {
    pub label: String,
    pub binaries: usize,
    pub constraints: usize,
}

/// Variable ids for one predicate occurrence (one temporal leaf).
#[derive(Debug, Clone, Default)]
pub struct PredIndex {
    pub label: String,
    /// Sorted relevant agents.
    pub agents: Vec<usize>,
    /// z^spat aggregate per (k, i).
    pub zspat: BTreeMap<(usize, usize), VarId>,
    /// Pairwise z^spat, canonical key (k, i, l, j) with k < l.
    pub zspat_pair: BTreeMap<(usize, usize, usize, usize), VarId>,
    /// Temporal intersection, canonical key (k, i, l, j) with k < l.
    pub ztemp: BTreeMap<(usize, usize, usize, usize), VarId>,
    /// z^+ keyed by ((l, j), (k, i)): segment j of l ends no earlier than
    /// segment i of k.
    pub zplus: BTreeMap<(usize, usize, usize, usize), VarId>,
    /// z^- keyed the same way: segment j of l starts no later.
    pub zminus: BTreeMap<(usize, usize, usize, usize), VarId>,
    /// First-violator budget θ^{0,l,±}(k, i): key (k, i, l, plus).
    pub th0: BTreeMap<(usize, usize, usize, bool), VarId>,
    /// Per-segment cap min(M z^spat, θ^{0,s}): key (k, i, mask).
    pub acap: BTreeMap<(usize, usize, u8), VarId>,
    /// Self-shift chains θ^{dir,s}(k, i): key (k, i, dir_plus, mask).
    pub chain: BTreeMap<(usize, usize, bool, u8), VarId>,
    /// Mode-resolved per-segment robustness θ_p(k, i).
    pub theta_p: BTreeMap<(usize, usize), VarId>,
    /// Overlap indicator o(k, i) with the operator interval.
    pub overlap: BTreeMap<(usize, usize), VarId>,
    /// Operator-level robustness variable.
    pub theta_op: VarId,
}

#[derive(Debug, Clone)]
pub struct EncodingIndex {
    /// r control point variable ids: [agent][segment][control][coord].
    pub r: Vec<Vec<Vec<Vec<VarId>>>>,
    /// h control point variable ids: [agent][segment][control].
    pub h: Vec<Vec<Vec<VarId>>>,
    pub theta_phi: VarId,
    pub preds: Vec<PredIndex>,
    pub stats: ModelStats,
}

pub struct EncodedModel {
    pub model: MilpModel,
    pub index: EncodingIndex,
}

/// Sign conventions for the self-shift direction and the other agents'
/// shift directions, per robustness mode.
fn directions(mode: RobustnessMode) -> Vec<bool> {
    match mode {
        RobustnessMode::Atr => vec![true, false],
        RobustnessMode::Right => vec![true],
        RobustnessMode::Left => vec![false],
    }
}

fn sign_masks(mode: RobustnessMode, n_others: usize) -> Vec<u8> {
    match mode {
        RobustnessMode::Atr => (0u8..(1 << n_others)).collect(),
        RobustnessMode::Right => vec![(1u8 << n_others) - 1],
        RobustnessMode::Left => vec![0],
    }
}

fn mask_tag(mask: u8, n_others: usize) -> String {
    (0..n_others)
        .map(|b| if mask & (1 << b) != 0 { 'p' } else { 'm' })
        .collect()
}

struct Encoder<'a> {
    sc: &'a Scenario,
    model: MilpModel,
    r: Vec<Vec<Vec<Vec<VarId>>>>,
    h: Vec<Vec<Vec<VarId>>>,
    preds: Vec<PredIndex>,
    per_pred_stats: Vec<PredStats>,
    node_counter: usize,
    m_time: f64,
    /// Slack constant for constraints gating robustness variables; the
    /// variables are horizon-bounded, so horizon-scale slack deactivates
    /// them and keeps the relaxation tighter than the full M_t would.
    m_gate: f64,
    horizon: f64,
    ws_box: BoundingBox,
}

pub fn encode(sc: &Scenario, formula: &Formula) -> Result<EncodedModel, EncodeError> {
    sc.validate()?;
    let mut enc = Encoder {
        sc,
        model: MilpModel::new(),
        r: Vec::new(),
        h: Vec::new(),
        preds: Vec::new(),
        per_pred_stats: Vec::new(),
        node_counter: 0,
        m_time: sc.m_time(),
        m_gate: sc.tf - sc.t0 + 1.0,
        horizon: sc.tf - sc.t0,
        ws_box: sc.workspace.bounding_box(),
    };
    enc.encode_trajectory()?;
    // Predicate machinery in formula order, then operators bottom-up.
    enc.encode_pred_leaves(formula, sc.robustness)?;
    let root = enc.encode_operators(formula, &mut 0)?;
    let theta_phi = enc.model.add_continuous("theta_phi", sc.eps_rob, enc.horizon)?;
    enc.model
        .add_constraint(LinExpr::var(theta_phi).push(-1.0, root), Sense::Le, 0.0)?;
    enc.model.set_objective(LinExpr::var(theta_phi), true)?;

    let stats = ModelStats {
        n_vars: enc.model.n_vars(),
        n_binaries: enc.model.n_binaries(),
        n_constraints: enc.model.n_constraints(),
        per_pred: enc.per_pred_stats.clone(),
    };
    Ok(EncodedModel {
        model: enc.model,
        index: EncodingIndex {
            r: enc.r,
            h: enc.h,
            theta_phi,
            preds: enc.preds,
            stats,
        },
    })
}

impl<'a> Encoder<'a> {
    fn n(&self) -> usize {
        self.sc.n_segments
    }

    fn d(&self) -> usize {
        self.sc.degree
    }

    fn h_var(&self, k: usize, i: usize, b: usize) -> VarId {
        self.h[k][i][b]
    }

    fn h_start(&self, k: usize, i: usize) -> VarId {
        self.h[k][i][0]
    }

    fn h_end(&self, k: usize, i: usize) -> VarId {
        self.h[k][i][self.d()]
    }

    /// `Σ_c coeffs[c] · r(k,i)^(b)_c` as a linear expression.
    fn r_dot(&self, k: usize, i: usize, b: usize, coeffs: &[f64]) -> LinExpr {
        let mut e = LinExpr::new();
        for (c, a) in coeffs.iter().enumerate() {
            if *a != 0.0 {
                e = e.push(*a, self.r[k][i][b][c]);
            }
        }
        e
    }

    /// Bound on |μ| of an atom over the workspace box, plus margin.
    fn atom_big_m(&self, atom: &LinearAtom) -> f64 {
        if let Some(m) = self.sc.big_m.spatial {
            return m;
        }
        let mut lo = atom.offset;
        let mut hi = atom.offset;
        for coeffs in atom.coeffs.values() {
            for (c, a) in coeffs.iter().enumerate() {
                let x0 = a * self.ws_box.lo[c];
                let x1 = a * self.ws_box.hi[c];
                lo += x0.min(x1);
                hi += x0.max(x1);
            }
        }
        lo.abs().max(hi.abs()) + 1.0
    }

    // ---- trajectory constraints -------------------------------------

    fn encode_trajectory(&mut self) -> Result<(), EncodeError> {
        let (n_agents, n, d, dim) = (self.sc.n_agents(), self.n(), self.d(), self.sc.dim);
        for k in 0..n_agents {
            let mut r_k = Vec::with_capacity(n);
            let mut h_k = Vec::with_capacity(n);
            for i in 0..n {
                let mut r_i = Vec::with_capacity(d + 1);
                let mut h_i = Vec::with_capacity(d + 1);
                for b in 0..=d {
                    let mut r_b = Vec::with_capacity(dim);
                    for c in 0..dim {
                        let id = self.model.add_continuous(
                            &format!("r_k{k}_i{i}_b{b}_c{c}"),
                            self.ws_box.lo[c],
                            self.ws_box.hi[c],
                        )?;
                        r_b.push(id);
                    }
                    r_i.push(r_b);
                    let id = self
                        .model
                        .add_continuous(&format!("h_k{k}_i{i}_b{b}"), self.sc.t0, self.sc.tf)?;
                    h_i.push(id);
                }
                r_k.push(r_i);
                h_k.push(h_i);
            }
            self.r.push(r_k);
            self.h.push(h_k);
        }

        for k in 0..n_agents {
            let agent = &self.sc.agents[k];
            // (a) joins between consecutive segments: position, time, and
            // first-derivative control points.
            for i in 0..n - 1 {
                for c in 0..dim {
                    self.model.add_constraint(
                        LinExpr::var(self.r[k][i][d][c]).push(-1.0, self.r[k][i + 1][0][c]),
                        Sense::Eq,
                        0.0,
                    )?;
                    self.model.add_constraint(
                        LinExpr::var(self.r[k][i][d][c])
                            .push(-1.0, self.r[k][i][d - 1][c])
                            .push(-1.0, self.r[k][i + 1][1][c])
                            .push(1.0, self.r[k][i + 1][0][c]),
                        Sense::Eq,
                        0.0,
                    )?;
                }
                self.model.add_constraint(
                    LinExpr::var(self.h[k][i][d]).push(-1.0, self.h[k][i + 1][0]),
                    Sense::Eq,
                    0.0,
                )?;
                self.model.add_constraint(
                    LinExpr::var(self.h[k][i][d])
                        .push(-1.0, self.h[k][i][d - 1])
                        .push(-1.0, self.h[k][i + 1][1])
                        .push(1.0, self.h[k][i + 1][0]),
                    Sense::Eq,
                    0.0,
                )?;
            }
            // (b) horizon pins and forward time traversal.
            self.model
                .add_constraint(LinExpr::var(self.h[k][0][0]), Sense::Eq, self.sc.t0)?;
            self.model
                .add_constraint(LinExpr::var(self.h[k][n - 1][d]), Sense::Eq, self.sc.tf)?;
            for i in 0..n {
                for b in 0..d {
                    // d·(h^(b+1) - h^(b)) >= eps_time
                    self.model.add_constraint(
                        LinExpr::term(d as f64, self.h[k][i][b + 1]).push(-(d as f64), self.h[k][i][b]),
                        Sense::Ge,
                        self.sc.eps_time,
                    )?;
                }
            }
            // (c) boundary states.
            for c in 0..dim {
                self.model.add_constraint(
                    LinExpr::var(self.r[k][0][0][c]),
                    Sense::Eq,
                    agent.x0[c],
                )?;
                // (r^(1) - r^(0)) = v0 · (h^(1) - h^(0))
                self.model.add_constraint(
                    LinExpr::var(self.r[k][0][1][c])
                        .push(-1.0, self.r[k][0][0][c])
                        .push(-agent.v0[c], self.h[k][0][1])
                        .push(agent.v0[c], self.h[k][0][0]),
                    Sense::Eq,
                    0.0,
                )?;
                if let Some(xf) = &agent.xf {
                    self.model.add_constraint(
                        LinExpr::var(self.r[k][n - 1][d][c]),
                        Sense::Eq,
                        xf[c],
                    )?;
                }
                if let Some(vf) = &agent.vf {
                    self.model.add_constraint(
                        LinExpr::var(self.r[k][n - 1][d][c])
                            .push(-1.0, self.r[k][n - 1][d - 1][c])
                            .push(-vf[c], self.h[k][n - 1][d])
                            .push(vf[c], self.h[k][n - 1][d - 1]),
                        Sense::Eq,
                        0.0,
                    )?;
                }
            }
            // (d) workspace membership of every control point; obstacle
            // avoidance with a face-selection binary per obstacle.
            for i in 0..n {
                for b in 0..=d {
                    for f in self.sc.workspace.faces() {
                        // offset - normal·r >= 0
                        let e = self.r_dot(k, i, b, &f.normal);
                        self.model.add_constraint(e, Sense::Le, f.offset)?;
                    }
                }
                for (oi, obs) in self.sc.obstacles.iter().enumerate() {
                    let mut face_bins = Vec::with_capacity(obs.faces().len());
                    for (fi, _) in obs.faces().iter().enumerate() {
                        let beta = self
                            .model
                            .add_binary(&format!("obs_k{k}_i{i}_o{oi}_f{fi}"))?;
                        face_bins.push(beta);
                    }
                    let mut sum = LinExpr::new();
                    for &b_id in &face_bins {
                        sum = sum.push(1.0, b_id);
                    }
                    self.model.add_constraint(sum, Sense::Ge, 1.0)?;
                    for (fi, f) in obs.faces().iter().enumerate() {
                        // Face margin over the workspace box, for the big-M.
                        let mut hi = f.offset;
                        for (c, a) in f.normal.iter().enumerate() {
                            let x0 = -a * self.ws_box.lo[c];
                            let x1 = -a * self.ws_box.hi[c];
                            hi += x0.max(x1);
                        }
                        let m_face = hi.abs() + 1.0;
                        for b in 0..=d {
                            // beta = 1 forces offset - normal·r <= 0.
                            let e = self
                                .r_dot(k, i, b, &f.normal)
                                .scaled(-1.0)
                                .push(m_face, face_bins[fi]);
                            self.model.add_constraint(e, Sense::Le, m_face - f.offset)?;
                        }
                    }
                }
            }
            // (e) velocity bounds on derivative control points.
            for i in 0..n {
                for b in 0..d {
                    for c in 0..dim {
                        // (r^(b+1) - r^(b)) - vmax (h^(b+1) - h^(b)) <= 0
                        self.model.add_constraint(
                            LinExpr::var(self.r[k][i][b + 1][c])
                                .push(-1.0, self.r[k][i][b][c])
                                .push(-agent.vmax[c], self.h[k][i][b + 1])
                                .push(agent.vmax[c], self.h[k][i][b]),
                            Sense::Le,
                            0.0,
                        )?;
                        self.model.add_constraint(
                            LinExpr::var(self.r[k][i][b + 1][c])
                                .push(-1.0, self.r[k][i][b][c])
                                .push(-agent.vmin[c], self.h[k][i][b + 1])
                                .push(agent.vmin[c], self.h[k][i][b]),
                            Sense::Ge,
                            0.0,
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    // ---- predicate machinery -----------------------------------------

    fn encode_pred_leaves(
        &mut self,
        formula: &Formula,
        mode: RobustnessMode,
    ) -> Result<(), EncodeError> {
        match formula {
            Formula::Pred(p) => {
                let label = formula.print();
                self.encode_predicate(p, &label, mode)?;
            }
            Formula::Always(_, p) | Formula::Eventually(_, p) => {
                let label = formula.print();
                self.encode_predicate(p, &label, mode)?;
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                self.encode_pred_leaves(a, mode)?;
                self.encode_pred_leaves(b, mode)?;
            }
        }
        Ok(())
    }

    fn encode_predicate(
        &mut self,
        pred: &Predicate,
        label: &str,
        mode: RobustnessMode,
    ) -> Result<(), EncodeError> {
        let bins_before = self.model.n_binaries();
        let cons_before = self.model.n_constraints();
        let p = self.preds.len();
        let agents: Vec<usize> = pred.relevant_agents().into_iter().collect();
        if agents.len() > 2 {
            return Err(EncodeError::TooManyAgents(agents.len()));
        }
        let mut idx = PredIndex {
            label: label.to_string(),
            agents: agents.clone(),
            ..PredIndex::default()
        };

        if agents.len() == 1 {
            self.encode_zspat_single(pred, p, agents[0], &mut idx)?;
        } else {
            self.encode_pairs(pred, p, &agents, &mut idx)?;
            self.encode_theta0(pred, p, &agents, &mut idx)?;
        }
        self.encode_caps_and_chains(p, &agents, mode, &mut idx)?;
        self.encode_theta_pred(p, &agents, mode, &mut idx)?;

        self.preds.push(idx);
        self.per_pred_stats.push(PredStats {
            label: label.to_string(),
            binaries: self.model.n_binaries() - bins_before,
            constraints: self.model.n_constraints() - cons_before,
        });
        Ok(())
    }

    /// Single-agent z^spat(k, i): one reified inequality per (atom, control
    /// point), conjoined.
    fn encode_zspat_single(
        &mut self,
        pred: &Predicate,
        p: usize,
        k: usize,
        idx: &mut PredIndex,
    ) -> Result<(), EncodeError> {
        let (n, d) = (self.n(), self.d());
        for i in 0..n {
            let mut terms = Vec::new();
            for (ai, atom) in pred.atoms.iter().enumerate() {
                let m_atom = self.atom_big_m(atom);
                let coeffs = atom.coeffs.get(&k).expect("single-agent atom");
                for b in 0..=d {
                    let expr = self.r_dot(k, i, b, coeffs).plus_const(atom.offset);
                    let z = self.model.reify_geq(
                        &format!("zsr_p{p}_k{k}_i{i}_a{ai}_b{b}"),
                        expr,
                        m_atom,
                        EPS_STRICT,
                    )?;
                    terms.push(z);
                }
            }
            let zs = self
                .model
                .add_and(&format!("zs_p{p}_k{k}_i{i}"), &terms)?;
            idx.zspat.insert((k, i), zs);
        }
        Ok(())
    }

    /// Pairwise machinery for a two-agent predicate: temporal intersection
    /// and ordering binaries, plus conservative pair satisfaction through
    /// per-agent control-point minima (`μ` is linear, so the minimum over
    /// the control-point product splits into per-agent minima).
    fn encode_pairs(
        &mut self,
        pred: &Predicate,
        p: usize,
        agents: &[usize],
        idx: &mut PredIndex,
    ) -> Result<(), EncodeError> {
        let (n, d) = (self.n(), self.d());
        let (ka, kb) = (agents[0], agents[1]);
        let m_t = self.m_time;

        // Per-agent minima of each atom's contribution, per segment.
        let mut mu: BTreeMap<(usize, usize, usize), VarId> = BTreeMap::new();
        for (ai, atom) in pred.atoms.iter().enumerate() {
            let m_atom = self.atom_big_m(atom);
            for &k in agents {
                let coeffs = match atom.coeffs.get(&k) {
                    Some(c) => c,
                    None => continue,
                };
                for i in 0..n {
                    let v = self.model.add_continuous(
                        &format!("mu_p{p}_a{ai}_k{k}_i{i}"),
                        -m_atom,
                        m_atom,
                    )?;
                    for b in 0..=d {
                        let e = LinExpr::var(v).sub(&self.r_dot(k, i, b, coeffs));
                        self.model.add_constraint(e, Sense::Le, 0.0)?;
                    }
                    mu.insert((ai, k, i), v);
                }
            }
        }

        for i in 0..n {
            for j in 0..n {
                // Temporal intersection of (ka, i) and (kb, j), closed.
                let z1 = self.model.reify_geq(
                    &format!("zta_p{p}_i{i}_j{j}"),
                    LinExpr::var(self.h_end(ka, i)).push(-1.0, self.h_start(kb, j)),
                    m_t,
                    EPS_STRICT,
                )?;
                let z2 = self.model.reify_geq(
                    &format!("ztb_p{p}_i{i}_j{j}"),
                    LinExpr::var(self.h_end(kb, j)).push(-1.0, self.h_start(ka, i)),
                    m_t,
                    EPS_STRICT,
                )?;
                let zt = self
                    .model
                    .add_and(&format!("zt_p{p}_i{i}_j{j}"), &[z1, z2])?;
                idx.ztemp.insert((ka, i, kb, j), zt);

                // Pair satisfaction: one binary whose 1-branch forces every
                // atom's split minimum to be nonnegative.
                let zpair = self.model.add_binary(&format!("zsp_p{p}_i{i}_j{j}"))?;
                for (ai, atom) in pred.atoms.iter().enumerate() {
                    let m_atom = self.atom_big_m(atom);
                    let mut e = LinExpr::constant(atom.offset).push(m_atom, zpair);
                    if let Some(&v) = mu.get(&(ai, ka, i)) {
                        e = e.push(1.0, v);
                    }
                    if let Some(&v) = mu.get(&(ai, kb, j)) {
                        e = e.push(1.0, v);
                    }
                    self.model.add_constraint(e, Sense::Ge, -m_atom)?;
                }
                idx.zspat_pair.insert((ka, i, kb, j), zpair);
            }
        }

        // Ordering indicators, both perspectives.
        for (&k, &l) in [(&ka, &kb), (&kb, &ka)] {
            for i in 0..n {
                for j in 0..n {
                    let zp = self.model.reify_geq(
                        &format!("zp_p{p}_l{l}_j{j}_k{k}_i{i}"),
                        LinExpr::var(self.h_end(l, j)).push(-1.0, self.h_end(k, i)),
                        m_t,
                        EPS_STRICT,
                    )?;
                    idx.zplus.insert((l, j, k, i), zp);
                    let zm = self.model.reify_geq(
                        &format!("zm_p{p}_l{l}_j{j}_k{k}_i{i}"),
                        LinExpr::var(self.h_start(k, i)).push(-1.0, self.h_start(l, j)),
                        m_t,
                        EPS_STRICT,
                    )?;
                    idx.zminus.insert((l, j, k, i), zm);
                }
            }
        }

        // Aggregate z^spat(k, i): every temporally intersecting segment of
        // the other agent must pair-satisfy; the reverse bound makes the
        // conjunction exact.
        for (&k, &l) in [(&ka, &kb), (&kb, &ka)] {
            for i in 0..n {
                let zs = self.model.add_binary(&format!("zs_p{p}_k{k}_i{i}"))?;
                let mut vsum = LinExpr::var(zs);
                for j in 0..n {
                    let zt = idx.ztemp_of(k, i, l, j);
                    let zpair = idx.zpair_of(k, i, l, j);
                    // zs <= zpair + 1 - zt
                    self.model.add_constraint(
                        LinExpr::var(zs).push(-1.0, zpair).push(1.0, zt),
                        Sense::Le,
                        1.0,
                    )?;
                    let v = self.model.add_continuous(
                        &format!("vimp_p{p}_k{k}_i{i}_j{j}"),
                        0.0,
                        1.0,
                    )?;
                    // v >= zt - zpair
                    self.model.add_constraint(
                        LinExpr::var(v).push(-1.0, zt).push(1.0, zpair),
                        Sense::Ge,
                        0.0,
                    )?;
                    vsum = vsum.push(1.0, v);
                }
                // zs >= 1 - Σv
                self.model.add_constraint(vsum, Sense::Ge, 1.0)?;
                idx.zspat.insert((k, i), zs);
            }
        }
        Ok(())
    }

    /// θ^{0,l,±}(k, i): how far the other agent can shift before a
    /// non-satisfying segment of it reaches the time span of (k, i),
    /// capped at the horizon end in the shift direction.
    fn encode_theta0(
        &mut self,
        _pred: &Predicate,
        p: usize,
        agents: &[usize],
        idx: &mut PredIndex,
    ) -> Result<(), EncodeError> {
        let n = self.n();
        let m_t = self.m_time;
        for &k in agents {
            for &l in agents {
                if l == k {
                    continue;
                }
                for i in 0..n {
                    let tp = self.model.add_continuous(
                        &format!("th0p_p{p}_k{k}_i{i}_l{l}"),
                        -m_t,
                        self.horizon,
                    )?;
                    // Horizon cap: t_f - h(k,i)^(d).
                    self.model.add_constraint(
                        LinExpr::var(tp).push(1.0, self.h_end(k, i)),
                        Sense::Le,
                        self.sc.tf,
                    )?;
                    let tm = self.model.add_continuous(
                        &format!("th0m_p{p}_k{k}_i{i}_l{l}"),
                        -m_t,
                        self.horizon,
                    )?;
                    // Horizon cap: h(k,i)^(0) - t_0.
                    self.model.add_constraint(
                        LinExpr::var(tm).push(-1.0, self.h_start(k, i)),
                        Sense::Le,
                        -self.sc.t0,
                    )?;
                    for j in 0..n {
                        let zpair = idx.zpair_of(k, i, l, j);
                        let zp = idx.zplus[&(l, j, k, i)];
                        let zm = idx.zminus[&(l, j, k, i)];
                        // tp <= (h(l,j)^(0) - h(k,i)^(d)) + M z^spat + M (1 - z^+)
                        self.model.add_constraint(
                            LinExpr::var(tp)
                                .push(-1.0, self.h_start(l, j))
                                .push(1.0, self.h_end(k, i))
                                .push(-m_t, zpair)
                                .push(m_t, zp),
                            Sense::Le,
                            m_t,
                        )?;
                        // tm <= (h(k,i)^(0) - h(l,j)^(d)) + M z^spat + M (1 - z^-)
                        self.model.add_constraint(
                            LinExpr::var(tm)
                                .push(-1.0, self.h_start(k, i))
                                .push(1.0, self.h_end(l, j))
                                .push(-m_t, zpair)
                                .push(m_t, zm),
                            Sense::Le,
                            m_t,
                        )?;
                    }
                    idx.th0.insert((k, i, l, true), tp);
                    idx.th0.insert((k, i, l, false), tm);
                }
            }
        }
        Ok(())
    }

    /// Per-segment caps and self-shift duration chains.
    ///
    /// The cap of a segment is min(M_t z^spat, θ^{0,s}); a chain in
    /// direction `+` realizes θ = min(cap_i, min_m max(B(m-1), cap_{i+m}))
    /// via one selector binary per m, where B(m-1) is the shift at which
    /// segment i+m starts occupying the span of segment i. Beyond the last
    /// segment the cap is zero, which caps the chain at the remaining
    /// horizon.
    fn encode_caps_and_chains(
        &mut self,
        p: usize,
        agents: &[usize],
        mode: RobustnessMode,
        idx: &mut PredIndex,
    ) -> Result<(), EncodeError> {
        let n = self.n();
        let m_t = self.m_time;
        let m_g = self.m_gate;
        let n_others = agents.len() - 1;
        let masks = sign_masks(mode, n_others);

        for &k in agents {
            let others: Vec<usize> = agents.iter().copied().filter(|&l| l != k).collect();
            for &mask in &masks {
                let tag = mask_tag(mask, n_others);
                for i in 0..n {
                    let cap = self.model.add_continuous(
                        &format!("acap{tag}_p{p}_k{k}_i{i}"),
                        -m_t,
                        self.horizon,
                    )?;
                    let zs = idx.zspat[&(k, i)];
                    self.model.add_constraint(
                        LinExpr::var(cap).push(-m_g, zs),
                        Sense::Le,
                        0.0,
                    )?;
                    for (oi, &l) in others.iter().enumerate() {
                        let plus = mask & (1 << oi) != 0;
                        let th0 = idx.th0[&(k, i, l, plus)];
                        // cap <= θ^{0,l,s_l} + M (1 - z^spat)
                        self.model.add_constraint(
                            LinExpr::var(cap).push(-1.0, th0).push(m_g, zs),
                            Sense::Le,
                            m_g,
                        )?;
                    }
                    idx.acap.insert((k, i, mask), cap);
                }
            }
            for &dir_plus in &directions(mode) {
                for &mask in &masks {
                    let tag = mask_tag(mask, n_others);
                    let dtag = if dir_plus { "p" } else { "m" };
                    for i in 0..n {
                        let th = self.model.add_continuous(
                            &format!("thc{dtag}{tag}_p{p}_k{k}_i{i}"),
                            -m_t,
                            self.horizon,
                        )?;
                        // Own segment cap.
                        self.model.add_constraint(
                            LinExpr::var(th).push(-1.0, idx.acap[&(k, i, mask)]),
                            Sense::Le,
                            0.0,
                        )?;
                        // Remaining horizon in the shift direction (the
                        // virtual segment beyond the trajectory violates).
                        if dir_plus {
                            self.model.add_constraint(
                                LinExpr::var(th).push(1.0, self.h_end(k, i)),
                                Sense::Le,
                                self.sc.tf,
                            )?;
                        } else {
                            self.model.add_constraint(
                                LinExpr::var(th).push(-1.0, self.h_start(k, i)),
                                Sense::Le,
                                -self.sc.t0,
                            )?;
                        }
                        let reach = if dir_plus { n - 1 - i } else { i };
                        for m in 1..=reach {
                            let jm = if dir_plus { i + m } else { i - m };
                            // th <= B(m-1) + H z^spat(jm): a violating
                            // segment caps the chain at its entry shift,
                            // a satisfying one lifts this row past the
                            // horizon bound. Exact when the cap carries no
                            // other-agent budget (single-agent case).
                            let b_expr = if dir_plus {
                                LinExpr::var(th)
                                    .push(-1.0, self.h_start(k, jm))
                                    .push(1.0, self.h_end(k, i))
                            } else {
                                LinExpr::var(th)
                                    .push(-1.0, self.h_start(k, i))
                                    .push(1.0, self.h_end(k, jm))
                            };
                            self.model.add_constraint(
                                b_expr.clone().push(-self.horizon, idx.zspat[&(k, jm)]),
                                Sense::Le,
                                0.0,
                            )?;
                            if n_others > 0 {
                                // th <= max(B(m-1), cap(jm)) via a selector:
                                // the other-agent budget can undercut the
                                // satisfying branch.
                                let w = self.model.add_binary(&format!(
                                    "w{dtag}{tag}_p{p}_k{k}_i{i}_m{m}"
                                ))?;
                                self.model
                                    .add_constraint(b_expr.push(-m_g, w), Sense::Le, 0.0)?;
                                self.model.add_constraint(
                                    LinExpr::var(th)
                                        .push(-1.0, idx.acap[&(k, jm, mask)])
                                        .push(m_g, w),
                                    Sense::Le,
                                    m_g,
                                )?;
                            }
                        }
                        idx.chain.insert((k, i, dir_plus, mask), th);
                    }
                }
            }
        }
        Ok(())
    }

    /// θ_p(k, i): minimum over the mode's (direction, sign) combinations.
    fn encode_theta_pred(
        &mut self,
        p: usize,
        agents: &[usize],
        mode: RobustnessMode,
        idx: &mut PredIndex,
    ) -> Result<(), EncodeError> {
        let n = self.n();
        let m_g = self.m_gate;
        let n_others = agents.len() - 1;
        for &k in agents {
            for i in 0..n {
                let th = self
                    .model
                    .add_continuous(&format!("thp_p{p}_k{k}_i{i}"), 0.0, self.horizon)?;
                self.model.add_constraint(
                    LinExpr::var(th).push(-m_g, idx.zspat[&(k, i)]),
                    Sense::Le,
                    0.0,
                )?;
                for &dir_plus in &directions(mode) {
                    for &mask in &sign_masks(mode, n_others) {
                        let chain = idx.chain[&(k, i, dir_plus, mask)];
                        // th <= chain + M (1 - z^spat): keeps the model
                        // feasible when the segment itself violates (the
                        // z^spat bound above already pins th to 0 there).
                        self.model.add_constraint(
                            LinExpr::var(th)
                                .push(-1.0, chain)
                                .push(m_g, idx.zspat[&(k, i)]),
                            Sense::Le,
                            m_g,
                        )?;
                    }
                }
                idx.theta_p.insert((k, i), th);
            }
        }
        Ok(())
    }

    // ---- operators ------------------------------------------------------

    fn encode_operators(
        &mut self,
        formula: &Formula,
        leaf_counter: &mut usize,
    ) -> Result<VarId, EncodeError> {
        match formula {
            Formula::Pred(_) => {
                let p = *leaf_counter;
                *leaf_counter += 1;
                let iv = Interval::new(self.sc.t0.max(0.0), self.sc.t0.max(0.0))
                    .expect("degenerate interval");
                self.encode_temporal(p, iv, true)
            }
            Formula::Always(iv, _) => {
                let p = *leaf_counter;
                *leaf_counter += 1;
                self.encode_temporal(p, *iv, true)
            }
            Formula::Eventually(iv, _) => {
                let p = *leaf_counter;
                *leaf_counter += 1;
                self.encode_temporal(p, *iv, false)
            }
            Formula::And(a, b) => {
                let ta = self.encode_operators(a, leaf_counter)?;
                let tb = self.encode_operators(b, leaf_counter)?;
                let node = self.node_counter;
                self.node_counter += 1;
                let th = self
                    .model
                    .add_continuous(&format!("th_and{node}"), 0.0, self.horizon)?;
                self.model
                    .add_constraint(LinExpr::var(th).push(-1.0, ta), Sense::Le, 0.0)?;
                self.model
                    .add_constraint(LinExpr::var(th).push(-1.0, tb), Sense::Le, 0.0)?;
                Ok(th)
            }
            Formula::Or(a, b) => {
                let ta = self.encode_operators(a, leaf_counter)?;
                let tb = self.encode_operators(b, leaf_counter)?;
                let node = self.node_counter;
                self.node_counter += 1;
                let th = self
                    .model
                    .add_continuous(&format!("th_or{node}"), 0.0, self.horizon)?;
                let sa = self.model.add_binary(&format!("sel_or{node}_a"))?;
                let sb = self.model.add_binary(&format!("sel_or{node}_b"))?;
                self.model.add_constraint(
                    LinExpr::var(sa).push(1.0, sb),
                    Sense::Ge,
                    1.0,
                )?;
                let m_g = self.m_gate;
                self.model.add_constraint(
                    LinExpr::var(th).push(-1.0, ta).push(m_g, sa),
                    Sense::Le,
                    m_g,
                )?;
                self.model.add_constraint(
                    LinExpr::var(th).push(-1.0, tb).push(m_g, sb),
                    Sense::Le,
                    m_g,
                )?;
                Ok(th)
            }
        }
    }

    /// Temporal operator over predicate occurrence `p`.
    ///
    /// Overlap indicators gate which segments participate. On top of the
    /// per-segment chains, the operator credits the part of the segment
    /// span that extends past the interval edge in the shift direction
    /// (for Always) or past a selectable anchor time inside the interval
    /// (for Eventually); without that credit a covering segment whose
    /// span overshoots the window would be scored as if the predicate had
    /// to persist beyond the segment end as well.
    fn encode_temporal(
        &mut self,
        p: usize,
        iv: Interval,
        always: bool,
    ) -> Result<VarId, EncodeError> {
        let n = self.n();
        let m_t = self.m_time;
        let m_g = self.m_gate;
        let bins_before = self.model.n_binaries();
        let cons_before = self.model.n_constraints();
        let mode = self.sc.robustness;
        let agents = self.preds[p].agents.clone();
        let n_others = agents.len() - 1;
        let node = self.node_counter;
        self.node_counter += 1;

        // Overlap binaries o(k, i) for the closed interval. Segment spans
        // tile the horizon, so at least one of them always overlaps.
        for &k in &agents {
            let mut cover = LinExpr::new();
            for i in 0..n {
                let za = self.model.reify_geq(
                    &format!("oa_p{p}_k{k}_i{i}"),
                    LinExpr::constant(iv.hi).push(-1.0, self.h_start(k, i)),
                    m_t,
                    EPS_STRICT,
                )?;
                let zb = self.model.reify_geq(
                    &format!("ob_p{p}_k{k}_i{i}"),
                    LinExpr::var(self.h_end(k, i)).plus_const(-iv.lo),
                    m_t,
                    EPS_STRICT,
                )?;
                let o = self
                    .model
                    .add_and(&format!("o_p{p}_k{k}_i{i}"), &[za, zb])?;
                self.preds[p].overlap.insert((k, i), o);
                cover = cover.push(1.0, o);
                if i > 0 {
                    // Spans are ordered, so "starts before sup I" only
                    // switches off and "ends after inf I" only switches on.
                    let prev_za = self.model.lookup(&format!("oa_p{p}_k{k}_i{}", i - 1)).unwrap();
                    let prev_zb = self.model.lookup(&format!("ob_p{p}_k{k}_i{}", i - 1)).unwrap();
                    self.model.add_constraint(
                        LinExpr::var(za).push(-1.0, prev_za),
                        Sense::Le,
                        0.0,
                    )?;
                    self.model.add_constraint(
                        LinExpr::var(zb).push(-1.0, prev_zb),
                        Sense::Ge,
                        0.0,
                    )?;
                }
            }
            self.model.add_constraint(cover, Sense::Ge, 1.0)?;
        }

        let th_op = self
            .model
            .add_continuous(&format!("th_tmp{node}"), 0.0, self.horizon)?;

        if always {
            for &k in &agents {
                for i in 0..n {
                    let o = self.preds[p].overlap[&(k, i)];
                    let zs = self.preds[p].zspat[&(k, i)];
                    // Kill: an overlapping segment must satisfy.
                    self.model.add_constraint(
                        LinExpr::var(th_op).push(-m_g, zs).push(m_g, o),
                        Sense::Le,
                        m_g,
                    )?;
                    for &dir_plus in &directions(mode) {
                        for &mask in &sign_masks(mode, n_others) {
                            let chain = self.preds[p].chain[&(k, i, dir_plus, mask)];
                            // th <= (span edge past the interval, in the
                            // shift direction) + chain + M(1-o). For a
                            // segment ending inside the interval the edge
                            // term is negative, but its chain runs through
                            // the later satisfying segments, so the bound
                            // evaluates to the same first-violation time.
                            let edge = if dir_plus {
                                // h(k,i)^(d) - sup I
                                LinExpr::var(th_op)
                                    .push(-1.0, self.h_end(k, i))
                                    .plus_const(iv.hi)
                            } else {
                                // inf I - h(k,i)^(0)
                                LinExpr::var(th_op)
                                    .push(1.0, self.h_start(k, i))
                                    .plus_const(-iv.lo)
                            };
                            self.model.add_constraint(
                                edge.push(-1.0, chain).push(m_g, o),
                                Sense::Le,
                                m_g,
                            )?;
                        }
                    }
                }
            }
        } else {
            // Eventually: per agent, select one overlapping satisfying
            // segment and credit persistence around an anchor time inside
            // both the interval and the segment span.
            let mut per_agent_vars = Vec::new();
            for &k in &agents {
                let thk = self
                    .model
                    .add_continuous(&format!("thk_tmp{node}_k{k}"), 0.0, self.horizon)?;
                let tstar = self
                    .model
                    .add_continuous(&format!("tstar_tmp{node}_k{k}"), iv.lo, iv.hi)?;
                let mut qsum = LinExpr::new();
                for i in 0..n {
                    let o = self.preds[p].overlap[&(k, i)];
                    let zs = self.preds[p].zspat[&(k, i)];
                    let q = self.model.add_binary(&format!("q_tmp{node}_k{k}_i{i}"))?;
                    qsum = qsum.push(1.0, q);
                    // Selected segments must overlap the interval...
                    self.model.add_constraint(
                        LinExpr::var(q).push(-1.0, o),
                        Sense::Le,
                        0.0,
                    )?;
                    // ... and satisfy the predicate.
                    self.model.add_constraint(
                        LinExpr::var(thk).push(-m_g, zs).push(m_g, q),
                        Sense::Le,
                        m_g,
                    )?;
                    // Anchor inside the selected segment's span:
                    // t* >= h_start - M(1-q) and t* <= h_end + M(1-q).
                    self.model.add_constraint(
                        LinExpr::var(tstar)
                            .push(-1.0, self.h_start(k, i))
                            .push(-m_g, q),
                        Sense::Ge,
                        -m_g,
                    )?;
                    self.model.add_constraint(
                        LinExpr::var(tstar)
                            .push(-1.0, self.h_end(k, i))
                            .push(m_g, q),
                        Sense::Le,
                        m_g,
                    )?;
                    for &dir_plus in &directions(mode) {
                        for &mask in &sign_masks(mode, n_others) {
                            let chain = self.preds[p].chain[&(k, i, dir_plus, mask)];
                            let edge = if dir_plus {
                                // h(k,i)^(d) - t*
                                LinExpr::var(thk)
                                    .push(-1.0, self.h_end(k, i))
                                    .push(1.0, tstar)
                            } else {
                                // t* - h(k,i)^(0)
                                LinExpr::var(thk)
                                    .push(1.0, self.h_start(k, i))
                                    .push(-1.0, tstar)
                            };
                            self.model.add_constraint(
                                edge.push(-1.0, chain).push(m_g, q),
                                Sense::Le,
                                m_g,
                            )?;
                        }
                    }
                }
                self.model.add_constraint(qsum, Sense::Eq, 1.0)?;
                per_agent_vars.push(thk);
            }
            for thk in per_agent_vars {
                self.model
                    .add_constraint(LinExpr::var(th_op).push(-1.0, thk), Sense::Le, 0.0)?;
            }
        }

        self.preds[p].theta_op = th_op;
        if let Some(stats) = self.per_pred_stats.get_mut(p) {
            stats.binaries += self.model.n_binaries() - bins_before;
            stats.constraints += self.model.n_constraints() - cons_before;
        }
        Ok(th_op)
    }
}

impl PredIndex {
    /// ztemp with either agent order.
    pub fn ztemp_of(&self, k: usize, i: usize, l: usize, j: usize) -> VarId {
        if k < l {
            self.ztemp[&(k, i, l, j)]
        } else {
            self.ztemp[&(l, j, k, i)]
        }
    }

    /// Pairwise z^spat with either agent order.
    pub fn zpair_of(&self, k: usize, i: usize, l: usize, j: usize) -> VarId {
        if k < l {
            self.zspat_pair[&(k, i, l, j)]
        } else {
            self.zspat_pair[&(l, j, k, i)]
        }
    }
}

/// Reads the trajectory out of an optimal solution, snapping shared join
/// control points exactly, and re-validates the plan against the scenario.
pub fn extract_plan(
    enc: &EncodedModel,
    sol: &MilpSolution,
    sc: &Scenario,
) -> Result<(MultiAgentPlan, f64, ModelStats), EncodeError> {
    if sol.status != SolveStatus::Optimal {
        return Err(EncodeError::NotOptimal(sol.status));
    }
    let (n, d, dim) = (sc.n_segments, sc.degree, sc.dim);
    let snap_tol = 1e-6;
    let mut agents = Vec::with_capacity(sc.n_agents());
    for k in 0..sc.n_agents() {
        let mut segments: Vec<Segment> = Vec::with_capacity(n);
        let mut prev_r_last: Option<Vec<f64>> = None;
        let mut prev_h_last: Option<f64> = None;
        for i in 0..n {
            let mut r_pts = Vec::with_capacity(d + 1);
            let mut h_pts = Vec::with_capacity(d + 1);
            for b in 0..=d {
                let coords: Vec<f64> = (0..dim)
                    .map(|c| sol.value(enc.index.r[k][i][b][c]))
                    .collect();
                r_pts.push(coords);
                h_pts.push(sol.value(enc.index.h[k][i][b]));
            }
            // Make joins exact: the solver meets the equality rows to
            // solver precision, extraction pins them bit-for-bit. The C1
            // rows equate control-point differences, so the second control
            // point is re-based on the previous segment's last difference.
            if let (Some(pr), Some(ph)) = (&prev_r_last, prev_h_last) {
                let prev_seg = segments.last().unwrap();
                let pr_cps = prev_seg.r().control_points();
                let ph_cps = prev_seg.h().control_points();
                for c in 0..dim {
                    if (r_pts[0][c] - pr[c]).abs() > snap_tol {
                        return Err(EncodeError::ExtractedPlanInvalid(format!(
                            "position join agent {k} segments {}..{i}",
                            i - 1
                        )));
                    }
                    r_pts[0][c] = pr[c];
                    let want = pr[c] + (pr_cps[d][c] - pr_cps[d - 1][c]);
                    if (r_pts[1][c] - want).abs() > snap_tol {
                        return Err(EncodeError::ExtractedPlanInvalid(format!(
                            "velocity join agent {k} segments {}..{i}",
                            i - 1
                        )));
                    }
                    r_pts[1][c] = want;
                }
                if (h_pts[0] - ph).abs() > snap_tol {
                    return Err(EncodeError::ExtractedPlanInvalid(format!(
                        "time join agent {k} segments {}..{i}",
                        i - 1
                    )));
                }
                h_pts[0] = ph;
                let want = ph + (ph_cps[d][0] - ph_cps[d - 1][0]);
                if (h_pts[1] - want).abs() > snap_tol {
                    return Err(EncodeError::ExtractedPlanInvalid(format!(
                        "time-rate join agent {k} segments {}..{i}",
                        i - 1
                    )));
                }
                h_pts[1] = want;
            }
            if i == 0 {
                if (h_pts[0] - sc.t0).abs() > snap_tol {
                    return Err(EncodeError::ExtractedPlanInvalid(format!(
                        "agent {k} start time {} vs t0 {}",
                        h_pts[0], sc.t0
                    )));
                }
                h_pts[0] = sc.t0;
            }
            if i == n - 1 {
                if (h_pts[d] - sc.tf).abs() > snap_tol {
                    return Err(EncodeError::ExtractedPlanInvalid(format!(
                        "agent {k} final time {} vs tf {}",
                        h_pts[d], sc.tf
                    )));
                }
                h_pts[d] = sc.tf;
            }
            // Clamp tiny backward time steps from solver noise.
            for b in 0..d {
                if h_pts[b + 1] < h_pts[b] {
                    if h_pts[b] - h_pts[b + 1] > snap_tol {
                        return Err(EncodeError::ExtractedPlanInvalid(format!(
                            "agent {k} segment {i}: time control points decrease"
                        )));
                    }
                    h_pts[b + 1] = h_pts[b];
                }
            }
            prev_r_last = Some(r_pts[d].clone());
            prev_h_last = Some(h_pts[d]);
            let r = BezierCurve::new(r_pts.into_iter().map(Point::from).collect())
                .map_err(TrajectoryError::from)?;
            let h = BezierCurve::new(h_pts.into_iter().map(|v| Point::from(vec![v])).collect())
                .map_err(TrajectoryError::from)?;
            segments.push(Segment::new(r, h)?);
        }
        agents.push(AgentTrajectory::new(k, segments)?);
    }
    let plan = MultiAgentPlan::new(agents, sc.t0, sc.tf)?;

    let vmin = sc.vmin_all();
    let vmax = sc.vmax_all();
    let ctx = sc.validation_context(&vmin, &vmax);
    let violations = trajectory::validate(&plan, &ctx);
    if !violations.is_empty() {
        return Err(EncodeError::ExtractedPlanInvalid(format!(
            "{} (+{} more)",
            violations[0].detail,
            violations.len() - 1
        )));
    }
    let theta = sol.objective.unwrap_or(0.0);
    Ok((plan, theta, enc.index.stats.clone()))
}
