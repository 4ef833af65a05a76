//! Full problem instance: agents, horizon, workspace geometry, regions,
//! specification text, and encoder tolerances. The JSON schema rejects
//! unknown fields so typos in benchmark configs surface immediately.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::ConvexPolygon;
use crate::monitor::RobustnessMode;
use crate::stl::{self, Formula, StlError};
use crate::trajectory::ValidationContext;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{field}: {msg}")]
    Invalid { field: String, msg: String },
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("scenario file: {0}")]
    Format(String),
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vf: Option<Vec<f64>>,
    pub vmin: Vec<f64>,
    pub vmax: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BigMOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<f64>,
}

fn default_eps_time() -> f64 {
    1e-3
}

fn default_eps_rob() -> f64 {
    1e-4
}

fn default_mode() -> RobustnessMode {
    RobustnessMode::Atr
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dim: usize,
    pub agents: Vec<AgentSpec>,
    pub t0: f64,
    pub tf: f64,
    pub n_segments: usize,
    pub degree: usize,
    pub workspace: ConvexPolygon,
    #[serde(default)]
    pub obstacles: Vec<ConvexPolygon>,
    #[serde(default)]
    pub regions: BTreeMap<String, ConvexPolygon>,
    pub spec: String,
    #[serde(default = "default_eps_time")]
    pub eps_time: f64,
    #[serde(default = "default_eps_rob")]
    pub eps_rob: f64,
    #[serde(default = "default_mode")]
    pub robustness: RobustnessMode,
    #[serde(default, skip_serializing_if = "is_default_big_m")]
    pub big_m: BigMOverrides,
}

fn is_default_big_m(m: &BigMOverrides) -> bool {
    m.time.is_none() && m.spatial.is_none()
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Format(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Parses the specification against this scenario's regions.
    pub fn formula(&self) -> Result<Formula, ScenarioError> {
        let f = stl::parse(&self.spec, &self.regions, self.dim, self.n_agents())?;
        for iv in f.intervals() {
            if iv.lo < self.t0 - 1e-9 || iv.hi > self.tf + 1e-9 {
                return Err(invalid(
                    "spec",
                    format!(
                        "interval [{}, {}] outside the horizon [{}, {}]",
                        iv.lo, iv.hi, self.t0, self.tf
                    ),
                ));
            }
        }
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.dim == 0 || self.dim > 2 {
            return Err(invalid("dim", "must be 1 or 2"));
        }
        if !(self.t0 < self.tf) {
            return Err(invalid("t0/tf", format!("need t0 < tf, got [{}, {}]", self.t0, self.tf)));
        }
        if self.n_segments < 1 {
            return Err(invalid("n_segments", "must be at least 1"));
        }
        if self.degree < 2 {
            return Err(invalid("degree", "must be at least 2"));
        }
        if self.eps_time <= 0.0 {
            return Err(invalid("eps_time", "must be positive"));
        }
        if self.eps_rob <= 0.0 {
            return Err(invalid("eps_rob", "must be positive"));
        }
        if self.workspace.dim() != self.dim {
            return Err(invalid("workspace", "dimension mismatch with dim"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.dim() != self.dim {
                return Err(invalid(format!("obstacles[{i}]"), "dimension mismatch"));
            }
        }
        for (name, r) in &self.regions {
            if r.dim() != self.dim {
                return Err(invalid(format!("regions.{name}"), "dimension mismatch"));
            }
        }
        if self.agents.is_empty() {
            return Err(invalid("agents", "need at least one agent"));
        }
        for (k, a) in self.agents.iter().enumerate() {
            let field = |f: &str| format!("agents[{k}].{f}");
            for (name, v) in [
                ("x0", &a.x0),
                ("v0", &a.v0),
                ("vmin", &a.vmin),
                ("vmax", &a.vmax),
            ] {
                if v.len() != self.dim {
                    return Err(invalid(field(name), "dimension mismatch"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(field(name), "non-finite entry"));
                }
            }
            if let Some(xf) = &a.xf {
                if xf.len() != self.dim {
                    return Err(invalid(field("xf"), "dimension mismatch"));
                }
            }
            if let Some(vf) = &a.vf {
                if vf.len() != self.dim {
                    return Err(invalid(field("vf"), "dimension mismatch"));
                }
            }
            for c in 0..self.dim {
                if !(a.vmin[c] < a.vmax[c]) {
                    return Err(invalid(
                        field("vmin/vmax"),
                        format!("need vmin < vmax componentwise, got {} >= {}", a.vmin[c], a.vmax[c]),
                    ));
                }
            }
            let x0 = crate::geometry::Point::from(a.x0.clone());
            match self.workspace.contains(&x0) {
                Ok(true) => {}
                _ => return Err(invalid(field("x0"), "outside the workspace")),
            }
            if let Some(xf) = &a.xf {
                let p = crate::geometry::Point::from(xf.clone());
                match self.workspace.contains(&p) {
                    Ok(true) => {}
                    _ => return Err(invalid(field("xf"), "outside the workspace")),
                }
            }
        }
        if let Some(m) = self.big_m.time {
            if m <= 0.0 {
                return Err(invalid("big_m.time", "must be positive"));
            }
        }
        if let Some(m) = self.big_m.spatial {
            if m <= 0.0 {
                return Err(invalid("big_m.spatial", "must be positive"));
            }
        }
        // The spec text must parse (also checks intervals against horizon).
        self.formula()?;
        Ok(())
    }

    /// View used by plan validation.
    pub fn validation_context<'a>(
        &'a self,
        vmin: &'a [Vec<f64>],
        vmax: &'a [Vec<f64>],
    ) -> ValidationContext<'a> {
        ValidationContext {
            t0: self.t0,
            tf: self.tf,
            eps_time: self.eps_time,
            vmin,
            vmax,
            workspace: &self.workspace,
            obstacles: &self.obstacles,
        }
    }

    pub fn vmin_all(&self) -> Vec<Vec<f64>> {
        self.agents.iter().map(|a| a.vmin.clone()).collect()
    }

    pub fn vmax_all(&self) -> Vec<Vec<f64>> {
        self.agents.iter().map(|a| a.vmax.clone()).collect()
    }

    /// Big-M for time quantities; default twice the horizon length.
    pub fn m_time(&self) -> f64 {
        self.big_m.time.unwrap_or(2.0 * (self.tf - self.t0))
    }
}
