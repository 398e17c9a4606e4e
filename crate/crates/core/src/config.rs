//! Problem configuration files (TOML, or JSON with the same layout).
//!
//! Scalars may be written as numbers or as constant expressions such as
//! `"-2*pi"` or `"1/28"`; the original text is kept so that a configuration
//! echoed into a report re-parses to the same problem.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{envelope_for, Envelope};
use crate::expr::Expr;
use crate::hypotheses::{CheckOptions, TheoremId, Thresholds};
use crate::kernels::ProblemId;
use crate::nonlinearity::{Branch, Nonlinearity};
use crate::quadrature::ConstantsMode;
use crate::solver::SolverOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{format} syntax error{}: {message}", location(*.line, *.column))]
    Syntax {
        format: &'static str,
        message: String,
        line: Option<usize>,
        column: Option<usize>,
    },
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        (Some(l), None) => format!(" at line {l}"),
        _ => String::new(),
    }
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Field { field: field.into(), message: message.to_string() }
    }
}

/// A number, or a constant expression kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn value(&self, field: &str) -> Result<f64, ConfigError> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                _ => Expr::constant(s).map_err(|e| ConfigError::field(field, e)),
            },
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Number(v)
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// Order of the differential operator, 2 or 4.
    pub n: u32,
    pub k: u32,
    /// Drift coefficient of `u'' + B u'`; second order only.
    #[serde(rename = "B", alias = "b", default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Scalar>,
    /// Override of the default interval `I1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i1: Option<[Scalar; 2]>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    /// Right end of the branch's `u`-range; omitted (or `"inf"`) for the last branch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upto: Option<Scalar>,
    #[serde(default = "yes")]
    pub inclusive: bool,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    pub branches: Vec<BranchSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub theorem: TheoremId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Scalar>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub nodes: usize,
    pub tol: f64,
    pub seeds: usize,
    pub mesh_check: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { nodes: d.nodes, tol: d.tol, seeds: d.seeds, mesh_check: d.mesh_check }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    /// Use the tabulated lower bounds for the transcendental constants.
    pub conservative: bool,
    pub thm5_iii_relaxed: bool,
    pub grid: usize,
    /// Relative tolerance for the constant integrals.
    pub tol: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { conservative: false, thm5_iii_relaxed: false, grid: CheckOptions::default().grid, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub problem: ProblemSection,
    pub nonlinearity: NonlinearitySection,
    pub thresholds: ThresholdSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub check: CheckSection,
}

/// Everything a pipeline needs, with expressions evaluated and validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub problem: ProblemId,
    pub envelope: Envelope,
    pub nonlinearity: Nonlinearity,
    pub theorem: TheoremId,
    pub thresholds: Thresholds,
    pub solver: SolverOptions,
    pub check: CheckOptions,
    pub mode: ConstantsMode,
    pub constants_tol: f64,
}

fn syntax_from_toml(e: toml::de::Error, text: &str) -> ConfigError {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (Some(line), Some(column))
        }
        None => (None, None),
    };
    ConfigError::Syntax { format: "TOML", message: e.message().to_string(), line, column }
}

impl ProblemConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
                format: "JSON",
                message: e.to_string(),
                line: Some(e.line()),
                column: Some(e.column()),
            })
        } else {
            toml::from_str(text).map_err(|e| syntax_from_toml(e, text))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configurations serialize to TOML")
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let p = &self.problem;
        let problem = match p.n {
            2 => {
                let drift = match &p.drift {
                    Some(s) => s.value("problem.B")?,
                    None => 0.0,
                };
                ProblemId { k: p.k, ..ProblemId::second_order(drift) }
            }
            4 => {
                if p.drift.is_some() {
                    return Err(ConfigError::field("problem.B", "a drift is only defined for n = 2"));
                }
                ProblemId { k: p.k, ..ProblemId::fourth_order() }
            }
            n => return Err(ConfigError::field("problem.n", format!("unsupported order {n}; expected 2 or 4"))),
        };
        problem.validate().map_err(|e| ConfigError::field("problem.k", e))?;
        let mut envelope = envelope_for(problem).map_err(|e| ConfigError::field("problem", e))?;
        if let Some([a, b]) = &p.i1 {
            let (a1, b1) = (a.value("problem.i1[0]")?, b.value("problem.i1[1]")?);
            envelope = envelope.with_i1(a1, b1).map_err(|e| ConfigError::field("problem.i1", e))?;
        }

        let count = self.nonlinearity.branches.len();
        let mut branches = Vec::with_capacity(count);
        for (i, b) in self.nonlinearity.branches.iter().enumerate() {
            let at = |name: &str| format!("nonlinearity.branches[{i}].{name}");
            let upto = match &b.upto {
                Some(s) => s.value(&at("upto"))?,
                None if i + 1 == count => f64::INFINITY,
                None => return Err(ConfigError::field(at("upto"), "required on every branch but the last")),
            };
            let expr = Expr::parse(&b.expr).map_err(|e| ConfigError::field(at("expr"), e))?;
            branches.push(Branch { upto, inclusive: b.inclusive, expr });
        }
        let nonlinearity =
            Nonlinearity::new(branches, (problem.a, problem.b)).map_err(|e| ConfigError::field("nonlinearity", e))?;

        let th = &self.thresholds;
        let value = |s: &Option<Scalar>, name: &str| -> Result<Option<f64>, ConfigError> {
            let Some(s) = s else { return Ok(None) };
            let field = format!("thresholds.{name}");
            let v = s.value(&field)?;
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::field(field, format!("must be a positive number, got {v}")));
            }
            Ok(Some(v))
        };
        let thresholds = Thresholds { p: value(&th.p, "p")?, q: value(&th.q, "q")?, r: value(&th.r, "r")? };
        let required: &[(&str, Option<f64>)] = match th.theorem {
            TheoremId::Thm2 => &[("p", thresholds.p), ("q", thresholds.q)],
            TheoremId::Thm3 => &[("p", thresholds.p)],
            TheoremId::Thm4 => &[("q", thresholds.q)],
            TheoremId::Thm5 | TheoremId::Thm6 => &[("p", thresholds.p), ("q", thresholds.q), ("r", thresholds.r)],
            TheoremId::Cor24 => &[],
        };
        for (name, v) in required {
            if v.is_none() {
                return Err(ConfigError::field(format!("thresholds.{name}"), format!("required by {}", th.theorem)));
            }
        }

        let s = &self.solver;
        if s.nodes < 32 {
            return Err(ConfigError::field("solver.nodes", format!("must be at least 32, got {}", s.nodes)));
        }
        if !(1e-12..=1e-6).contains(&s.tol) {
            return Err(ConfigError::field("solver.tol", format!("must lie in [1e-12, 1e-6], got {}", s.tol)));
        }
        if s.seeds == 0 {
            return Err(ConfigError::field("solver.seeds", "must be positive"));
        }
        let c = &self.check;
        if c.grid < 8 {
            return Err(ConfigError::field("check.grid", format!("must be at least 8, got {}", c.grid)));
        }
        if !(1e-14..=1e-6).contains(&c.tol) {
            return Err(ConfigError::field("check.tol", format!("must lie in [1e-14, 1e-6], got {}", c.tol)));
        }

        Ok(Resolved {
            problem,
            envelope,
            nonlinearity,
            theorem: th.theorem,
            thresholds,
            solver: SolverOptions { nodes: s.nodes, tol: s.tol, seeds: s.seeds, mesh_check: s.mesh_check },
            check: CheckOptions { grid: c.grid, thm5_iii_relaxed: c.thm5_iii_relaxed },
            mode: if c.conservative { ConstantsMode::Conservative } else { ConstantsMode::Computed },
            constants_tol: c.tol,
        })
    }
}
