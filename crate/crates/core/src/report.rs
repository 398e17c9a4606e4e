//! End-to-end pipelines and the serialized run report.

use std::time::Instant;

use serde::Serialize;

use crate::certificate::{certify_solutions, MultiplicityCertificate};
use crate::config::{ProblemConfig, Resolved};
use crate::envelope::Envelope;
use crate::error::Result;
use crate::hypotheses::{check_theorem, theorem_holds, HypothesisReport};
use crate::quadrature::{cone_constants_with_mode, ConeConstants};
use crate::solver::{find_fixed_points, seed_amplitudes, BvpSolution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_HYPOTHESIS: i32 = 1;
pub const EXIT_CERTIFICATE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timing {
    pub constants_s: f64,
    pub hypotheses_s: f64,
    pub solve_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub nodes: usize,
    pub seeds: Vec<f64>,
    pub unconverged_seeds: Vec<f64>,
    pub solutions: Vec<BvpSolution>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: ProblemConfig,
    pub constants: Option<ConeConstants>,
    pub hypotheses: Vec<HypothesisReport>,
    pub hypotheses_pass: Option<bool>,
    pub solve: Option<SolveSummary>,
    pub certificate: Option<MultiplicityCertificate>,
    pub timing: Timing,
    pub exit_code: i32,
}

impl RunReport {
    fn new(command: &str, config: &ProblemConfig) -> Self {
        Self {
            tool: "conebvp",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.clone(),
            constants: None,
            hypotheses: Vec::new(),
            hypotheses_pass: None,
            solve: None,
            certificate: None,
            timing: Timing::default(),
            exit_code: EXIT_OK,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize to JSON")
    }
}

fn constants(r: &Resolved) -> Result<ConeConstants> {
    cone_constants_with_mode(&r.envelope, r.constants_tol, r.mode)
}

/// Cone constants only.
pub fn run_constants(config: &ProblemConfig, r: &Resolved) -> Result<RunReport> {
    let start = Instant::now();
    let mut rep = RunReport::new("constants", config);
    rep.constants = Some(constants(r)?);
    rep.timing.constants_s = start.elapsed().as_secs_f64();
    rep.timing.total_s = rep.timing.constants_s;
    Ok(rep)
}

/// Constants plus every hypothesis of the selected theorem.
pub fn run_check(config: &ProblemConfig, r: &Resolved) -> Result<RunReport> {
    let start = Instant::now();
    let mut rep = RunReport::new("check", config);
    let c = constants(r)?;
    rep.timing.constants_s = start.elapsed().as_secs_f64();
    let t = Instant::now();
    rep.hypotheses = check_theorem(r.theorem, &r.nonlinearity, &c, r.thresholds, &r.check)?;
    rep.timing.hypotheses_s = t.elapsed().as_secs_f64();
    let ok = theorem_holds(r.theorem, &rep.hypotheses);
    rep.hypotheses_pass = Some(ok);
    rep.constants = Some(c);
    rep.exit_code = if ok { EXIT_OK } else { EXIT_HYPOTHESIS };
    rep.timing.total_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Seed amplitudes spanning a decade below the smallest threshold to a
/// decade above the largest.
pub fn seeds_for(r: &Resolved) -> Vec<f64> {
    let th = [r.thresholds.p, r.thresholds.q, r.thresholds.r];
    let vals: Vec<f64> = th.into_iter().flatten().collect();
    let (lo, hi) = if vals.is_empty() {
        (1e-2, 1e2)
    } else {
        (vals.iter().copied().fold(f64::INFINITY, f64::min) / 10.0, vals.iter().copied().fold(0.0, f64::max) * 10.0)
    };
    seed_amplitudes(lo, hi, r.solver.seeds)
}

/// Full pipeline: constants, hypotheses, fixed points and the certificate.
/// A failed certificate takes precedence over failed hypotheses in the exit code.
pub fn run_solve(config: &ProblemConfig, r: &Resolved) -> Result<RunReport> {
    let start = Instant::now();
    let mut rep = run_check(config, r)?;
    rep.command = "solve".into();
    let t = Instant::now();
    let seeds = seeds_for(r);
    let found = find_fixed_points(&r.envelope, &r.nonlinearity, &seeds, &r.solver);
    rep.timing.solve_s = t.elapsed().as_secs_f64();
    let cert = certify_solutions(&found.solutions, r.theorem, r.thresholds);
    if !cert.verdict.passed() {
        rep.exit_code = EXIT_CERTIFICATE;
    }
    rep.certificate = Some(cert);
    rep.solve = Some(SolveSummary {
        nodes: found.nodes,
        seeds,
        unconverged_seeds: found.unconverged_seeds,
        solutions: found.solutions,
    });
    rep.timing.total_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Rows `(t, s, ũ(t,s), k1(t), k2(t))` on an inclusive `grid × grid` lattice.
pub fn envelope_table(env: &Envelope, grid: usize) -> Vec<[f64; 5]> {
    let p = env.problem();
    let grid = grid.max(2);
    let at = |i: usize| p.a + (p.b - p.a) * i as f64 / (grid - 1) as f64;
    let kernel = env.kernel();
    let mut rows = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        let t = at(i);
        let (k1, k2) = (env.k1(t), env.k2(t));
        for j in 0..grid {
            let s = at(j);
            rows.push([t, s, kernel.normalized_unchecked(t, s), k1, k2]);
        }
    }
    rows
}
