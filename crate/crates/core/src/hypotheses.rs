//! Grid-certified checks of the hypothesis systems on concrete nonlinearities.
//!
//! Every rectangle condition is sampled on a dense grid (split at the branch
//! boundaries of `f`) and the worst grid point is refined by coordinate-wise
//! golden-section search. Comparisons allow a roundoff slack of
//! `1e-12·max(1, |bound|)`.
//!
//! Strict inequality required on a whole rectangle is accepted either when
//! the margin is positive everywhere or, failing that, when the non-strict
//! inequality holds and the row-wise minimum margin has positive
//! `Φ`-weighted integral over `t`. The second form is what the norm estimates
//! consume, and it admits nonlinearities that touch the bound at an isolated
//! corner.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::phi_unchecked;
use crate::nonlinearity::Nonlinearity;
use crate::numeric::{golden_min, grid_min};
use crate::quadrature::ConeConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HypothesisId {
    H1,
    H2,
    #[serde(rename = "H1*")]
    H1Star,
    #[serde(rename = "H2*")]
    H2Star,
    H3,
    H4,
    #[serde(rename = "Thm3.f0-")]
    Thm3F0,
    #[serde(rename = "Thm3.finf-")]
    Thm3FInf,
    #[serde(rename = "Thm4.f0+")]
    Thm4F0,
    #[serde(rename = "Thm4.finf+")]
    Thm4FInf,
    #[serde(rename = "Thm5.i")]
    Thm5I,
    #[serde(rename = "Thm5.ii")]
    Thm5II,
    #[serde(rename = "Thm5.iii")]
    Thm5III,
    #[serde(rename = "Thm6.a")]
    Thm6A,
    #[serde(rename = "Thm6.b")]
    Thm6B,
    #[serde(rename = "Thm6.c")]
    Thm6C,
}

impl fmt::Display for HypothesisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("enum serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremId {
    Thm2,
    Thm3,
    Thm4,
    Thm5,
    Thm6,
    Cor24,
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("enum serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Thresholds {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrictBasis {
    Everywhere,
    Integrated,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictnessAudit {
    /// The `u` value at which strictness is demanded; `None` for the whole rectangle.
    pub at_u: Option<f64>,
    /// Minimum margin along `u = at_u` (or over the rectangle).
    #[serde(with = "crate::float_serde")]
    pub margin: f64,
    /// `Φ`-weighted mean of the row-wise minimum margin, rectangle audits only.
    pub integrated_margin: Option<f64>,
    pub basis: StrictBasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub id: HypothesisId,
    pub thresholds: Thresholds,
    pub t_range: (f64, f64),
    pub u_range: (f64, f64),
    /// Human-readable form of the inequality that was checked.
    pub condition: String,
    pub verdict: Verdict,
    /// Worst-case signed margin; negative means the inequality is violated.
    #[serde(with = "crate::float_serde")]
    pub margin: f64,
    /// `(t, u)` attaining the worst margin.
    pub witness: (f64, f64),
    pub tolerance: f64,
    pub strictness: Option<StrictnessAudit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Sample points per axis per branch segment.
    pub grid: usize,
    /// Demand Theorem 5 (iii) strictly only at `u = p` instead of on the whole rectangle.
    pub thm5_iii_relaxed: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { grid: 512, thm5_iii_relaxed: false }
    }
}

#[derive(Debug, Clone, Copy)]
enum Bound {
    /// `f ≤ C`
    AtMost(f64),
    /// `f ≥ c·u`
    AtLeastLinear(f64),
}

impl Bound {
    fn margin(self, f: f64, u: f64) -> f64 {
        match self {
            Bound::AtMost(c) => c - f,
            Bound::AtLeastLinear(c) => f - c * u,
        }
    }

    fn describe(self) -> String {
        match self {
            Bound::AtMost(c) => format!("f(t,u) <= {c}"),
            Bound::AtLeastLinear(c) => format!("f(t,u) >= {c} u"),
        }
    }

    fn scale(self, u_hi: f64) -> f64 {
        match self {
            Bound::AtMost(c) => c.abs().max(1.0),
            Bound::AtLeastLinear(c) => (c * u_hi).abs().max(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Strictness {
    None,
    AtU(f64),
    Rectangle,
}

struct Scan {
    min: f64,
    witness: (f64, f64),
    rows: Vec<(f64, f64)>,
}

const REFINE_TOL: f64 = 1e-10;
const ROUNDOFF: f64 = 1e-12;

fn scan(f: &Nonlinearity, bound: Bound, t_range: (f64, f64), u_range: (f64, f64), grid: usize) -> Scan {
    let grid = grid.max(8);
    let segments = f.segments(u_range.0, u_range.1);
    let t_at = |i: usize| t_range.0 + (t_range.1 - t_range.0) * i as f64 / (grid - 1) as f64;
    let rows: Vec<(f64, f64, f64)> = (0..grid)
        .into_par_iter()
        .map(|i| {
            let t = t_at(i);
            let mut best = (f64::INFINITY, u_range.0);
            for &(lo, hi) in &segments {
                for j in 0..grid {
                    let u = if j + 1 == grid { hi } else { lo + (hi - lo) * j as f64 / (grid - 1) as f64 };
                    let m = bound.margin(f.eval(t, u), u);
                    if m < best.0 {
                        best = (m, u);
                    }
                }
            }
            (t, best.0, best.1)
        })
        .collect();
    let worst = rows.iter().fold((f64::INFINITY, t_range.0, u_range.0), |acc, r| if r.1 < acc.0 { (r.1, r.0, r.2) } else { acc });

    // Coordinate-wise golden refinement inside the cells around the worst point.
    let (mut m, mut t, mut u) = worst;
    let dt = (t_range.1 - t_range.0) / (grid - 1) as f64;
    let &(seg_lo, seg_hi) = segments.iter().find(|s| u >= s.0 && u <= s.1).unwrap_or(&segments[0]);
    let du = (seg_hi - seg_lo) / (grid - 1) as f64;
    for _ in 0..4 {
        let (lo, hi) = ((t - dt).max(t_range.0), (t + dt).min(t_range.1));
        let (tt, mt) = golden_min(|x| bound.margin(f.eval(x, u), u), lo, hi, REFINE_TOL);
        if mt < m {
            m = mt;
            t = tt;
        }
        let (lo, hi) = ((u - du).max(seg_lo), (u + du).min(seg_hi));
        let (uu, mu) = golden_min(|x| bound.margin(f.eval(t, x), x), lo, hi, REFINE_TOL);
        if mu < m {
            m = mu;
            u = uu;
        }
    }
    Scan { min: m, witness: (t, u), rows: rows.into_iter().map(|r| (r.0, r.1)).collect() }
}

fn pointwise(f: &Nonlinearity, bound: Bound, t_range: (f64, f64), u: f64, grid: usize) -> (f64, f64) {
    grid_min(|t| bound.margin(f.eval(t, u), u), t_range.0, t_range.1, 8 * grid.max(8), REFINE_TOL)
}

fn phi_weighted_mean(c: &ConeConstants, rows: &[(f64, f64)]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for w in rows.windows(2) {
        let (t0, m0) = w[0];
        let (t1, m1) = w[1];
        let (p0, p1) = (phi_unchecked(&c.problem, t0), phi_unchecked(&c.problem, t1));
        num += 0.5 * (t1 - t0) * (p0 * m0 + p1 * m1);
        den += 0.5 * (t1 - t0) * (p0 + p1);
    }
    if den > 0.0 {
        num / den
    } else {
        rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min)
    }
}

#[allow(clippy::too_many_arguments)]
fn rect_check(
    id: HypothesisId,
    f: &Nonlinearity,
    c: &ConeConstants,
    thresholds: Thresholds,
    bound: Bound,
    t_range: (f64, f64),
    u_range: (f64, f64),
    strict: Strictness,
    opts: &CheckOptions,
) -> HypothesisReport {
    let s = scan(f, bound, t_range, u_range, opts.grid);
    let tol = ROUNDOFF * bound.scale(u_range.1);
    let weak_ok = s.min >= -tol;
    let (pass, strictness) = match strict {
        Strictness::None => (weak_ok, None),
        Strictness::AtU(u) => {
            let (_, m) = pointwise(f, bound, t_range, u, opts.grid);
            let basis = if m > tol { StrictBasis::Everywhere } else { StrictBasis::Violated };
            let audit = StrictnessAudit { at_u: Some(u), margin: m, integrated_margin: None, basis };
            (weak_ok && m > tol, Some(audit))
        }
        Strictness::Rectangle => {
            let integrated = phi_weighted_mean(c, &s.rows);
            let basis = if s.min > tol {
                StrictBasis::Everywhere
            } else if weak_ok && integrated > tol {
                StrictBasis::Integrated
            } else {
                StrictBasis::Violated
            };
            let audit = StrictnessAudit { at_u: None, margin: s.min, integrated_margin: Some(integrated), basis };
            (basis != StrictBasis::Violated, Some(audit))
        }
    };
    let relation = match strict {
        Strictness::None => bound.describe(),
        Strictness::AtU(u) => format!("{}, strict at u = {u}", bound.describe()),
        Strictness::Rectangle => format!("{}, strict", bound.describe()),
    };
    HypothesisReport {
        id,
        thresholds,
        t_range,
        u_range,
        condition: relation,
        verdict: Verdict::from_bool(pass),
        margin: s.min,
        witness: s.witness,
        tolerance: tol,
        strictness,
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidThreshold { name, value })
    }
}

fn whole(c: &ConeConstants) -> (f64, f64) {
    (c.problem.a, c.problem.b)
}

/// (H1): `f ≤ cH1·p` on `I × [0, p]`.
pub fn check_h1(f: &Nonlinearity, c: &ConeConstants, p: f64, opts: &CheckOptions) -> Result<HypothesisReport> {
    let p = positive("p", p)?;
    let th = Thresholds { p: Some(p), ..Default::default() };
    Ok(rect_check(HypothesisId::H1, f, c, th, Bound::AtMost(c.c_h1 * p), whole(c), (0.0, p), Strictness::None, opts))
}

/// (H1*): (H1) with strict inequality at `u = p`.
pub fn check_h1_star(f: &Nonlinearity, c: &ConeConstants, p: f64, opts: &CheckOptions) -> Result<HypothesisReport> {
    let p = positive("p", p)?;
    let th = Thresholds { p: Some(p), ..Default::default() };
    Ok(rect_check(HypothesisId::H1Star, f, c, th, Bound::AtMost(c.c_h1 * p), whole(c), (0.0, p), Strictness::AtU(p), opts))
}

/// (H2): `f ≥ cH2·u` on `I1 × [(m1/K2) q, q]`.
pub fn check_h2(f: &Nonlinearity, c: &ConeConstants, q: f64, opts: &CheckOptions) -> Result<HypothesisReport> {
    let q = positive("q", q)?;
    let th = Thresholds { q: Some(q), ..Default::default() };
    let u = (q / c.ratio, q);
    Ok(rect_check(HypothesisId::H2, f, c, th, Bound::AtLeastLinear(c.c_h2), c.i1, u, Strictness::None, opts))
}

/// (H2*): (H2) with strict inequality at `u = q`.
pub fn check_h2_star(f: &Nonlinearity, c: &ConeConstants, q: f64, opts: &CheckOptions) -> Result<HypothesisReport> {
    let q = positive("q", q)?;
    let th = Thresholds { q: Some(q), ..Default::default() };
    let u = (q / c.ratio, q);
    Ok(rect_check(HypothesisId::H2Star, f, c, th, Bound::AtLeastLinear(c.c_h2), c.i1, u, Strictness::AtU(q), opts))
}

/// Conditions (i)–(iii) of the two-solution theorem.
pub fn check_thm5(f: &Nonlinearity, c: &ConeConstants, p: f64, q: f64, r: f64, opts: &CheckOptions) -> Result<Vec<HypothesisReport>> {
    let (p, q, r) = (positive("p", p)?, positive("q", q)?, positive("r", r)?);
    if !(p < q && q < r) {
        return Err(Error::ThresholdOrdering(format!("need 0 < p < q < r, got p = {p}, q = {q}, r = {r}")));
    }
    let th = Thresholds { p: Some(p), q: Some(q), r: Some(r) };
    let iii_strict = if opts.thm5_iii_relaxed { Strictness::AtU(p) } else { Strictness::Rectangle };
    Ok(vec![
        rect_check(HypothesisId::Thm5I, f, c, th, Bound::AtLeastLinear(c.c_thm5i), c.i1, (r, c.ratio * r), Strictness::AtU(r), opts),
        rect_check(HypothesisId::Thm5II, f, c, th, Bound::AtMost(c.c_h1 * q), whole(c), (0.0, c.ratio * q), Strictness::AtU(q), opts),
        rect_check(HypothesisId::Thm5III, f, c, th, Bound::AtLeastLinear(c.c_h2), c.i1, (p / c.ratio, p), iii_strict, opts),
    ])
}

/// Conditions (a)–(c) of the three-solution theorem.
pub fn check_thm6(f: &Nonlinearity, c: &ConeConstants, p: f64, q: f64, r: f64, opts: &CheckOptions) -> Result<Vec<HypothesisReport>> {
    let (p, q, r) = (positive("p", p)?, positive("q", q)?, positive("r", r)?);
    if !(p < q && c.ratio * q <= r * (1.0 + ROUNDOFF)) {
        return Err(Error::ThresholdOrdering(format!(
            "need 0 < p < q and (K2/m1) q <= r, got p = {p}, q = {q}, (K2/m1) q = {}, r = {r}",
            c.ratio * q
        )));
    }
    let th = Thresholds { p: Some(p), q: Some(q), r: Some(r) };
    Ok(vec![
        rect_check(HypothesisId::Thm6A, f, c, th, Bound::AtMost(c.c_h1 * r), whole(c), (0.0, r), Strictness::None, opts),
        rect_check(HypothesisId::Thm6B, f, c, th, Bound::AtMost(c.c_h1 * p), whole(c), (0.0, p), Strictness::Rectangle, opts),
        rect_check(HypothesisId::Thm6C, f, c, th, Bound::AtLeastLinear(c.c_thm5i), c.i1, (q, c.ratio * q), Strictness::AtU(q), opts),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Oscillating,
}

/// Numeric estimate of a `lim sup`/`lim inf` of `f(t,u)/u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    /// `inf` when diverging, `0` when vanishing, else the extreme of the probe tail.
    #[serde(with = "crate::float_serde")]
    pub value: f64,
    /// Last probed ratio.
    #[serde(with = "crate::float_serde")]
    pub last: f64,
    pub trend: Trend,
    pub diverges: bool,
    pub vanishes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSchedule {
    /// Probes `u = 2^{∓j}` for `j = 1..=steps`.
    pub steps: u32,
    /// Number of final probes the limit estimates are read from.
    pub tail: usize,
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        Self { steps: 40, tail: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRatios {
    pub t: Vec<f64>,
    /// `f0⁺(t) = lim sup_{u→0⁺} f/u`
    pub f0_sup: Vec<LimitEstimate>,
    /// `f0⁻(t) = lim inf_{u→0⁺} f/u`
    pub f0_inf: Vec<LimitEstimate>,
    /// `f∞⁺(t) = lim sup_{u→∞} f/u`
    pub finf_sup: Vec<LimitEstimate>,
    /// `f∞⁻(t) = lim inf_{u→∞} f/u`
    pub finf_inf: Vec<LimitEstimate>,
}

const DIVERGE: f64 = 1e8;
const VANISH: f64 = 1e-8;
// Consecutive probe ratios growing (or shrinking) by at least this factor
// along the whole tail indicate power-law growth (or decay).
const GEOMETRIC: f64 = 1.001;

fn estimate(seq: &[f64], tail: usize, sup: bool) -> LimitEstimate {
    let tail = &seq[seq.len().saturating_sub(tail.max(2))..];
    let last = *tail.last().expect("nonempty probe schedule");
    let extreme = if sup {
        tail.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        tail.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let rises = tail.windows(2).all(|w| w[1] >= w[0]);
    let falls = tail.windows(2).all(|w| w[1] <= w[0]);
    let flat = tail.windows(2).all(|w| (w[1] - w[0]).abs() <= 1e-12 * w[0].abs().max(1e-300));
    let trend = if flat {
        Trend::Constant
    } else if rises {
        Trend::Increasing
    } else if falls {
        Trend::Decreasing
    } else {
        Trend::Oscillating
    };
    let grows = tail.windows(2).all(|w| w[0] > 0.0 && w[1] >= GEOMETRIC * w[0]);
    let decays = tail.windows(2).all(|w| w[1] >= 0.0 && w[1] * GEOMETRIC <= w[0]);
    let diverges = extreme > DIVERGE || grows;
    let vanishes = !diverges && (extreme < VANISH || decays);
    let value = if diverges {
        f64::INFINITY
    } else if vanishes {
        0.0
    } else {
        extreme
    };
    LimitEstimate { value, last, trend, diverges, vanishes }
}

/// Estimates the four limit ratios of `f(t,u)/u` at each `t` sample.
pub fn limit_ratios(f: &Nonlinearity, t_samples: &[f64], schedule: ProbeSchedule) -> LimitRatios {
    let steps = schedule.steps.max(2) as i32;
    let ratios = |t: f64, sign: i32| -> Vec<f64> {
        (1..=steps)
            .map(|j| {
                let u = 2f64.powi(sign * j);
                f.eval(t, u) / u
            })
            .collect()
    };
    let mut out = LimitRatios { t: t_samples.to_vec(), f0_sup: vec![], f0_inf: vec![], finf_sup: vec![], finf_inf: vec![] };
    for &t in t_samples {
        let zero = ratios(t, -1);
        let inf = ratios(t, 1);
        out.f0_sup.push(estimate(&zero, schedule.tail, true));
        out.f0_inf.push(estimate(&zero, schedule.tail, false));
        out.finf_sup.push(estimate(&inf, schedule.tail, true));
        out.finf_inf.push(estimate(&inf, schedule.tail, false));
    }
    out
}

/// Default `t` samples for limit checks: 33 points on `I` plus 17 on `I1`.
pub fn limit_samples(c: &ConeConstants) -> Vec<f64> {
    let (a, b) = whole(c);
    let (a1, b1) = c.i1;
    let mut t: Vec<f64> = (0..=32).map(|i| a + (b - a) * i as f64 / 32.0).collect();
    t.extend((0..=16).map(|i| a1 + (b1 - a1) * i as f64 / 16.0));
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn limit_probe_u(sup_at_zero: bool, schedule_steps: u32) -> f64 {
    let j = schedule_steps as i32;
    if sup_at_zero {
        2f64.powi(-j)
    } else {
        2f64.powi(j)
    }
}

/// Largest value of `pick` over the samples (optionally restricted to `I1`).
fn extreme_over(
    limits: &LimitRatios,
    pick: impl Fn(usize) -> f64,
    restrict: Option<(f64, f64)>,
    want_max: bool,
) -> (f64, f64) {
    let mut best = (if want_max { f64::NEG_INFINITY } else { f64::INFINITY }, limits.t.first().copied().unwrap_or(0.0));
    for (i, &t) in limits.t.iter().enumerate() {
        if let Some((lo, hi)) = restrict {
            if t < lo || t > hi {
                continue;
            }
        }
        let v = pick(i);
        if (want_max && v > best.0) || (!want_max && v < best.0) {
            best = (v, t);
        }
    }
    best
}

fn limit_report(id: HypothesisId, c: &ConeConstants, margin: f64, witness: (f64, f64), condition: String, restrict_i1: bool) -> HypothesisReport {
    HypothesisReport {
        id,
        thresholds: Thresholds::default(),
        t_range: if restrict_i1 { c.i1 } else { whole(c) },
        u_range: (witness.1, witness.1),
        condition,
        verdict: Verdict::from_bool(margin > 0.0),
        margin,
        witness,
        tolerance: 0.0,
        strictness: None,
    }
}

/// (H3) and (H4) of the single-solution corollary, in that order.
pub fn check_corollary24(limits: &LimitRatios, c: &ConeConstants, schedule: ProbeSchedule) -> Vec<HypothesisReport> {
    let zero_u = limit_probe_u(true, schedule.steps);
    let inf_u = limit_probe_u(false, schedule.steps);
    let leg = |sup: &[LimitEstimate], inf: &[LimitEstimate], sup_u: f64, inf_u: f64| {
        let (hi, t_hi) = extreme_over(limits, |i| sup[i].value, None, true);
        let (lo, t_lo) = extreme_over(limits, |i| inf[i].value, Some(c.i1), false);
        let m_small = c.c_h1 - hi;
        let m_large = lo - c.c_limit;
        if m_small <= m_large {
            (m_small, (t_hi, sup_u))
        } else {
            (m_large, (t_lo, inf_u))
        }
    };
    let (m3, w3) = leg(&limits.f0_sup, &limits.finf_inf, zero_u, inf_u);
    let (m4, w4) = leg(&limits.finf_sup, &limits.f0_inf, inf_u, zero_u);
    vec![
        limit_report(HypothesisId::H3, c, m3, w3, format!("f0+ < {} on I and finf- > {} on I1", c.c_h1, c.c_limit), false),
        limit_report(HypothesisId::H4, c, m4, w4, format!("finf+ < {} on I and f0- > {} on I1", c.c_h1, c.c_limit), false),
    ]
}

fn divergence_leg(id: HypothesisId, limits: &LimitRatios, c: &ConeConstants, est: &[LimitEstimate], want_infinite: bool, u: f64) -> HypothesisReport {
    // Margin: +inf when every sample has the required limit, otherwise the
    // offending finite estimate (negated when a zero limit is required).
    let (worst, t) = if want_infinite {
        extreme_over(limits, |i| est[i].value, None, false)
    } else {
        extreme_over(limits, |i| est[i].value, None, true)
    };
    let ok = if want_infinite { worst == f64::INFINITY } else { worst == 0.0 };
    let margin = if ok {
        f64::INFINITY
    } else if want_infinite {
        -1.0 / worst.max(f64::MIN_POSITIVE)
    } else {
        -worst
    };
    let condition = if want_infinite { "limit of f/u is infinite on I" } else { "limit of f/u is zero on I" };
    let mut rep = limit_report(id, c, margin, (t, u), condition.into(), false);
    rep.verdict = Verdict::from_bool(ok);
    rep
}

/// Runs every condition of `theorem` and returns the individual reports.
pub fn check_theorem(
    theorem: TheoremId,
    f: &Nonlinearity,
    c: &ConeConstants,
    th: Thresholds,
    opts: &CheckOptions,
) -> Result<Vec<HypothesisReport>> {
    let need = |name: &'static str, v: Option<f64>| v.ok_or(Error::InvalidThreshold { name, value: f64::NAN });
    let schedule = ProbeSchedule::default();
    match theorem {
        TheoremId::Thm2 => {
            let (p, q) = (need("p", th.p)?, need("q", th.q)?);
            if p == q {
                return Err(Error::ThresholdOrdering(format!("need p != q, got p = q = {p}")));
            }
            Ok(vec![check_h1(f, c, p, opts)?, check_h2(f, c, q, opts)?])
        }
        TheoremId::Thm3 => {
            let p = need("p", th.p)?;
            let limits = limit_ratios(f, &limit_samples(c), schedule);
            Ok(vec![
                check_h1_star(f, c, p, opts)?,
                divergence_leg(HypothesisId::Thm3F0, &limits, c, &limits.f0_inf, true, limit_probe_u(true, schedule.steps)),
                divergence_leg(HypothesisId::Thm3FInf, &limits, c, &limits.finf_inf, true, limit_probe_u(false, schedule.steps)),
            ])
        }
        TheoremId::Thm4 => {
            let q = need("q", th.q)?;
            let limits = limit_ratios(f, &limit_samples(c), schedule);
            Ok(vec![
                check_h2_star(f, c, q, opts)?,
                divergence_leg(HypothesisId::Thm4F0, &limits, c, &limits.f0_sup, false, limit_probe_u(true, schedule.steps)),
                divergence_leg(HypothesisId::Thm4FInf, &limits, c, &limits.finf_sup, false, limit_probe_u(false, schedule.steps)),
            ])
        }
        TheoremId::Thm5 => check_thm5(f, c, need("p", th.p)?, need("q", th.q)?, need("r", th.r)?, opts),
        TheoremId::Thm6 => check_thm6(f, c, need("p", th.p)?, need("q", th.q)?, need("r", th.r)?, opts),
        TheoremId::Cor24 => {
            let limits = limit_ratios(f, &limit_samples(c), schedule);
            Ok(check_corollary24(&limits, c, schedule))
        }
    }
}

/// Whether the reports establish the theorem's hypotheses. The corollary
/// needs only one of (H3), (H4); every other theorem needs all reports.
pub fn theorem_holds(theorem: TheoremId, reports: &[HypothesisReport]) -> bool {
    match theorem {
        TheoremId::Cor24 => reports.iter().any(|r| r.verdict.passed()),
        _ => !reports.is_empty() && reports.iter().all(|r| r.verdict.passed()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::envelope_closed_form;
    use crate::kernels::ProblemId;
    use crate::quadrature::cone_constants;

    const I: (f64, f64) = (0.0, 1.0);

    fn b0() -> ConeConstants {
        cone_constants(&envelope_closed_form(ProblemId::second_order(0.0)).unwrap(), 1e-13).unwrap()
    }

    fn opts() -> CheckOptions {
        CheckOptions { grid: 64, ..Default::default() }
    }

    #[test]
    fn h1_equality_case_passes_non_strictly() {
        let c = b0();
        let f = Nonlinearity::single("6*u", I).unwrap();
        let rep = check_h1(&f, &c, 1.0, &opts()).unwrap();
        assert!(rep.verdict.passed());
        assert!(rep.margin.abs() < 1e-12);
        let star = check_h1_star(&f, &c, 1.0, &opts()).unwrap();
        assert!(!star.verdict.passed());
    }

    #[test]
    fn zero_nonlinearity() {
        let c = b0();
        let f = Nonlinearity::zero(I);
        let rep = check_h1(&f, &c, 2.0, &opts()).unwrap();
        assert!((rep.margin - 12.0).abs() < 1e-12);
        let reps = check_thm5(&f, &c, 1.0, 2.0, 3.0, &opts()).unwrap();
        assert!(!reps[0].verdict.passed() && reps[0].margin < 0.0);
        assert!(reps[1].verdict.passed());
        assert!(!reps[2].verdict.passed() && reps[2].margin < 0.0);
    }

    #[test]
    fn h2_equality_case() {
        let c = b0();
        let f = Nonlinearity::single(&format!("{}*u", c.c_h2), I).unwrap();
        let rep = check_h2(&f, &c, 2.0, &opts()).unwrap();
        assert!(rep.verdict.passed(), "{rep:?}");
        assert_eq!(rep.u_range, (0.5, 2.0));
    }

    #[test]
    fn constant_at_bound_fails_strict_rectangle() {
        let c = b0();
        let f = Nonlinearity::single("3", I).unwrap();
        let reps = check_thm6(&f, &c, 0.5, 1.0, 4.0, &opts()).unwrap();
        assert!(!reps[1].verdict.passed());
        assert_eq!(reps[1].strictness.as_ref().unwrap().basis, StrictBasis::Violated);
    }

    #[test]
    fn threshold_errors() {
        let c = b0();
        let f = Nonlinearity::zero(I);
        assert!(matches!(check_h1(&f, &c, 0.0, &opts()), Err(Error::InvalidThreshold { .. })));
        assert!(matches!(check_thm5(&f, &c, 2.0, 1.0, 3.0, &opts()), Err(Error::ThresholdOrdering(_))));
        assert!(matches!(check_thm6(&f, &c, 1.0, 2.0, 7.0, &opts()), Err(Error::ThresholdOrdering(_))));
        assert!(check_thm6(&f, &c, 1.0, 2.0, 8.0, &opts()).is_ok());
    }

    #[test]
    fn limit_estimates() {
        let samples = [0.0, 0.5, 1.0];
        let sched = ProbeSchedule::default();
        let cubic = Nonlinearity::single("u^3", I).unwrap();
        let l = limit_ratios(&cubic, &samples, sched);
        assert!(l.f0_sup.iter().all(|e| e.vanishes && e.value == 0.0));
        assert!(l.finf_inf.iter().all(|e| e.diverges));
        let sqrt = Nonlinearity::single("sqrt(u)", I).unwrap();
        let l = limit_ratios(&sqrt, &samples, sched);
        assert!(l.f0_inf.iter().all(|e| e.diverges && e.trend == Trend::Increasing));
        assert!(l.finf_sup.iter().all(|e| e.vanishes));
        let lin = Nonlinearity::single("(1+t)*u", I).unwrap();
        let l = limit_ratios(&lin, &samples, sched);
        assert_eq!(l.f0_inf[1].value, 1.5);
        assert_eq!(l.f0_inf[1].trend, Trend::Constant);
    }

    #[test]
    fn corollary_power_laws() {
        let c = b0();
        let sq = Nonlinearity::single("u^2", I).unwrap();
        let reps = check_theorem(TheoremId::Cor24, &sq, &c, Thresholds::default(), &opts()).unwrap();
        assert!(reps[0].verdict.passed());
        assert!(!reps[1].verdict.passed());
        let root = Nonlinearity::single("sqrt(u)", I).unwrap();
        let reps = check_theorem(TheoremId::Cor24, &root, &c, Thresholds::default(), &opts()).unwrap();
        assert!(!reps[0].verdict.passed());
        assert!(reps[1].verdict.passed());
        assert!(theorem_holds(TheoremId::Cor24, &reps));
    }

    #[test]
    fn ids_display_like_their_serialized_names() {
        assert_eq!(HypothesisId::Thm6B.to_string(), "Thm6.b");
        assert_eq!(HypothesisId::H1Star.to_string(), "H1*");
        assert_eq!(TheoremId::Cor24.to_string(), "cor24");
    }
}
