//! Normalized kernel `ũ(t,s) = G(t,s)/Φ(s)` and the envelope `k1 ≤ ũ ≤ k2`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{kernel_for, GreenKernel, ProblemId};
use crate::numeric::{golden_min, grid_max, grid_min};

/// Largest |B| for which the min/max of `ũ` over `s` sit where the closed
/// forms put them (the endpoints for `k1`, the diagonal for `k2`).
pub const CLOSED_FORM_DRIFT_LIMIT: f64 = 2.0;

/// Right end of `I1` for `B = -2π`, as tabulated.
pub const MINUS_TWO_PI_B1: f64 = 0.9151;

const ENDPOINT_OFFSET: f64 = 1e-9;

impl GreenKernel {
    /// `ũ(t, a)`, the analytic limit of `G(t,s)/Φ(s)` as `s → a⁺`.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.problem().order {
            2 => dirichlet_l0(self.problem().drift_or_zero(), t),
            _ => t * (1.0 - t).powi(2) / 2.0,
        }
    }

    /// `ũ(t, b)`, the analytic limit as `s → b⁻`.
    pub fn right_limit(&self, t: f64) -> f64 {
        match self.problem().order {
            2 => dirichlet_l1(self.problem().drift_or_zero(), t),
            _ => t * t * (1.0 - t) / 2.0,
        }
    }

    /// `ũ(t,s)` without domain checks; endpoint `s` values use the limits.
    pub fn normalized_unchecked(&self, t: f64, s: f64) -> f64 {
        let p = self.problem();
        if s <= p.a {
            self.left_limit(t)
        } else if s >= p.b {
            self.right_limit(t)
        } else {
            self.eval(t, s) / self.phi(s)
        }
    }
}

/// `ũ(t,s)` for `t ∈ (a,b)`, `s ∈ [a,b]`.
pub fn normalized(kernel: &GreenKernel, t: f64, s: f64) -> Result<f64> {
    let p = kernel.problem();
    if !(t > p.a && t < p.b) {
        return Err(Error::Domain { name: "t", value: t, lo: p.a, hi: p.b });
    }
    if !(p.a..=p.b).contains(&s) {
        return Err(Error::Domain { name: "s", value: s, lo: p.a, hi: p.b });
    }
    Ok(kernel.normalized_unchecked(t, s))
}

fn dirichlet_l0(b: f64, t: f64) -> f64 {
    if b == 0.0 {
        1.0 - t
    } else if b > 0.0 {
        (-b * t).exp() * (-b * (1.0 - t)).exp_m1() / (-b).exp_m1()
    } else {
        (b * (1.0 - t)).exp_m1() / b.exp_m1()
    }
}

fn dirichlet_l1(b: f64, t: f64) -> f64 {
    if b == 0.0 {
        t
    } else if b > 0.0 {
        (-b * t).exp_m1() / (-b).exp_m1()
    } else {
        (b * (1.0 - t)).exp() * (b * t).exp_m1() / b.exp_m1()
    }
}

/// Resolution of the sampled envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumericGrid {
    pub s_points: usize,
    pub t_points: usize,
}

impl Default for NumericGrid {
    fn default() -> Self {
        Self { s_points: 256, t_points: 4096 }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Dirichlet { drift: f64 },
    DirichletMinusTwoPi { t3: f64, scale: f64 },
    Beam,
    Numeric { s_points: usize },
}

/// Envelope functions and cone constants for one kernel.
#[derive(Debug, Clone)]
pub struct Envelope {
    kernel: GreenKernel,
    kind: Kind,
    k1_max: f64,
    k2_max: f64,
    m1: f64,
    i1: (f64, f64),
    kinks: Vec<f64>,
}

pub fn is_minus_two_pi(drift: f64) -> bool {
    (drift + 2.0 * PI).abs() < 1e-12
}

fn closed_form_available(problem: &ProblemId) -> bool {
    match problem.order {
        4 => true,
        _ => {
            let b = problem.drift_or_zero();
            b.abs() <= CLOSED_FORM_DRIFT_LIMIT || is_minus_two_pi(b)
        }
    }
}

/// Default working interval `I1` for a catalogued problem.
pub fn default_i1(problem: &ProblemId) -> Result<(f64, f64)> {
    problem.validate()?;
    if problem.order == 4 {
        return Ok((1.0 / 3.0, 2.0 / 3.0));
    }
    let b = problem.drift_or_zero();
    if b == 0.0 {
        Ok((0.25, 0.75))
    } else if is_minus_two_pi(b) {
        let tp = 2.0 * PI;
        Ok((((3.0 + tp.exp()) / 4.0).ln() / tp, MINUS_TWO_PI_B1))
    } else if b.abs() <= CLOSED_FORM_DRIFT_LIMIT {
        let a1 = 1.0 - ((1.0 + 3.0 * b.exp()) / 4.0).ln() / b;
        let b1 = 1.0 - ((3.0 + b.exp()) / 4.0).ln() / b;
        Ok((a1, b1))
    } else {
        Err(Error::UnsupportedProblem(format!("no tabulated I1 for B = {b}")))
    }
}

/// Closed-form envelope for `|B| ≤ 2`, `B = -2π` and the clamped beam.
pub fn envelope_closed_form(problem: ProblemId) -> Result<Envelope> {
    let kernel = kernel_for(problem)?;
    if !closed_form_available(&problem) {
        return Err(Error::UnsupportedProblem(format!(
            "no closed-form envelope for B = {}",
            problem.drift_or_zero()
        )));
    }
    let i1 = default_i1(&problem)?;
    let (kind, k1_max, k2_max, kinks) = if problem.order == 4 {
        (Kind::Beam, 1.0 / 16.0, 1.0 / 12.0, vec![0.5])
    } else {
        let b = problem.drift_or_zero();
        if is_minus_two_pi(b) {
            let (t3, scale) = minus_two_pi_kink();
            let kind = Kind::DirichletMinusTwoPi { t3, scale };
            let k1_max = minus_two_pi_k1(t3, scale, t3);
            (kind, k1_max, 1.0, vec![t3])
        } else {
            let t1 = if b == 0.0 { 0.5 } else { 1.0 - ((1.0 + b.exp()) / 2.0).ln() / b };
            (Kind::Dirichlet { drift: b }, 0.5, 1.0, vec![t1])
        }
    };
    let mut env = Envelope { kernel, kind, k1_max, k2_max, m1: 0.0, i1, kinks };
    env.m1 = env.unimodal_min(i1);
    Ok(env)
}

/// `t3` and the prefactor of the right branch of the certified `k1` at `B = -2π`.
fn minus_two_pi_kink() -> (f64, f64) {
    let scale = 250000.0 / 62037.0 * -(-451.0 / 500.0 * PI).exp_m1();
    let diff = |t: f64| minus_two_pi_left(t) - minus_two_pi_right(scale, t);
    let (mut lo, mut hi) = (0.5, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if diff(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), scale)
}

fn minus_two_pi_left(t: f64) -> f64 {
    let tp = 2.0 * PI;
    (tp * t).exp_m1() / tp.exp_m1()
}

fn minus_two_pi_right(scale: f64, t: f64) -> f64 {
    let tp = 2.0 * PI;
    scale * (tp.exp() - (tp * t).exp()) / (tp * tp.exp_m1())
}

fn minus_two_pi_k1(t3: f64, scale: f64, t: f64) -> f64 {
    if t <= t3 {
        minus_two_pi_left(t)
    } else {
        minus_two_pi_right(scale, t)
    }
}

fn row_min(kernel: &GreenKernel, t: f64, s_points: usize) -> (f64, f64) {
    let p = kernel.problem();
    grid_min(|s| kernel.normalized_unchecked(t, s), p.a, p.b, s_points, 1e-10)
}

fn row_max(kernel: &GreenKernel, t: f64, s_points: usize) -> (f64, f64) {
    let p = kernel.problem();
    grid_max(|s| kernel.normalized_unchecked(t, s), p.a, p.b, s_points, 1e-10)
}

/// Sampled envelope: `k1(t) = min_s ũ(t,s)`, `k2(t) = max_s ũ(t,s)`.
///
/// When no `I1` is tabulated, the level set `k1 ≥ K1/2` around the maximiser
/// of `k1` is used, which reproduces the tabulated intervals where they exist.
pub fn envelope_numeric(kernel: &GreenKernel, grid: NumericGrid) -> Envelope {
    let s_points = grid.s_points.max(64);
    let t_points = grid.t_points.max(64);
    let p = *kernel.problem();
    let (a, b) = (p.a + ENDPOINT_OFFSET, p.b - ENDPOINT_OFFSET);
    let ts: Vec<f64> = (0..=t_points).map(|i| a + (b - a) * i as f64 / t_points as f64).collect();
    let rows: Vec<(f64, f64, f64)> = ts
        .par_iter()
        .map(|&t| {
            let (s_min, lo) = row_min(kernel, t, s_points);
            let (_, hi) = row_max(kernel, t, s_points);
            (s_min, lo, hi)
        })
        .collect();

    let refine_max = |values: &dyn Fn(usize) -> f64, f: &dyn Fn(f64) -> f64| {
        let (i, v) = (0..ts.len()).map(|i| (i, values(i))).fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let lo = ts[i.saturating_sub(1)];
        let hi = ts[(i + 1).min(ts.len() - 1)];
        let (_, w) = golden_min(|t| -f(t), lo, hi, 1e-10);
        v.max(-w)
    };
    let k1_max = refine_max(&|i| rows[i].1, &|t| row_min(kernel, t, s_points).1);
    let k2_max = refine_max(&|i| rows[i].2, &|t| row_max(kernel, t, s_points).1);

    // Kinks of k1 sit where the minimising s jumps across the interval.
    let mut kinks = Vec::new();
    let half = 0.5 * (p.a + p.b);
    for i in 1..rows.len() {
        if (rows[i].0 - rows[i - 1].0).abs() > 0.25 * (p.b - p.a) {
            let left_side = rows[i - 1].0 < half;
            let (mut lo, mut hi) = (ts[i - 1], ts[i]);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if (row_min(kernel, mid, s_points).0 < half) == left_side {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            kinks.push(0.5 * (lo + hi));
        }
    }

    let mut env = Envelope {
        kernel: *kernel,
        kind: Kind::Numeric { s_points },
        k1_max,
        k2_max,
        m1: 0.0,
        i1: (p.a, p.b),
        kinks,
    };
    env.i1 = match default_i1(&p) {
        Ok(i1) => i1,
        Err(_) => env.half_level_interval(&ts, &rows),
    };
    env.m1 = env.sampled_min(env.i1, t_points);
    env
}

/// Closed-form envelope when one is available, sampled otherwise.
pub fn envelope_for(problem: ProblemId) -> Result<Envelope> {
    if closed_form_available(&problem) {
        envelope_closed_form(problem)
    } else {
        Ok(envelope_numeric(&kernel_for(problem)?, NumericGrid::default()))
    }
}

impl Envelope {
    pub fn kernel(&self) -> &GreenKernel {
        &self.kernel
    }

    pub fn problem(&self) -> &ProblemId {
        self.kernel.problem()
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self.kind, Kind::Numeric { .. })
    }

    /// Kink location of the certified `k1` for `B = -2π`.
    pub fn t3(&self) -> Option<f64> {
        match self.kind {
            Kind::DirichletMinusTwoPi { t3, .. } => Some(t3),
            _ => None,
        }
    }

    pub fn k1(&self, t: f64) -> f64 {
        match self.kind {
            Kind::Dirichlet { drift } => dirichlet_l0(drift, t).min(dirichlet_l1(drift, t)),
            Kind::DirichletMinusTwoPi { t3, scale } => minus_two_pi_k1(t3, scale, t),
            Kind::Beam => {
                if t <= 0.5 {
                    t * t * (1.0 - t) / 2.0
                } else {
                    t * (1.0 - t).powi(2) / 2.0
                }
            }
            Kind::Numeric { s_points } => row_min(&self.kernel, self.clamp_t(t), s_points).1,
        }
    }

    pub fn k2(&self, t: f64) -> f64 {
        match self.kind {
            Kind::Dirichlet { .. } => {
                if t <= 0.0 || t >= 1.0 {
                    1.0
                } else {
                    self.kernel.eval(t, t) / self.kernel.phi(t)
                }
            }
            Kind::DirichletMinusTwoPi { .. } => 1.0,
            Kind::Beam => {
                if t <= 0.25 {
                    t * (1.0 - t).powi(2) / 2.0
                } else if t <= 0.5 {
                    (1.0 - t) * (1.0 + 2.0 * t).powi(2) / 24.0
                } else if t <= 0.75 {
                    t * (3.0 - 2.0 * t).powi(2) / 24.0
                } else {
                    t * t * (1.0 - t) / 2.0
                }
            }
            Kind::Numeric { s_points } => row_max(&self.kernel, self.clamp_t(t), s_points).1,
        }
    }

    /// `K1 = max k1`.
    pub fn k1_max(&self) -> f64 {
        self.k1_max
    }

    /// `K2 = max k2`.
    pub fn k2_max(&self) -> f64 {
        self.k2_max
    }

    /// `m1 = min_{I1} k1`.
    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn i1(&self) -> (f64, f64) {
        self.i1
    }

    /// Points where `k1` is not smooth.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// Replaces `I1` and recomputes `m1`.
    pub fn with_i1(mut self, a1: f64, b1: f64) -> Result<Self> {
        let p = *self.problem();
        if !(a1 > p.a && b1 < p.b && a1 < b1) {
            return Err(Error::Domain { name: "I1", value: if a1 <= p.a { a1 } else { b1 }, lo: p.a, hi: p.b });
        }
        self.i1 = (a1, b1);
        self.m1 = match self.kind {
            Kind::Numeric { .. } => self.sampled_min((a1, b1), 4096),
            _ => self.unimodal_min((a1, b1)),
        };
        Ok(self)
    }

    fn clamp_t(&self, t: f64) -> f64 {
        let p = self.problem();
        t.clamp(p.a + ENDPOINT_OFFSET, p.b - ENDPOINT_OFFSET)
    }

    // Every closed-form k1 rises to a single peak and then falls.
    fn unimodal_min(&self, (a1, b1): (f64, f64)) -> f64 {
        self.k1(a1).min(self.k1(b1))
    }

    fn sampled_min(&self, (a1, b1): (f64, f64), points: usize) -> f64 {
        grid_min(|t| self.k1(t), a1, b1, points, 1e-10).1
    }

    fn half_level_interval(&self, ts: &[f64], rows: &[(f64, f64, f64)]) -> (f64, f64) {
        let level = 0.5 * self.k1_max;
        let peak = (0..rows.len()).fold(0, |best, i| if rows[i].1 > rows[best].1 { i } else { best });
        let crossing = |lo: f64, hi: f64| {
            crate::numeric::brent(|t| self.k1(t) - level, lo, hi, 1e-12).unwrap_or(0.5 * (lo + hi))
        };
        let p = self.problem();
        let left = (0..peak).rev().find(|&i| rows[i].1 < level);
        let right = (peak + 1..rows.len()).find(|&i| rows[i].1 < level);
        let a1 = left.map(|i| crossing(ts[i], ts[i + 1])).unwrap_or(p.a + 0.25 * (p.b - p.a));
        let b1 = right.map(|i| crossing(ts[i - 1], ts[i])).unwrap_or(p.b - 0.25 * (p.b - p.a));
        (a1, b1)
    }
}
