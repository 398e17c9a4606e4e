//! Nyström discretization of `L u(t) = ∫ G(t,s) f(s, u(s)) ds` and a
//! multi-start Newton search for its fixed points.
//!
//! The operator is discretized by product integration: on composite
//! Gauss–Legendre panels `f(s, u(s))` is replaced by its panel-wise
//! interpolating polynomial and integrated exactly against `G(t_i, ·)`
//! (to quadrature accuracy, splitting at the kink `s = t_i`). This keeps
//! spectral accuracy although `G` has a derivative jump on the diagonal.
//! Once a solution is found, the points where it crosses a branch boundary
//! of `f` are inserted as panel breaks and the solve is repeated, so that
//! every panel sees a smooth integrand.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::envelope::Envelope;
use crate::kernels::GreenKernel;
use crate::nonlinearity::Nonlinearity;
use crate::numeric::{brent, gauss_legendre, golden_min};

pub const PANEL_ORDER: usize = 8;
const PRODUCT_POINTS: usize = 16;
const MERGE_GAP: f64 = 1e-10;

#[derive(Debug, Clone)]
struct Rule {
    x: Vec<f64>,
    w: Vec<f64>,
    bary: Vec<f64>,
    qx: Vec<f64>,
    qw: Vec<f64>,
    /// Rows mapping nodal values to the two highest Legendre coefficients.
    tail: [[f64; PANEL_ORDER]; 2],
}

fn legendre(k: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return p0;
    }
    for j in 1..k {
        let p2 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p0) / (j + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

impl Rule {
    fn new() -> Self {
        let (x, w) = gauss_legendre(PANEL_ORDER);
        let bary = (0..x.len())
            .map(|k| 1.0 / (0..x.len()).filter(|&m| m != k).map(|m| x[k] - x[m]).product::<f64>())
            .collect();
        let (qx, qw) = gauss_legendre(PRODUCT_POINTS);
        let mut tail = [[0.0; PANEL_ORDER]; 2];
        for (row, k) in tail.iter_mut().zip([PANEL_ORDER - 2, PANEL_ORDER - 1]) {
            for i in 0..PANEL_ORDER {
                row[i] = (2 * k + 1) as f64 / 2.0 * w[i] * legendre(k, x[i]);
            }
        }
        Self { x, w, bary, qx, qw, tail }
    }

    /// Lagrange basis through the panel nodes, evaluated at reference `xi`.
    fn basis(&self, xi: f64, out: &mut [f64; PANEL_ORDER]) {
        if let Some(k) = self.x.iter().position(|&x| x == xi) {
            out.fill(0.0);
            out[k] = 1.0;
            return;
        }
        let mut sum = 0.0;
        for k in 0..PANEL_ORDER {
            out[k] = self.bary[k] / (xi - self.x[k]);
            sum += out[k];
        }
        for v in out.iter_mut() {
            *v /= sum;
        }
    }
}

/// Nodes, weights and operator matrices on a composite Gauss–Legendre mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    kernel: GreenKernel,
    panels: Vec<(f64, f64)>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kernel_matrix: DMatrix<f64>,
    operator: DMatrix<f64>,
    rule: Arc<Rule>,
}

/// Discretization with `n` nodes (rounded up to whole panels) and no extra breaks.
pub fn discretize(kernel: &GreenKernel, n: usize) -> Discretization {
    Discretization::new(kernel, n, &[])
}

fn build_panels(a: f64, b: f64, breaks: &[f64], n_panels: usize) -> Vec<(f64, f64)> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a + MERGE_GAP && x < b - MERGE_GAP).collect();
    inner.sort_by(f64::total_cmp);
    for x in inner {
        if x - pts.last().unwrap() > MERGE_GAP {
            pts.push(x);
        }
    }
    pts.push(b);
    let segs: Vec<(f64, f64)> = pts.windows(2).map(|w| (w[0], w[1])).collect();
    let total = n_panels.max(segs.len());
    let ideal: Vec<f64> = segs.iter().map(|s| total as f64 * (s.1 - s.0) / (b - a)).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|&x| (x.floor() as usize).max(1)).collect();
    while counts.iter().sum::<usize>() < total {
        let i = (0..segs.len())
            .max_by(|&i, &j| (ideal[i] - counts[i] as f64).total_cmp(&(ideal[j] - counts[j] as f64)))
            .unwrap();
        counts[i] += 1;
    }
    let mut panels = Vec::new();
    for (&(l, r), &c) in segs.iter().zip(&counts) {
        for k in 0..c {
            let pl = l + (r - l) * k as f64 / c as f64;
            let pr = if k + 1 == c { r } else { l + (r - l) * (k + 1) as f64 / c as f64 };
            panels.push((pl, pr));
        }
    }
    panels
}

impl Discretization {
    /// Mesh with at least `n` nodes whose panels break at every point of `breaks`.
    pub fn new(kernel: &GreenKernel, n: usize, breaks: &[f64]) -> Self {
        let p = kernel.problem();
        Self::from_panels(kernel, build_panels(p.a, p.b, breaks, n.max(PANEL_ORDER).div_ceil(PANEL_ORDER)))
    }

    /// Mesh on an explicit list of contiguous panels covering `[a, b]`.
    pub fn from_panels(kernel: &GreenKernel, panels: Vec<(f64, f64)>) -> Self {
        let rule = Arc::new(Rule::new());
        let mut nodes = Vec::with_capacity(panels.len() * PANEL_ORDER);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for &(l, r) in &panels {
            let (mid, half) = (0.5 * (l + r), 0.5 * (r - l));
            for k in 0..PANEL_ORDER {
                nodes.push(mid + half * rule.x[k]);
                weights.push(half * rule.w[k]);
            }
        }
        let mut d = Self {
            kernel: *kernel,
            panels,
            kernel_matrix: DMatrix::zeros(0, 0),
            operator: DMatrix::zeros(0, 0),
            nodes,
            weights,
            rule,
        };
        let m = d.nodes.len();
        let rows: Vec<Vec<f64>> = d.nodes.par_iter().map(|&t| d.row(t)).collect();
        d.operator = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
        d.kernel_matrix = DMatrix::from_fn(m, m, |i, j| kernel.eval(d.nodes[i], d.nodes[j]));
        d
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> &[(f64, f64)] {
        &self.panels
    }

    pub fn kernel(&self) -> &GreenKernel {
        &self.kernel
    }

    /// Pointwise kernel samples `G(t_i, s_j)`.
    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.kernel_matrix
    }

    /// Product-integration matrix `A_ij = ∫ G(t_i, s) ℓ_j(s) ds`.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// Row of weights `∫ G(t, s) ℓ_j(s) ds` for an arbitrary `t`.
    pub fn row(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        let mut basis = [0.0; PANEL_ORDER];
        for (pi, &(l, r)) in self.panels.iter().enumerate() {
            let split = t > l && t < r;
            let pieces = [(l, if split { t } else { r }), (t, r)];
            for &(pl, pr) in &pieces[..if split { 2 } else { 1 }] {
                let (mid, half) = (0.5 * (pl + pr), 0.5 * (pr - pl));
                for q in 0..PRODUCT_POINTS {
                    let s = mid + half * self.rule.qx[q];
                    let g = self.kernel.eval(t, s) * self.rule.qw[q] * half;
                    self.rule.basis((2.0 * s - l - r) / (r - l), &mut basis);
                    let block = &mut out[pi * PANEL_ORDER..(pi + 1) * PANEL_ORDER];
                    for k in 0..PANEL_ORDER {
                        block[k] += g * basis[k];
                    }
                }
            }
        }
        out
    }

    /// `∫ G(t, s) p(s) ds` where `p` interpolates `fvals` on every panel.
    pub fn interpolate(&self, fvals: &[f64], t: f64) -> f64 {
        self.row(t).iter().zip(fvals).map(|(a, b)| a * b).sum()
    }

    /// Value at `s` of the panelwise interpolant of `fvals`.
    pub fn load_at(&self, fvals: &[f64], s: f64) -> f64 {
        let pi = self.panels.partition_point(|&(_, r)| r < s).min(self.panels.len() - 1);
        let (l, r) = self.panels[pi];
        let mut basis = [0.0; PANEL_ORDER];
        self.rule.basis((2.0 * s - l - r) / (r - l), &mut basis);
        basis.iter().zip(&fvals[pi * PANEL_ORDER..(pi + 1) * PANEL_ORDER]).map(|(a, b)| a * b).sum()
    }

    /// Centred fourth difference `δ⁴_h (L p)(t) / h⁴` for a kernel that is cubic in `t`
    /// off the diagonal with unit jump in the third derivative. It equals
    /// `∫ M_h(t - s) p(s) ds` with `M_h` the cubic B-spline on `[-2h, 2h]`,
    /// which avoids the cancellation of the five-point formula.
    pub fn fourth_difference(&self, fvals: &[f64], t: f64, h: f64) -> f64 {
        let bspline = |y: f64| {
            let y = y.abs();
            if y < 1.0 {
                2.0 / 3.0 - y * y + 0.5 * y * y * y
            } else if y < 2.0 {
                (2.0 - y).powi(3) / 6.0
            } else {
                0.0
            }
        };
        let (lo, hi) = (t - 2.0 * h, t + 2.0 * h);
        let mut cuts: Vec<f64> = (0..=4).map(|k| lo + k as f64 * h).collect();
        cuts.extend(self.panels.iter().map(|p| p.0).filter(|&x| x > lo && x < hi));
        cuts.sort_by(f64::total_cmp);
        let mut sum = 0.0;
        for w in cuts.windows(2) {
            let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for q in 0..PRODUCT_POINTS {
                let s = mid + half * self.rule.qx[q];
                sum += self.rule.qw[q] * half * bspline((t - s) / h) * self.load_at(fvals, s);
            }
        }
        sum / h
    }

    /// Per panel, the size of the two highest Legendre coefficients of the
    /// interpolant of `fvals`, an estimate of its interpolation error.
    pub fn tail_estimates(&self, fvals: &[f64]) -> Vec<f64> {
        fvals
            .chunks(PANEL_ORDER)
            .map(|v| {
                self.rule.tail.iter().map(|row| row.iter().zip(v).map(|(c, x)| c * x).sum::<f64>().abs()).sum()
            })
            .collect()
    }

    fn load(&self, f: &Nonlinearity, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(u.len(), self.nodes.iter().zip(u.iter()).map(|(&s, &v)| f.eval(s, v.max(0.0))))
    }
}

/// `(L u)_i = Σ_j A_ij f(s_j, u_j)`.
pub fn apply_l(d: &Discretization, f: &Nonlinearity, u: &[f64]) -> Vec<f64> {
    let u = DVector::from_column_slice(u);
    (d.operator() * d.load(f, &u)).as_slice().to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub nodes: usize,
    /// Acceptance threshold on `‖u - L u‖∞ / (1 + ‖u‖∞)`.
    pub tol: f64,
    pub seeds: usize,
    /// Re-solve each accepted solution on a mesh with twice the nodes.
    pub mesh_check: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { nodes: 128, tol: 1e-10, seeds: 24, mesh_check: true }
    }
}

const NEWTON_ITERS: usize = 100;
const DAMPING_HALVINGS: usize = 30;
const PICARD_ITERS: usize = 200;
const MESH_ROUNDS: usize = 8;

struct Newton {
    u: DVector<f64>,
    residual: f64,
    iterations: usize,
}

fn relative_residual(u: &DVector<f64>, lu: &DVector<f64>) -> f64 {
    (u - lu).amax() / (1.0 + u.amax())
}

/// Damped Newton with a Picard fallback. On failure returns the iterate
/// with the smallest residual seen, so the caller can re-mesh around it.
fn newton(d: &Discretization, f: &Nonlinearity, u0: DVector<f64>, tol: f64) -> Result<Newton, Newton> {
    let a = d.operator();
    let mut u = u0.map(|v| v.max(0.0));
    let mut lu = a * d.load(f, &u);
    let mut res = relative_residual(&u, &lu);
    let n = u.len();
    let mut best = Newton { u: u.clone(), residual: res, iterations: 0 };
    let remember = |u: &DVector<f64>, res: f64, it: usize, best: &mut Newton| {
        if res < best.residual {
            *best = Newton { u: u.clone(), residual: res, iterations: it };
        }
    };
    for it in 0..NEWTON_ITERS {
        if res <= tol {
            return Ok(Newton { u, residual: res, iterations: it });
        }
        let fv = d.load(f, &u);
        let slopes = DVector::from_iterator(
            n,
            (0..n).map(|j| {
                let h = 1e-7 * (1.0 + u[j].abs());
                (f.eval(d.nodes[j], u[j].max(0.0) + h) - fv[j]) / h
            }),
        );
        let mut jac = -a.clone();
        for j in 0..n {
            jac.column_mut(j).scale_mut(slopes[j]);
        }
        for i in 0..n {
            jac[(i, i)] += 1.0;
        }
        let rhs = &lu - &u;
        let step = jac.lu().solve(&rhs);
        let mut accepted = false;
        if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
            let mut lambda = 1.0;
            for _ in 0..DAMPING_HALVINGS {
                let trial = (&u + &step * lambda).map(|v| v.max(0.0));
                let trial_lu = a * d.load(f, &trial);
                let trial_res = relative_residual(&trial, &trial_lu);
                if trial_res < res {
                    u = trial;
                    lu = trial_lu;
                    res = trial_res;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
        }
        remember(&u, res, it, &mut best);
        if !accepted {
            // Derivative-free fallback for stalls at branch kinks.
            for _ in 0..PICARD_ITERS {
                u = lu.map(|v| v.max(0.0));
                lu = a * d.load(f, &u);
                res = relative_residual(&u, &lu);
                if !res.is_finite() {
                    return Err(best);
                }
                remember(&u, res, it, &mut best);
                if res <= tol {
                    break;
                }
            }
            if res > tol {
                return Err(best);
            }
        }
    }
    if res <= tol {
        Ok(Newton { u, residual: res, iterations: NEWTON_ITERS })
    } else {
        Err(best)
    }
}

/// A converged fixed point together with its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct BvpSolution {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// `γ(u) = ‖u‖∞`
    pub gamma: f64,
    pub t_gamma: f64,
    /// `α(u) = min_{I1} u`
    pub alpha: f64,
    /// `θ(u) = max_{I1} u`
    pub theta: f64,
    /// `‖u - L u‖∞ / (1 + ‖u‖∞)` on the nodes.
    pub fixed_point_residual: f64,
    /// Finite-difference residual of the differential equation relative to `1 + ‖f‖∞`.
    pub ode_residual: f64,
    /// Largest boundary-condition defect (values, and first derivatives for order 4).
    pub boundary_residual: f64,
    /// `min_i u(t_i) - k1(t_i) γ / K2`
    pub cone_margin: f64,
    /// `‖u_N - u_2N‖∞` on a uniform grid of 1001 points, when requested.
    pub mesh_change: Option<f64>,
    /// Points where `u` crosses a branch boundary of `f`.
    pub crossings: Vec<f64>,
    pub seed_amplitude: f64,
    pub iterations: usize,
    #[serde(skip)]
    disc: Arc<Discretization>,
    #[serde(skip)]
    fvals: Vec<f64>,
}

impl BvpSolution {
    /// Nyström interpolant `u(t) = ∫ G(t,s) f(s, u(s)) ds`.
    pub fn eval(&self, t: f64) -> f64 {
        self.disc.interpolate(&self.fvals, t)
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn sample(&self, grid: usize) -> Vec<(f64, f64)> {
        let p = self.disc.kernel().problem();
        (0..grid)
            .map(|i| {
                let t = p.a + (p.b - p.a) * i as f64 / (grid - 1) as f64;
                (t, self.eval(t))
            })
            .collect()
    }
}

struct Fitted {
    disc: Arc<Discretization>,
    u: DVector<f64>,
    residual: f64,
    iterations: usize,
    crossings: Vec<f64>,
}

fn base_breaks(env: &Envelope) -> Vec<f64> {
    let (a1, b1) = env.i1();
    let mut b = vec![a1, b1];
    b.extend_from_slice(env.kinks());
    b
}

/// Points where the interpolant crosses one of `levels`.
fn find_crossings(d: &Discretization, fvals: &[f64], levels: &[f64]) -> Vec<f64> {
    if levels.is_empty() {
        return Vec::new();
    }
    let p = d.kernel().problem();
    let mut ts: Vec<f64> = vec![p.a];
    ts.extend_from_slice(d.nodes());
    for &(l, _) in d.panels() {
        ts.push(l);
    }
    ts.push(p.b);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let vals: Vec<f64> = ts.par_iter().map(|&t| d.interpolate(fvals, t)).collect();
    let mut out = Vec::new();
    for &level in levels {
        for i in 1..ts.len() {
            let (g0, g1) = (vals[i - 1] - level, vals[i] - level);
            if g0 == 0.0 && i > 1 {
                out.push(ts[i - 1]);
            } else if g0 * g1 < 0.0 {
                if let Ok(x) = brent(|t| d.interpolate(fvals, t) - level, ts[i - 1], ts[i], 1e-14) {
                    out.push(x);
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

fn same_points(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-11)
}

fn fit(env: &Envelope, f: &Nonlinearity, n: usize, tol: f64, start: impl Fn(&Discretization) -> DVector<f64>) -> Option<Fitted> {
    let kernel = env.kernel();
    let base = base_breaks(env);
    let levels = f.boundaries();
    let mut crossings: Vec<f64> = Vec::new();
    let mut prev: Option<(Arc<Discretization>, Vec<f64>)> = None;
    let mut total_iters = 0;
    for round in 0..MESH_ROUNDS {
        let mut breaks = base.clone();
        breaks.extend_from_slice(&crossings);
        let d = Arc::new(Discretization::new(kernel, n, &breaks));
        let u0 = match &prev {
            None => start(&d),
            Some((pd, fv)) => DVector::from_vec(d.nodes().par_iter().map(|&t| pd.interpolate(fv, t)).collect()),
        };
        let (sol, converged) = match newton(&d, f, u0, tol) {
            Ok(sol) => (sol, true),
            Err(best) => (best, false),
        };
        total_iters += sol.iterations;
        let fvals = d.load(f, &sol.u).as_slice().to_vec();
        let found = find_crossings(&d, &fvals, &levels);
        let stable = same_points(&found, &crossings);
        if converged && (stable || levels.is_empty() || round + 1 == MESH_ROUNDS) {
            return Some(Fitted { disc: d, u: sol.u, residual: sol.residual, iterations: total_iters, crossings: found });
        }
        if !converged && (stable || levels.is_empty()) {
            // A stall that re-meshing cannot help.
            return None;
        }
        crossings = found;
        prev = Some((d, fvals));
    }
    None
}

fn finish(env: &Envelope, f: &Nonlinearity, fitted: Fitted, seed: f64) -> BvpSolution {
    let d = fitted.disc;
    let fvals = d.load(f, &fitted.u).as_slice().to_vec();
    let mut sol = BvpSolution {
        nodes: d.nodes().to_vec(),
        values: fitted.u.as_slice().to_vec(),
        gamma: 0.0,
        t_gamma: 0.0,
        alpha: 0.0,
        theta: 0.0,
        fixed_point_residual: fitted.residual,
        ode_residual: 0.0,
        boundary_residual: 0.0,
        cone_margin: 0.0,
        mesh_change: None,
        crossings: fitted.crossings,
        seed_amplitude: seed,
        iterations: fitted.iterations,
        disc: d,
        fvals,
    };
    functionals(env, &mut sol);
    sol.cone_margin = sol
        .nodes
        .iter()
        .zip(&sol.values)
        .map(|(&t, &u)| u - env.k1(t) * sol.gamma / env.k2_max())
        .fold(f64::INFINITY, f64::min);
    sol.ode_residual = ode_residual(env, f, &sol);
    sol.boundary_residual = boundary_residual(&sol);
    sol
}

fn functionals(env: &Envelope, sol: &mut BvpSolution) {
    let n = sol.nodes.len();
    let (mut i_max, mut v_max) = (0, f64::NEG_INFINITY);
    for (i, &v) in sol.values.iter().enumerate() {
        if v > v_max {
            v_max = v;
            i_max = i;
        }
    }
    let p = *env.problem();
    let lo = if i_max == 0 { p.a } else { sol.nodes[i_max - 1] };
    let hi = if i_max + 1 == n { p.b } else { sol.nodes[i_max + 1] };
    let (t_star, neg) = golden_min(|t| -sol.eval(t), lo, hi, 1e-12);
    let (t_gamma, gamma) = if -neg > v_max { (t_star, -neg) } else { (sol.nodes[i_max], v_max) };
    sol.gamma = gamma.max(0.0);
    sol.t_gamma = t_gamma;

    let (a1, b1) = env.i1();
    let mut pts: Vec<(f64, f64)> = vec![(a1, sol.eval(a1)), (b1, sol.eval(b1))];
    pts.extend(sol.nodes.iter().zip(&sol.values).filter(|(&t, _)| t > a1 && t < b1).map(|(&t, &v)| (t, v)));
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let extreme = |sign: f64| {
        let k = (0..pts.len()).max_by(|&i, &j| (sign * pts[i].1).total_cmp(&(sign * pts[j].1))).unwrap();
        let lo = pts[k.saturating_sub(1)].0;
        let hi = pts[(k + 1).min(pts.len() - 1)].0;
        let (_, v) = golden_min(|t| -sign * sol.eval(t), lo, hi, 1e-12);
        (sign * pts[k].1).max(-v) * sign
    };
    let (theta, alpha) = (extreme(1.0), extreme(-1.0));
    sol.theta = theta;
    sol.alpha = alpha;
}

/// Largest finite-difference residual of the differential equation at the
/// nodes, relative to `1 + ‖f‖∞`. The 5-point stencils are applied to the
/// interpolant; the fourth-derivative stencil is only second-order accurate,
/// so it is Richardson-extrapolated over a ladder of steps and the most
/// stable pair is kept.
fn ode_residual(env: &Envelope, f: &Nonlinearity, sol: &BvpSolution) -> f64 {
    let p = *env.problem();
    let drift = p.drift_or_zero();
    let h0: f64 = if p.order == 2 { 5e-4 } else { 1e-4 };
    let f_norm = sol.fvals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let kinks = &sol.crossings;
    sol.nodes
        .par_iter()
        .filter_map(|&t| {
            let mut dist = (t - p.a).min(p.b - t);
            for &k in kinks {
                dist = dist.min((t - k).abs());
            }
            let h = h0.min(dist / 2.5);
            if h < 1e-6 {
                return None;
            }
            // The interpolant, not the nodal value, so the stencil sees one smooth function.
            let u = sol.eval(t);
            let forcing = f.eval(t, u.max(0.0));
            let r = if p.order == 2 {
                let um2 = sol.eval(t - 2.0 * h);
                let um1 = sol.eval(t - h);
                let up1 = sol.eval(t + h);
                let up2 = sol.eval(t + 2.0 * h);
                let d2 = (-up2 + 16.0 * up1 - 30.0 * u + 16.0 * um1 - um2) / (12.0 * h * h);
                let d1 = (-up2 + 8.0 * up1 - 8.0 * um1 + um2) / (12.0 * h);
                d2 + drift * d1 + forcing
            } else {
                sol.disc.fourth_difference(&sol.fvals, t, h) - forcing
            };
            Some(r.abs() / (1.0 + f_norm))
        })
        .reduce(|| 0.0, f64::max)
}

fn boundary_residual(sol: &BvpSolution) -> f64 {
    let p = *sol.disc.kernel().problem();
    let mut worst = sol.eval(p.a).abs().max(sol.eval(p.b).abs());
    if p.order == 4 {
        let h = 1e-3;
        let c = [-25.0, 48.0, -36.0, 16.0, -3.0];
        let left: f64 = (0..5).map(|k| c[k] * sol.eval(p.a + k as f64 * h)).sum::<f64>() / (12.0 * h);
        let right: f64 = -(0..5).map(|k| c[k] * sol.eval(p.b - k as f64 * h)).sum::<f64>() / (12.0 * h);
        worst = worst.max(left.abs()).max(right.abs());
    }
    worst
}

/// Outcome of a multi-start search.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointSearch {
    pub solutions: Vec<BvpSolution>,
    /// Seed amplitudes whose Newton/Picard iteration did not converge.
    pub unconverged_seeds: Vec<f64>,
    pub nodes: usize,
}

/// Seed amplitudes: zero plus `count` values spaced geometrically on `[lo, hi]`.
pub fn seed_amplitudes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let count = count.max(1);
    for i in 0..count {
        let x = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
        out.push(lo * (hi / lo).powf(x));
    }
    out
}

const REFINE_TOL: f64 = 1e-11;
const REFINE_ROUNDS: usize = 16;

/// Splits the panel containing `c` so that `c` becomes a panel end.
fn snap(panels: &mut Vec<(f64, f64)>, c: f64) {
    if let Some(i) = panels.iter().position(|&(l, r)| c - l > 1e-12 && r - c > 1e-12) {
        let (l, r) = panels[i];
        panels[i] = (l, c);
        panels.insert(i + 1, (c, r));
    }
}

/// Bisects panels whose interpolant of `f(s, u(s))` is not resolved to
/// `REFINE_TOL·(1 + ‖f‖∞)` and re-solves, until every panel passes or the
/// node budget is spent.
fn adapt(env: &Envelope, f: &Nonlinearity, tol: f64, fitted: Fitted, max_nodes: usize) -> Fitted {
    let levels = f.boundaries();
    let mut cur = fitted;
    for _ in 0..REFINE_ROUNDS {
        let fvals = cur.disc.load(f, &cur.u);
        let limit = REFINE_TOL * (1.0 + fvals.amax());
        let est = cur.disc.tail_estimates(fvals.as_slice());
        if est.iter().all(|&e| e <= limit) {
            break;
        }
        let mut panels = Vec::with_capacity(2 * est.len());
        for (&(l, r), &e) in cur.disc.panels().iter().zip(&est) {
            if e > limit {
                let m = 0.5 * (l + r);
                panels.extend([(l, m), (m, r)]);
            } else {
                panels.push((l, r));
            }
        }
        for &c in &cur.crossings {
            snap(&mut panels, c);
        }
        if panels.len() * PANEL_ORDER > max_nodes {
            break;
        }
        let d = Arc::new(Discretization::from_panels(env.kernel(), panels));
        let fv = fvals.as_slice();
        let u0 = DVector::from_vec(d.nodes().par_iter().map(|&t| cur.disc.interpolate(fv, t)).collect());
        let Ok(sol) = newton(&d, f, u0, tol) else { break };
        let new_f = d.load(f, &sol.u);
        let crossings = find_crossings(&d, new_f.as_slice(), &levels);
        cur = Fitted { disc: d, u: sol.u, residual: sol.residual, iterations: cur.iterations + sol.iterations, crossings };
    }
    cur
}

/// Runs Newton from `A·k1(t)/K1` for every amplitude `A`, fits the mesh to
/// each solution, removes duplicates and refines the survivors.
pub fn find_fixed_points(env: &Envelope, f: &Nonlinearity, seeds: &[f64], opts: &SolverOptions) -> FixedPointSearch {
    let k1_max = env.k1_max();
    let runs: Vec<(f64, Option<Fitted>)> = seeds
        .par_iter()
        .map(|&amp| {
            let start = |d: &Discretization| DVector::from_iterator(d.len(), d.nodes().iter().map(|&t| amp * env.k1(t) / k1_max));
            (amp, fit(env, f, opts.nodes, opts.tol, start))
        })
        .collect();
    let mut unconverged = Vec::new();
    let mut found = Vec::new();
    for (amp, fitted) in runs {
        match fitted {
            Some(x) => found.push((amp, x)),
            None => unconverged.push(amp),
        }
    }
    let p = *env.problem();
    let grid: Vec<f64> = (0..DEDUP_GRID).map(|i| p.a + (p.b - p.a) * i as f64 / (DEDUP_GRID - 1) as f64).collect();
    let samples: Vec<Vec<f64>> = found
        .par_iter()
        .map(|(_, x)| {
            let fv = x.disc.load(f, &x.u);
            grid.iter().map(|&t| x.disc.interpolate(fv.as_slice(), t)).collect()
        })
        .collect();
    let residuals: Vec<f64> = found.iter().map(|(_, x)| x.residual).collect();
    let keep = dedup(&samples, &residuals);
    let mut kept: Vec<Option<(f64, Fitted)>> = found.into_iter().map(Some).collect();
    let kept: Vec<(f64, Fitted)> = keep.into_iter().map(|i| kept[i].take().unwrap()).collect();

    let budget = MAX_NODES_FACTOR * opts.nodes;
    let mut solutions: Vec<BvpSolution> = kept
        .into_par_iter()
        .map(|(amp, x)| finish(env, f, adapt(env, f, opts.tol, x, budget), amp))
        .collect();
    solutions.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    if opts.mesh_check {
        let changes: Vec<Option<f64>> = solutions.par_iter().map(|s| mesh_change(env, f, s, opts)).collect();
        for (s, c) in solutions.iter_mut().zip(changes) {
            s.mesh_change = c;
        }
    }
    let nodes = solutions.iter().map(|s| s.nodes.len()).max().unwrap_or(opts.nodes);
    FixedPointSearch { solutions, unconverged_seeds: unconverged, nodes }
}

const DEDUP_GRID: usize = 257;
const MAX_NODES_FACTOR: usize = 8;

/// Indices of one representative (smallest residual) per cluster of
/// solutions closer than `1e-4·(1 + γ)` in the sampled sup norm.
fn dedup(samples: &[Vec<f64>], residuals: &[f64]) -> Vec<usize> {
    let gamma: Vec<f64> = samples.iter().map(|v| v.iter().copied().fold(0.0, f64::max)).collect();
    let mut keep: Vec<usize> = Vec::new();
    for i in 0..samples.len() {
        let dup = keep.iter().position(|&k| {
            let dist = samples[i].iter().zip(&samples[k]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            dist <= 1e-4 * (1.0 + gamma[i].max(gamma[k]))
        });
        match dup {
            Some(pos) if residuals[i] < residuals[keep[pos]] => keep[pos] = i,
            Some(_) => {}
            None => keep.push(i),
        }
    }
    keep
}

/// Re-solves from `sol` with twice the base node count (refined the same
/// way) and returns the sup-norm change on a uniform grid.
fn mesh_change(env: &Envelope, f: &Nonlinearity, sol: &BvpSolution, opts: &SolverOptions) -> Option<f64> {
    let start = |d: &Discretization| DVector::from_iterator(d.len(), d.nodes().iter().map(|&t| sol.eval(t)));
    let fine = fit(env, f, 2 * opts.nodes, opts.tol, start)?;
    let fine = adapt(env, f, opts.tol, fine, 2 * MAX_NODES_FACTOR * opts.nodes);
    let fvals = fine.disc.load(f, &fine.u).as_slice().to_vec();
    let grid = sol.sample(1001);
    Some(grid.iter().map(|&(t, v)| (fine.disc.interpolate(&fvals, t) - v).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::envelope_closed_form;
    use crate::kernels::{kernel_for, ProblemId};

    const I: (f64, f64) = (0.0, 1.0);

    #[test]
    fn weights_and_panels() {
        let k = kernel_for(ProblemId::second_order(0.0)).unwrap();
        let d = discretize(&k, 64);
        assert_eq!(d.len(), 64);
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(d.weights().iter().all(|&w| w > 0.0));
        assert!(d.kernel_matrix().iter().all(|&g| g >= 0.0));
        let d = Discretization::new(&k, 64, &[0.3, 0.3 + 1e-12, 0.71]);
        assert!(d.panels().iter().any(|p| p.1 == 0.3));
        assert!(d.panels().iter().any(|p| p.0 == 0.71));
    }

    #[test]
    fn constant_load_reproduces_exact_response() {
        let k = kernel_for(ProblemId::second_order(0.0)).unwrap();
        let d = discretize(&k, 64);
        let f = Nonlinearity::single("3", I).unwrap();
        let lu = apply_l(&d, &f, &vec![0.0; d.len()]);
        for (t, v) in d.nodes().iter().zip(&lu) {
            assert!((v - 3.0 * t * (1.0 - t) / 2.0).abs() < 1e-13);
        }
        let f0 = Nonlinearity::zero(I);
        assert!(apply_l(&d, &f0, &vec![1.0; d.len()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn beam_deflection_under_unit_load() {
        let k = kernel_for(ProblemId::fourth_order()).unwrap();
        let d = discretize(&k, 64);
        let f = Nonlinearity::single("1", I).unwrap();
        let lu = apply_l(&d, &f, &vec![0.0; d.len()]);
        for (t, v) in d.nodes().iter().zip(&lu) {
            let exact = t * t * (1.0 - t) * (1.0 - t) / 24.0;
            assert!((v - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn fourth_difference_matches_five_point_formula() {
        let k = kernel_for(ProblemId::fourth_order()).unwrap();
        let d = Discretization::new(&k, 64, &[0.37]);
        let fvals: Vec<f64> = d.nodes().iter().map(|&s| (3.0 * s).sin() + s * s).collect();
        let u = |t: f64| d.interpolate(&fvals, t);
        for &(t, h) in &[(0.2, 2e-2), (0.37, 1e-2), (0.5, 5e-2), (0.81, 3e-2)] {
            let direct = (u(t + 2.0 * h) - 4.0 * u(t + h) + 6.0 * u(t) - 4.0 * u(t - h) + u(t - 2.0 * h)) / h.powi(4);
            let exact = d.fourth_difference(&fvals, t, h);
            assert!((direct - exact).abs() < 1e-7 * (1.0 + exact.abs()), "{t}: {direct} vs {exact}");
        }
        assert!((d.fourth_difference(&fvals, 0.5, 1e-5) - (1.5f64.sin() + 0.25)).abs() < 1e-9);
    }

    #[test]
    fn zero_nonlinearity_has_only_the_zero_solution() {
        let env = envelope_closed_form(ProblemId::second_order(0.0)).unwrap();
        let f = Nonlinearity::zero(I);
        let opts = SolverOptions { nodes: 32, seeds: 4, mesh_check: false, ..Default::default() };
        let out = find_fixed_points(&env, &f, &seed_amplitudes(0.1, 10.0, 4), &opts);
        assert_eq!(out.solutions.len(), 1);
        assert_eq!(out.solutions[0].gamma, 0.0);
    }

    #[test]
    fn seeds_include_zero_and_span_range() {
        let s = seed_amplitudes(0.1, 1000.0, 5);
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 0.1).abs() < 1e-15 && (s[5] - 1000.0).abs() < 1e-9);
    }
}
