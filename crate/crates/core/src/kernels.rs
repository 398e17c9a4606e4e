//! Closed-form Green's kernels for the supported `(k, n-k)` problems.
//!
//! Two problems are catalogued: the Dirichlet problem
//! `u'' + B u' + f(t,u) = 0`, `u(0) = u(1) = 0` (order 2, k = 1) and the
//! clamped beam `u'''' = f(t,u)`, `u(0) = u'(0) = u(1) = u'(1) = 0`
//! (order 4, k = 2). The stored kernel is `G = σ·g ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies a boundary value problem `T_n u = f` with `(k, n-k)` conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemId {
    pub order: u32,
    pub k: u32,
    /// Coefficient of `u'` in the second-order operator; `None` for order 4.
    pub drift: Option<f64>,
    pub a: f64,
    pub b: f64,
}

impl ProblemId {
    pub fn second_order(drift: f64) -> Self {
        Self { order: 2, k: 1, drift: Some(drift), a: 0.0, b: 1.0 }
    }

    pub fn fourth_order() -> Self {
        Self { order: 4, k: 2, drift: None, a: 0.0, b: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let unsupported = |why: &str| Err(Error::UnsupportedProblem(format!("(n={}, k={}): {why}", self.order, self.k)));
        if !(self.a < self.b) {
            return unsupported("interval must satisfy a < b");
        }
        if self.a != 0.0 || self.b != 1.0 {
            return unsupported("only the interval [0, 1] is catalogued");
        }
        match (self.order, self.k, self.drift) {
            (2, 1, Some(b)) if b.is_finite() => Ok(()),
            (2, 1, _) => unsupported("second-order problems need a finite drift B"),
            (4, 2, None) => Ok(()),
            (4, 2, Some(_)) => unsupported("the clamped beam takes no drift"),
            _ => unsupported("no closed-form kernel in the catalogue"),
        }
    }

    /// Drift coefficient, zero for problems without one.
    pub fn drift_or_zero(&self) -> f64 {
        self.drift.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    SecondOrder { drift: f64 },
    ClampedBeam,
}

/// Signed Green's kernel `σ·g(t,s)` together with its weight `Φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKernel {
    problem: ProblemId,
    family: Family,
}

/// Builds the catalogued kernel for `problem`.
pub fn kernel_for(problem: ProblemId) -> Result<GreenKernel> {
    problem.validate()?;
    let family = match problem.order {
        2 => Family::SecondOrder { drift: problem.drift_or_zero() },
        _ => Family::ClampedBeam,
    };
    Ok(GreenKernel { problem, family })
}

/// `Φ(s) = (s-a)^{n-k} (b-s)^k`.
pub fn phi(problem: &ProblemId, s: f64) -> Result<f64> {
    if !(problem.a..=problem.b).contains(&s) {
        return Err(Error::Domain { name: "s", value: s, lo: problem.a, hi: problem.b });
    }
    Ok(phi_unchecked(problem, s))
}

pub(crate) fn phi_unchecked(problem: &ProblemId, s: f64) -> f64 {
    let left = (s - problem.a).powi((problem.order - problem.k) as i32);
    let right = (problem.b - s).powi(problem.k as i32);
    left * right
}

impl GreenKernel {
    pub fn problem(&self) -> &ProblemId {
        &self.problem
    }

    /// `σ = (-1)^{n-k}`, the sign turning the tabulated `g` into `G ≥ 0`.
    pub fn sign(&self) -> f64 {
        if (self.problem.order - self.problem.k) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Exponents `(n-k, k)` of the weight `Φ`.
    pub fn phi_exponents(&self) -> (u32, u32) {
        (self.problem.order - self.problem.k, self.problem.k)
    }

    pub fn phi(&self, s: f64) -> f64 {
        phi_unchecked(&self.problem, s)
    }

    /// The stored kernel `G(t,s) = σ·g(t,s) ≥ 0`.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        if s <= t || (t - s).abs() < 1e-12 {
            self.lower_branch(t, s)
        } else {
            self.upper_branch(t, s)
        }
    }

    /// Formula valid for `s ≤ t`.
    pub fn lower_branch(&self, t: f64, s: f64) -> f64 {
        match self.family {
            Family::SecondOrder { drift } => second_order_lower(drift, t, s),
            Family::ClampedBeam => s * s * (1.0 - t).powi(2) * (3.0 * t - s - 2.0 * s * t) / 6.0,
        }
    }

    /// Formula valid for `t < s`.
    pub fn upper_branch(&self, t: f64, s: f64) -> f64 {
        match self.family {
            Family::SecondOrder { drift } => second_order_upper(drift, t, s),
            Family::ClampedBeam => (1.0 - s).powi(2) * t * t * (3.0 * s - t - 2.0 * s * t) / 6.0,
        }
    }
}

// For B > 0 the exponentials are rewritten with negative arguments and for
// B < 0 the growing factor e^{-Bt} is folded into e^{B(s-t)}, so both forms
// stay finite and cancellation free for every finite B.
fn second_order_lower(b: f64, t: f64, s: f64) -> f64 {
    if b == 0.0 {
        s * (1.0 - t)
    } else if b > 0.0 {
        (b * (s - t)).exp() * -(b * (t - 1.0)).exp_m1() * -(-b * s).exp_m1() / (b * -(-b).exp_m1())
    } else {
        (b * s).exp_m1() * (b * (1.0 - t)).exp_m1() / (b * b.exp_m1())
    }
}

fn second_order_upper(b: f64, t: f64, s: f64) -> f64 {
    if b == 0.0 {
        t * (1.0 - s)
    } else if b > 0.0 {
        -(b * (s - 1.0)).exp_m1() * -(-b * t).exp_m1() / (b * -(-b).exp_m1())
    } else {
        (b * (s - t)).exp() * (b * t).exp_m1() * (b * (1.0 - s)).exp_m1() / (b * b.exp_m1())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_rejects_unknown_problems() {
        let bad = ProblemId { order: 3, k: 1, drift: None, a: 0.0, b: 1.0 };
        assert!(matches!(kernel_for(bad), Err(Error::UnsupportedProblem(_))));
        let bad = ProblemId { order: 2, k: 1, drift: Some(0.0), a: 1.0, b: 0.0 };
        assert!(kernel_for(bad).is_err());
        assert!(kernel_for(ProblemId { drift: Some(1.0), ..ProblemId::fourth_order() }).is_err());
    }

    #[test]
    fn worked_values() {
        let g = kernel_for(ProblemId::second_order(0.0)).unwrap();
        assert!((g.eval(2.0 / 3.0, 1.0 / 3.0) - 1.0 / 9.0).abs() < 1e-16);
        assert_eq!(g.lower_branch(0.5, 0.5), 0.25);
        assert_eq!(g.upper_branch(0.5, 0.5), 0.25);
        assert_eq!(g.sign(), -1.0);

        let g = kernel_for(ProblemId::fourth_order()).unwrap();
        assert_eq!(g.sign(), 1.0);
        assert!((g.eval(0.5, 0.25) - 1.0 / 384.0).abs() < 1e-17);
        assert!((g.eval(0.25, 0.5) - 1.0 / 384.0).abs() < 1e-17);
    }

    #[test]
    fn minus_two_pi_kernel_matches_reference_form() {
        let b = -2.0 * std::f64::consts::PI;
        let g = kernel_for(ProblemId::second_order(b)).unwrap();
        let tp = 2.0 * std::f64::consts::PI;
        let den = tp * (tp.exp() - 1.0);
        for &(t, s) in &[(0.7, 0.2), (0.3, 0.9), (0.5, 0.5), (0.95, 0.05)] {
            let reference = if s <= t {
                (1.0 - (-tp * s).exp()) * (tp.exp() - (tp * t).exp()) / den
            } else {
                ((tp * (1.0 - s)).exp() - 1.0) * ((tp * t).exp() - 1.0) / den
            };
            assert!((g.eval(t, s) - reference).abs() < 1e-14 * reference.max(1.0), "({t},{s})");
        }
    }

    #[test]
    fn positive_drift_matches_reference_form_and_small_drift_limit() {
        let b = (2.0 + 5f64.sqrt()).ln();
        let g = kernel_for(ProblemId::second_order(b)).unwrap();
        for &(t, s) in &[(0.7, 0.2), (0.3, 0.9)] {
            let reference = if s <= t {
                ((b * s).exp() - 1.0) * ((b * (1.0 - t)).exp() - 1.0) / (b * (b.exp() - 1.0))
            } else {
                ((b * s).exp() * ((b * (1.0 - s)).exp() - 1.0)) * (1.0 - (-b * t).exp()) / (b * (b.exp() - 1.0))
            };
            assert!((g.eval(t, s) - reference).abs() < 1e-15);
        }
        let g0 = kernel_for(ProblemId::second_order(0.0)).unwrap();
        for drift in [1e-9, -1e-9] {
            let g = kernel_for(ProblemId::second_order(drift)).unwrap();
            assert!((g.eval(0.6, 0.3) - g0.eval(0.6, 0.3)).abs() < 1e-8);
            assert!((g.eval(0.3, 0.6) - g0.eval(0.3, 0.6)).abs() < 1e-8);
        }
    }

    #[test]
    fn extreme_drifts_stay_finite() {
        for drift in [-800.0, -40.0, 40.0, 800.0] {
            let g = kernel_for(ProblemId::second_order(drift)).unwrap();
            for &(t, s) in &[(0.5, 0.5), (0.1, 0.9), (0.9, 0.1), (0.999, 0.001)] {
                let v = g.eval(t, s);
                assert!(v.is_finite() && v >= 0.0, "B={drift} ({t},{s}) -> {v}");
            }
        }
    }

    #[test]
    fn phi_values() {
        let p2 = ProblemId::second_order(0.0);
        assert_eq!(phi(&p2, 0.5).unwrap(), 0.25);
        assert_eq!(phi(&p2, 0.0).unwrap(), 0.0);
        assert!((phi(&ProblemId::fourth_order(), 1.0 / 3.0).unwrap() - 4.0 / 81.0).abs() < 1e-16);
        assert!(matches!(phi(&p2, 1.5), Err(Error::Domain { .. })));
    }
}
