//! Cone constants: the integrals of `Φ` and `k1·Φ` and the hypothesis
//! coefficients built from them.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::envelope::{is_minus_two_pi, Envelope};
use crate::error::{Error, Result};
use crate::kernels::ProblemId;
use crate::numeric::integrate;

/// Whether coefficients use the computed integrals or the tabulated lower
/// bounds (which give slightly stronger, still valid, hypotheses).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantsMode {
    #[default]
    Computed,
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeConstants {
    pub problem: ProblemId,
    pub k1_max: f64,
    pub k2_max: f64,
    pub m1: f64,
    pub i1: (f64, f64),
    /// `∫_a^b Φ`
    pub int_phi: f64,
    /// `∫_{I1} Φ`
    pub int_phi_i1: f64,
    /// `∫_{I1} k1 Φ`
    pub int_k1_phi_i1: f64,
    /// `1 / (K2 ∫Φ)`
    pub c_h1: f64,
    /// `K2 / (K1 ∫_{I1} k1 Φ)`
    pub c_h2: f64,
    /// `1 / (m1 ∫_{I1} Φ)`
    pub c_thm5i: f64,
    /// `K2 / m1`
    pub ratio: f64,
    /// `K2² / (K1 m1 ∫_{I1} k1 Φ)`, the limit threshold of (H3)/(H4).
    pub c_limit: f64,
    pub mode: ConstantsMode,
}

/// Tabulated lower bounds `(K1, ∫_{I1} k1 Φ, ∫_{I1} Φ)` for the transcendental
/// catalogue entries.
fn conservative_floors(env: &Envelope) -> Option<(f64, f64, f64)> {
    let p = env.problem();
    if p.order != 2 {
        return None;
    }
    let b = p.drift_or_zero();
    let log_golden = (2.0 + 5f64.sqrt()).ln();
    if (b.abs() - log_golden).abs() < 1e-12 {
        Some((0.5, 3587.0 / 100000.0, 957.0 / 10000.0))
    } else if is_minus_two_pi(b) {
        Some((47.0 / 125.0, 539.0 / 100000.0, 43.0 / 2500.0))
    } else {
        None
    }
}

pub fn cone_constants(env: &Envelope, tol: f64) -> Result<ConeConstants> {
    cone_constants_with_mode(env, tol, ConstantsMode::Computed)
}

pub fn cone_constants_with_mode(env: &Envelope, tol: f64, mode: ConstantsMode) -> Result<ConeConstants> {
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(Error::Domain { name: "tol", value: tol, lo: 1e-14, hi: 1e-6 });
    }
    let p = env.problem();
    let kernel = env.kernel();
    let (a1, b1) = env.i1();
    let int_phi = integrate(|s| kernel.phi(s), p.a, p.b, tol, &[])?;
    let int_phi_i1 = integrate(|s| kernel.phi(s), a1, b1, tol, &[])?;
    let int_k1_phi_i1 = integrate(|s| env.k1(s) * kernel.phi(s), a1, b1, tol, env.kinks())?;

    let (mut k1_max, mut ik1, mut iphi1) = (env.k1_max(), int_k1_phi_i1, int_phi_i1);
    if mode == ConstantsMode::Conservative {
        if let Some((k, i, j)) = conservative_floors(env) {
            k1_max = k;
            ik1 = i;
            iphi1 = j;
        }
    }
    let (k2, m1) = (env.k2_max(), env.m1());
    Ok(ConeConstants {
        problem: *p,
        k1_max: env.k1_max(),
        k2_max: k2,
        m1,
        i1: (a1, b1),
        int_phi,
        int_phi_i1,
        int_k1_phi_i1,
        c_h1: 1.0 / (k2 * int_phi),
        c_h2: k2 / (k1_max * ik1),
        c_thm5i: 1.0 / (m1 * iphi1),
        ratio: k2 / m1,
        c_limit: k2 * k2 / (k1_max * m1 * ik1),
        mode,
    })
}

/// `|value - claimed| ≤ tol`, with the comparison done against the exact
/// rational converted once to `f64`.
pub fn verify_rational(value: f64, claimed: Ratio<i64>, tol: f64) -> bool {
    let exact = *claimed.numer() as f64 / *claimed.denom() as f64;
    (value - exact).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::envelope_closed_form;

    #[test]
    fn verify_rational_examples() {
        assert!(verify_rational(0.16666666668, Ratio::new(1, 6), 1e-9));
        assert!(!verify_rational(11.0 / 96.0 + 1e-3, Ratio::new(11, 96), 1e-9));
        assert!(verify_rational(0.0172072, Ratio::new(43, 2500), 1e-4));
    }

    #[test]
    fn tolerance_outside_range_is_rejected() {
        let env = envelope_closed_form(ProblemId::second_order(0.0)).unwrap();
        assert!(cone_constants(&env, 1e-3).is_err());
        assert!(cone_constants(&env, 1e-16).is_err());
    }

    #[test]
    fn conservative_mode_uses_tabulated_floors() {
        let env = envelope_closed_form(ProblemId::second_order(-2.0 * std::f64::consts::PI)).unwrap();
        let exact = cone_constants(&env, 1e-12).unwrap();
        let cons = cone_constants_with_mode(&env, 1e-12, ConstantsMode::Conservative).unwrap();
        assert!((cons.c_thm5i - 10000.0 / 43.0).abs() < 1e-9);
        assert!(cons.c_thm5i > exact.c_thm5i);
        assert!(cons.c_h2 > exact.c_h2);
        let env0 = envelope_closed_form(ProblemId::second_order(0.0)).unwrap();
        let a = cone_constants(&env0, 1e-12).unwrap();
        let b = cone_constants_with_mode(&env0, 1e-12, ConstantsMode::Conservative).unwrap();
        assert_eq!(a.c_h2, b.c_h2);
    }
}
