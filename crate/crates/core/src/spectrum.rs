//! Range of the potential `M` for which the kernel keeps property (Pg1).

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numeric::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
}

impl AdmissibleInterval {
    pub fn contains(&self, m: f64) -> bool {
        let above = if self.lower_open { m > self.lower } else { m >= self.lower };
        let below = if self.upper_open { m < self.upper } else { m <= self.upper };
        above && below
    }
}

/// `M ∈ (-∞, (B² + 4π²)/4)` for `u'' + B u' + M u`.
pub fn admissible_m_second_order(drift: f64) -> AdmissibleInterval {
    AdmissibleInterval {
        lower: f64::NEG_INFINITY,
        upper: (drift * drift + 4.0 * PI * PI) / 4.0,
        lower_open: true,
        upper_open: true,
    }
}

/// Least positive root of `cos λ cosh λ = 1`.
pub fn lambda1() -> Result<f64> {
    brent(|l| l.cos() * l.cosh() - 1.0, 4.0, 5.0, 1e-15)
}

/// Least positive root of `tan(λ/√2) = tanh(λ/√2)`, solved in `x = λ/√2`
/// away from the poles of `tan`.
pub fn lambda2() -> Result<f64> {
    let x = brent(|x| x.tan() - x.tanh(), PI + 1e-6, 1.5 * PI - 1e-6, 1e-15)?;
    Ok(SQRT_2 * x)
}

/// `M ∈ (-λ1⁴, λ2⁴]` for the clamped beam `u'''' + M u`.
pub fn admissible_m_fourth_order() -> Result<AdmissibleInterval> {
    let l1 = lambda1()?;
    let l2 = lambda2()?;
    Ok(AdmissibleInterval { lower: -l1.powi(4), upper: l2.powi(4), lower_open: true, upper_open: false })
}
