//! Piecewise-defined nonlinearities `f(t,u) ≥ 0`, one expression per `u`-range.

use crate::error::{Error, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Right end of the branch's `u`-range; `f64::INFINITY` for the last one.
    pub upto: f64,
    /// Whether `u = upto` belongs to this branch (otherwise to the next).
    pub inclusive: bool,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    branches: Vec<Branch>,
    domain: (f64, f64),
}

const CONTINUITY_SAMPLES: usize = 50;
const CONTINUITY_RTOL: f64 = 1e-9;

impl Nonlinearity {
    /// Builds and validates a nonlinearity on `t ∈ domain`.
    pub fn new(branches: Vec<Branch>, domain: (f64, f64)) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidNonlinearity(msg));
        if branches.is_empty() {
            return bad("at least one branch is required".into());
        }
        let mut prev = 0.0;
        for (i, br) in branches.iter().enumerate() {
            let last = i + 1 == branches.len();
            if last && br.upto != f64::INFINITY {
                return bad(format!("last branch must extend to infinity, found upto = {}", br.upto));
            }
            if !last && !(br.upto.is_finite() && br.upto > prev) {
                return bad(format!("branch {} boundary {} must be finite and exceed {prev}", i + 1, br.upto));
            }
            prev = br.upto;
        }
        let f = Self { branches, domain };
        f.check_continuity()?;
        f.check_nonnegative()?;
        Ok(f)
    }

    /// Convenience constructor from `(upto, expression)` pairs with
    /// inclusive right ends.
    pub fn from_pieces(pieces: &[(f64, &str)], domain: (f64, f64)) -> Result<Self> {
        let branches = pieces
            .iter()
            .map(|&(upto, src)| Ok(Branch { upto, inclusive: true, expr: Expr::parse(src)? }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(branches, domain)
    }

    /// A single expression valid for every `u ≥ 0`.
    pub fn single(src: &str, domain: (f64, f64)) -> Result<Self> {
        Self::from_pieces(&[(f64::INFINITY, src)], domain)
    }

    pub fn zero(domain: (f64, f64)) -> Self {
        Self::single("0", domain).expect("the zero nonlinearity is valid")
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Finite branch boundaries in increasing order.
    pub fn boundaries(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.upto).filter(|u| u.is_finite()).collect()
    }

    fn branch_index(&self, u: f64) -> usize {
        self.branches
            .iter()
            .position(|b| u < b.upto || (u == b.upto && b.inclusive))
            .unwrap_or(self.branches.len() - 1)
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        self.branches[self.branch_index(u)].expr.eval(t, u)
    }

    /// Splits `[lo, hi]` at the branch boundaries lying strictly inside it.
    pub fn segments(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![lo];
        cuts.extend(self.boundaries().into_iter().filter(|&x| x > lo && x < hi));
        cuts.push(hi);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    fn t_samples(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let (a, b) = self.domain;
        (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
    }

    fn check_continuity(&self) -> Result<()> {
        for (i, pair) in self.branches.windows(2).enumerate() {
            let u = pair[0].upto;
            for t in self.t_samples(CONTINUITY_SAMPLES) {
                let left = pair[0].expr.eval(t, u);
                let right = pair[1].expr.eval(t, u);
                if (left - right).abs() > CONTINUITY_RTOL * left.abs().max(right.abs()).max(1.0) {
                    return Err(Error::InvalidNonlinearity(format!(
                        "branches {} and {} disagree at u = {u}, t = {t}: {left} vs {right}",
                        i + 1,
                        i + 2
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_nonnegative(&self) -> Result<()> {
        let top = self.boundaries().last().map_or(1.0, |&b| 2.0 * b.max(0.5));
        for (lo, hi) in self.segments(0.0, top) {
            for j in 0..=64 {
                let u = lo + (hi - lo) * j as f64 / 64.0;
                for t in self.t_samples(CONTINUITY_SAMPLES) {
                    let v = self.eval(t, u);
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(Error::InvalidNonlinearity(format!(
                            "f({t}, {u}) = {v} is not a finite nonnegative number"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const I: (f64, f64) = (0.0, 1.0);

    #[test]
    fn branch_selection_respects_inclusivity() {
        let branches = vec![
            Branch { upto: 1.0, inclusive: false, expr: Expr::parse("u").unwrap() },
            Branch { upto: f64::INFINITY, inclusive: true, expr: Expr::parse("u^2").unwrap() },
        ];
        let f = Nonlinearity::new(branches, I).unwrap();
        assert_eq!(f.branch_index(1.0), 1);
        assert_eq!(f.eval(0.0, 3.0), 9.0);
        assert_eq!(f.segments(0.0, 2.0), vec![(0.0, 1.0), (1.0, 2.0)]);
        assert_eq!(f.segments(1.5, 2.0), vec![(1.5, 2.0)]);
    }

    #[test]
    fn rejects_gaps_discontinuities_and_negative_values() {
        assert!(Nonlinearity::from_pieces(&[(1.0, "u")], I).is_err());
        assert!(Nonlinearity::from_pieces(&[(1.0, "u"), (0.5, "u"), (f64::INFINITY, "u")], I).is_err());
        let jump = Nonlinearity::from_pieces(&[(14.0, "u"), (f64::INFINITY, "14.5")], I);
        assert!(matches!(jump, Err(Error::InvalidNonlinearity(m)) if m.contains("u = 14")));
        assert!(Nonlinearity::single("u - 1", I).is_err());
        assert!(Nonlinearity::single("t - 2*t", (0.0, 1.0)).is_err());
    }

    #[test]
    fn continuous_piecewise_example_is_accepted() {
        let f = Nonlinearity::from_pieces(
            &[(16.0, "12*(31/28*t + 25/28)*u^3"), (f64::INFINITY, "49152*(31/28*t + 25/28)")],
            I,
        )
        .unwrap();
        assert_eq!(f.boundaries(), vec![16.0]);
        assert!((f.eval(1.0, 20.0) - 98304.0).abs() < 1e-9);
    }
}
