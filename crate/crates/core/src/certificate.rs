//! Matching computed solutions to the localization slots a theorem predicts.

use serde::{Deserialize, Serialize};

use crate::hypotheses::{TheoremId, Thresholds, Verdict};
use crate::solver::BvpSolution;

/// The functionals a slot looks at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub gamma: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl From<&BvpSolution> for Functionals {
    fn from(s: &BvpSolution) -> Self {
        Self { gamma: s.gamma, alpha: s.alpha, theta: s.theta }
    }
}

/// One strict inequality `lhs < rhs` between functionals and thresholds.
#[derive(Debug, Clone, Copy)]
enum Side {
    Gamma,
    Alpha,
    Theta,
    Value(f64),
}

impl Side {
    fn get(self, u: &Functionals) -> f64 {
        match self {
            Side::Gamma => u.gamma,
            Side::Alpha => u.alpha,
            Side::Theta => u.theta,
            Side::Value(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    name: String,
    conditions: Vec<(Side, Side)>,
}

impl Slot {
    fn new(name: &str, conditions: Vec<(Side, Side)>) -> Self {
        Self { name: name.to_string(), conditions }
    }

    /// Smallest `rhs - lhs` over the slot's conditions; positive iff the slot accepts `u`.
    fn margin(&self, u: &Functionals) -> f64 {
        self.conditions.iter().map(|&(l, r)| r.get(u) - l.get(u)).fold(f64::INFINITY, f64::min)
    }
}

fn slots(theorem: TheoremId, th: &Thresholds) -> Vec<Slot> {
    use Side::*;
    let p = th.p.unwrap_or(f64::NAN);
    let q = th.q.unwrap_or(f64::NAN);
    let r = th.r.unwrap_or(f64::NAN);
    match theorem {
        TheoremId::Thm2 => {
            let (lo, hi) = (p.min(q), p.max(q));
            vec![Slot::new("min(p,q) < γ < max(p,q)", vec![(Value(lo), Gamma), (Gamma, Value(hi))])]
        }
        TheoremId::Thm3 => vec![
            Slot::new("0 < γ < p", vec![(Value(0.0), Gamma), (Gamma, Value(p))]),
            Slot::new("p < γ", vec![(Value(p), Gamma)]),
        ],
        TheoremId::Thm4 => vec![
            Slot::new("0 < γ < q", vec![(Value(0.0), Gamma), (Gamma, Value(q))]),
            Slot::new("q < γ", vec![(Value(q), Gamma)]),
        ],
        TheoremId::Thm5 => vec![
            Slot::new("p < γ, θ < q", vec![(Value(p), Gamma), (Theta, Value(q))]),
            Slot::new("q < θ, α < r", vec![(Value(q), Theta), (Alpha, Value(r))]),
        ],
        TheoremId::Thm6 => vec![
            Slot::new("θ < p, γ ≤ r", vec![(Theta, Value(p)), (Gamma, Value(r))]),
            Slot::new("q < α, γ ≤ r", vec![(Value(q), Alpha), (Gamma, Value(r))]),
            Slot::new("p < θ, α < q, γ ≤ r", vec![(Value(p), Theta), (Alpha, Value(q)), (Gamma, Value(r))]),
        ],
        TheoremId::Cor24 => vec![Slot::new("0 < γ", vec![(Value(0.0), Gamma)])],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub slot: String,
    /// Index into the certificate's solution list.
    pub solution: Option<usize>,
    #[serde(with = "crate::float_serde")]
    pub margin: f64,
    /// Every solution that satisfies this slot on its own.
    pub candidates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertificateFailure {
    SlotUnfilled { slot: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityCertificate {
    pub theorem: TheoremId,
    pub thresholds: Thresholds,
    pub solutions: Vec<Functionals>,
    pub slots: Vec<SlotAssignment>,
    pub verdict: Verdict,
    /// Some slot had more than one candidate, so the assignment was a choice.
    pub ambiguous: bool,
    pub failure: Option<CertificateFailure>,
}

/// Assigns distinct solutions to the theorem's slots, maximizing the
/// smallest slot margin over all injective assignments.
pub fn certify(solutions: &[Functionals], theorem: TheoremId, thresholds: Thresholds) -> MultiplicityCertificate {
    let slots = slots(theorem, &thresholds);
    let margins: Vec<Vec<f64>> = slots.iter().map(|s| solutions.iter().map(|u| s.margin(u)).collect()).collect();
    let candidates: Vec<Vec<usize>> =
        margins.iter().map(|row| (0..row.len()).filter(|&j| row[j] > 0.0).collect()).collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(slots.len());
    search(&candidates, &margins, &mut current, &mut best);

    let (assignment, verdict, failure) = match best {
        Some((_, pick)) => (pick.into_iter().map(Some).collect::<Vec<_>>(), Verdict::Pass, None),
        None => {
            // Report the first slot that cannot be filled, given a best-effort
            // greedy fill of the earlier ones.
            let mut used = Vec::new();
            let mut out = Vec::new();
            let mut missing = None;
            for (i, cands) in candidates.iter().enumerate() {
                let pick = cands
                    .iter()
                    .copied()
                    .filter(|j| !used.contains(j))
                    .max_by(|&a, &b| margins[i][a].total_cmp(&margins[i][b]));
                if let Some(j) = pick {
                    used.push(j);
                } else if missing.is_none() {
                    missing = Some(slots[i].name.clone());
                }
                out.push(pick);
            }
            let slot = missing.unwrap_or_else(|| slots[0].name.clone());
            (out, Verdict::Fail, Some(CertificateFailure::SlotUnfilled { slot }))
        }
    };

    let slot_reports = slots
        .iter()
        .enumerate()
        .map(|(i, s)| SlotAssignment {
            slot: s.name.clone(),
            solution: assignment[i],
            margin: assignment[i].map_or(f64::NEG_INFINITY, |j| margins[i][j]),
            candidates: candidates[i].clone(),
        })
        .collect::<Vec<_>>();
    MultiplicityCertificate {
        theorem,
        thresholds,
        solutions: solutions.to_vec(),
        ambiguous: candidates.iter().any(|c| c.len() > 1),
        slots: slot_reports,
        verdict,
        failure,
    }
}

fn search(candidates: &[Vec<usize>], margins: &[Vec<f64>], current: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>) {
    let depth = current.len();
    if depth == candidates.len() {
        let worst = current.iter().enumerate().map(|(i, &j)| margins[i][j]).fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| worst > b.0) {
            *best = Some((worst, current.clone()));
        }
        return;
    }
    for &j in &candidates[depth] {
        if !current.contains(&j) {
            current.push(j);
            search(candidates, margins, current, best);
            current.pop();
        }
    }
}

/// Convenience wrapper taking solver output directly.
pub fn certify_solutions(solutions: &[BvpSolution], theorem: TheoremId, thresholds: Thresholds) -> MultiplicityCertificate {
    let f: Vec<Functionals> = solutions.iter().map(Functionals::from).collect();
    certify(&f, theorem, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(gamma: f64, alpha: f64, theta: f64) -> Functionals {
        Functionals { gamma, alpha, theta }
    }

    fn th(p: f64, q: f64, r: Option<f64>) -> Thresholds {
        Thresholds { p: Some(p), q: Some(q), r }
    }

    #[test]
    fn thm2_single_solution_between_thresholds() {
        let c = certify(&[u(2.0, 1.0, 2.0)], TheoremId::Thm2, th(3.0, 1.0, None));
        assert_eq!(c.verdict, Verdict::Pass);
        let c = certify(&[u(4.0, 1.0, 2.0)], TheoremId::Thm2, th(3.0, 1.0, None));
        assert_eq!(c.verdict, Verdict::Fail);
    }

    #[test]
    fn empty_list_names_the_missing_slot() {
        let c = certify(&[], TheoremId::Thm5, th(1.0, 2.0, Some(3.0)));
        assert_eq!(c.verdict, Verdict::Fail);
        assert_eq!(c.failure, Some(CertificateFailure::SlotUnfilled { slot: "p < γ, θ < q".into() }));
    }

    #[test]
    fn thm6_needs_three_distinct_solutions() {
        let sols = [u(0.0, 0.0, 0.0), u(10.0, 6.0, 10.0), u(2.0, 0.8, 2.0)];
        let c = certify(&sols, TheoremId::Thm6, th(0.5, 4.0, Some(16.0)));
        assert_eq!(c.verdict, Verdict::Pass);
        assert_eq!(c.slots.iter().map(|s| s.solution).collect::<Vec<_>>(), vec![Some(0), Some(1), Some(2)]);
        let c = certify(&sols[..2], TheoremId::Thm6, th(0.5, 4.0, Some(16.0)));
        assert!(matches!(c.failure, Some(CertificateFailure::SlotUnfilled { ref slot }) if slot.starts_with("p < θ")));
    }

    #[test]
    fn one_solution_cannot_fill_two_slots() {
        // satisfies both Thm3 slots' conditions individually only if p is crossed; here it fits slot 2 only
        let c = certify(&[u(5.0, 1.0, 5.0)], TheoremId::Thm3, th(2.0, 0.0, None));
        assert_eq!(c.verdict, Verdict::Fail);
        assert_eq!(c.slots[1].candidates, vec![0]);
    }

    #[test]
    fn assignment_prefers_larger_worst_margin() {
        let sols = [u(1.5, 0.5, 1.0), u(1.9, 0.5, 1.0), u(3.0, 2.0, 3.0)];
        let c = certify(&sols, TheoremId::Thm5, th(1.0, 2.0, Some(3.0)));
        assert_eq!(c.verdict, Verdict::Pass);
        assert!(c.ambiguous);
        assert_eq!(c.slots[0].solution, Some(1));
    }
}
