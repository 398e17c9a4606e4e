//! Built-in example problems.

use crate::config::{
    BranchSpec, CheckSection, NonlinearitySection, ProblemConfig, ProblemSection, Scalar, SolverSection,
    ThresholdSection,
};
use crate::hypotheses::TheoremId;

const F1: &[(&str, &str)] = &[
    ("1/28", "(1007/88 + 225/88*t)*50000000/1190651*u"),
    ("14", "(1007/88 + 225/88*t)*3125000/(58341899*u)"),
    ("inf", "(1007/88 + 225/88*t)*3125000/(58341899*u) + 10000/43*(u - 14)*u"),
];

const F2: &[(&str, &str)] = &[("16", "12*(31/28*t + 25/28)*u^3"), ("inf", "49152*(31/28*t + 25/28)")];

const FOURTH_TWO: &[(&str, &str)] = &[
    ("1/36", "1296*t"),
    ("33/4", "t/u^2"),
    ("inf", "64*t/35937*(u - 29/4)^5*u"),
];

// 519008 + 588t is the middle branch's value at u = 14, so f stays continuous
// there (a constant of 519204 would leave a jump).
const FOURTH_THREE: &[(&str, &str)] = &[
    ("1/2", "(2 + 3*t)*u^2"),
    ("14", "(u - 1/2)*u^4 + (2 + 3*t)*u^2"),
    ("inf", "519008 + 588*t"),
];

const DRIFTS: &[(&str, &str)] = &[("B0", "0"), ("Blog2p5", "log(2 + sqrt(5))"), ("Blog5m2", "log(sqrt(5) - 2)")];

fn branches(pieces: &[(&str, &str)]) -> NonlinearitySection {
    let n = pieces.len();
    NonlinearitySection {
        branches: pieces
            .iter()
            .enumerate()
            .map(|(i, &(upto, expr))| BranchSpec {
                upto: (i + 1 < n).then(|| Scalar::from(upto)),
                inclusive: true,
                expr: expr.to_string(),
            })
            .collect(),
    }
}

fn entry(name: &str, n: u32, drift: Option<&str>, f: &[(&str, &str)], theorem: TheoremId, pqr: [&str; 3]) -> ProblemConfig {
    ProblemConfig {
        name: Some(name.to_string()),
        problem: ProblemSection { n, k: n / 2, drift: drift.map(Scalar::from), i1: None },
        nonlinearity: branches(f),
        thresholds: ThresholdSection {
            theorem,
            p: Some(pqr[0].into()),
            q: Some(pqr[1].into()),
            r: Some(pqr[2].into()),
        },
        solver: SolverSection::default(),
        check: CheckSection::default(),
    }
}

const F1_PQR: [&str; 3] = ["1/28", "7/2", "15"];
const F2_PQR: [&str; 3] = ["1/2", "4", "16384"];

/// Every built-in configuration, in a fixed order.
pub fn corpus() -> Vec<ProblemConfig> {
    let mut out = vec![
        entry("F1-thm5.7", 2, Some("-2*pi"), F1, TheoremId::Thm5, F1_PQR),
        entry("F2-thm5.8", 2, Some("-2*pi"), F2, TheoremId::Thm6, F2_PQR),
    ];
    for &(tag, b) in DRIFTS {
        out.push(entry(&format!("F1-{tag}"), 2, Some(b), F1, TheoremId::Thm5, F1_PQR));
    }
    for &(tag, b) in DRIFTS {
        out.push(entry(&format!("F2-{tag}"), 2, Some(b), F2, TheoremId::Thm6, F2_PQR));
    }
    out.push(entry("fourth-thm5", 4, None, FOURTH_TWO, TheoremId::Thm5, ["1/16", "11/3", "27"]));
    out.push(entry("fourth-thm6", 4, None, FOURTH_THREE, TheoremId::Thm6, ["1/2", "56/9", "1444"]));
    out
}

pub fn corpus_names() -> Vec<String> {
    corpus().into_iter().filter_map(|c| c.name).collect()
}

pub fn corpus_entry(name: &str) -> Option<ProblemConfig> {
    corpus().into_iter().find(|c| c.name.as_deref() == Some(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_resolves() {
        let all = corpus();
        assert_eq!(all.len(), 10);
        for cfg in &all {
            cfg.resolve().unwrap_or_else(|e| panic!("{:?}: {e}", cfg.name));
        }
        assert!(corpus_entry("F2-thm5.8").is_some());
        assert!(corpus_entry("nope").is_none());
    }

    #[test]
    fn piecewise_examples_are_continuous_at_their_breaks() {
        let f1 = corpus_entry("F1-B0").unwrap().resolve().unwrap().nonlinearity;
        let c = |t: f64| 1007.0 / 88.0 + 225.0 / 88.0 * t;
        assert!((f1.eval(1.0, 1.0 / 28.0) - c(1.0) * 50000000.0 / 1190651.0 / 28.0).abs() < 1e-12);
        let f = corpus_entry("fourth-thm6").unwrap().resolve().unwrap().nonlinearity;
        assert!((f.eval(0.5, 14.0) - (519008.0 + 294.0)).abs() < 1e-9);
    }
}
