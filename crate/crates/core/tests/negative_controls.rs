use conebvp::corpus::corpus_entry;
use conebvp::hypotheses::check_theorem;
use conebvp::quadrature::cone_constants_with_mode;
use conebvp::HypothesisId;

/// Ids of the failing checks after overriding one threshold of a corpus entry.
fn failing(name: &str, which: char, value: f64) -> Vec<HypothesisId> {
    let r = corpus_entry(name).unwrap().resolve().unwrap();
    let mut th = r.thresholds;
    match which {
        'p' => th.p = Some(value),
        'q' => th.q = Some(value),
        _ => th.r = Some(value),
    }
    let c = cone_constants_with_mode(&r.envelope, r.constants_tol, r.mode).unwrap();
    let reports = check_theorem(r.theorem, &r.nonlinearity, &c, th, &r.check).unwrap();
    reports.iter().filter(|h| !h.verdict.passed()).map(|h| h.id).collect()
}

#[test]
fn unperturbed_entries_pass() {
    for name in ["F1-thm5.7", "F2-thm5.8", "fourth-thm5", "fourth-thm6"] {
        let r = corpus_entry(name).unwrap().resolve().unwrap();
        let (p, q, rr) = (r.thresholds.p.unwrap(), r.thresholds.q.unwrap(), r.thresholds.r.unwrap());
        assert!(failing(name, 'p', p).is_empty(), "{name}");
        assert!(failing(name, 'q', q).is_empty(), "{name}");
        assert!(failing(name, 'r', rr).is_empty(), "{name}");
    }
}

#[test]
fn first_example_single_threshold_perturbations() {
    assert_eq!(failing("F1-thm5.7", 'r', 5.0), [HypothesisId::Thm5I]);
    assert_eq!(failing("F1-thm5.7", 'q', 3.0), [HypothesisId::Thm5II]);
    assert_eq!(failing("F1-thm5.7", 'p', 1.0), [HypothesisId::Thm5III]);
}

#[test]
fn second_example_single_threshold_perturbations() {
    assert_eq!(failing("F2-thm5.8", 'r', 16.0), [HypothesisId::Thm6A]);
    assert_eq!(failing("F2-thm5.8", 'p', 0.6), [HypothesisId::Thm6B]);
    assert_eq!(failing("F2-thm5.8", 'q', 0.7), [HypothesisId::Thm6C]);
}

#[test]
fn fourth_order_single_threshold_perturbations() {
    assert_eq!(failing("fourth-thm5", 'r', 21.6), [HypothesisId::Thm5I]);
    assert_eq!(failing("fourth-thm5", 'q', 3.3), [HypothesisId::Thm5II]);
    assert_eq!(failing("fourth-thm5", 'p', 5.0 / 64.0), [HypothesisId::Thm5III]);
    assert_eq!(failing("fourth-thm6", 'r', 1200.0), [HypothesisId::Thm6A]);
    assert_eq!(failing("fourth-thm6", 'p', 5.0), [HypothesisId::Thm6B]);
    assert_eq!(failing("fourth-thm6", 'q', 5.6), [HypothesisId::Thm6C]);
}

#[test]
fn drift_transfers_keep_the_single_flip() {
    for name in ["F1-B0", "F1-Blog2p5", "F1-Blog5m2"] {
        assert_eq!(failing(name, 'q', 3.0), [HypothesisId::Thm5II], "{name}");
    }
    for name in ["F2-B0", "F2-Blog2p5", "F2-Blog5m2"] {
        assert_eq!(failing(name, 'r', 16.0), [HypothesisId::Thm6A], "{name}");
    }
}
