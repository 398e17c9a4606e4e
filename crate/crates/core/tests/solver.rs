use std::f64::consts::PI;

use conebvp::certificate::certify_solutions;
use conebvp::solver::{discretize, find_fixed_points, seed_amplitudes, SolverOptions};
use conebvp::{envelope_for, Nonlinearity, ProblemId, TheoremId, Thresholds};

const UNIT: (f64, f64) = (0.0, 1.0);

/// Spectral radius of `G·diag(w)` (or of the product-integration operator) by
/// power iteration; both matrices are positive.
fn spectral_radius(problem: ProblemId, n: usize) -> f64 {
    radius(problem, n, false)
}

fn radius(problem: ProblemId, n: usize, product: bool) -> f64 {
    let env = envelope_for(problem).unwrap();
    let d = discretize(env.kernel(), n);
    let g = d.kernel_matrix();
    let a = d.operator();
    let w = d.weights();
    let entry = |i: usize, j: usize| if product { a[(i, j)] } else { g[(i, j)] * w[j] };
    let mut v = vec![1.0; d.len()];
    let mut rho = 0.0;
    for _ in 0..500 {
        let next: Vec<f64> = (0..d.len()).map(|i| (0..d.len()).map(|j| entry(i, j) * v[j]).sum()).collect();
        let norm = next.iter().copied().fold(0.0, f64::max);
        let done = (norm - rho).abs() < 1e-15 * norm;
        rho = norm;
        v = next.iter().map(|x| x / norm).collect();
        if done {
            break;
        }
    }
    rho
}

#[test]
fn spectral_radius_matches_principal_eigenvalues() {
    // The plain rule only converges at second order because of the kink on the diagonal.
    for (product, tol) in [(false, 1e-4), (true, 1e-9)] {
        for b in [0.0, 1.5, -2.0] {
            let rho = radius(ProblemId::second_order(b), 128, product);
            assert!((rho * (b * b + 4.0 * PI * PI) / 4.0 - 1.0).abs() < tol, "B={b}: {rho}");
        }
        let rho = radius(ProblemId::fourth_order(), 128, product);
        assert!((rho * 500.563_901_740_6 - 1.0).abs() < tol, "{rho}");
    }
}

#[test]
fn subcritical_linear_problem_has_only_the_zero_solution() {
    let opts = SolverOptions { nodes: 64, seeds: 6, ..Default::default() };
    for problem in [ProblemId::second_order(0.0), ProblemId::second_order(-1.0), ProblemId::fourth_order()] {
        let c = 0.9 / spectral_radius(problem, 64);
        let env = envelope_for(problem).unwrap();
        let f = Nonlinearity::single(&format!("{c}*u"), UNIT).unwrap();
        let out = find_fixed_points(&env, &f, &seed_amplitudes(0.1, 100.0, opts.seeds), &opts);
        assert_eq!(out.solutions.len(), 1, "{problem:?}");
        assert!(out.solutions[0].gamma < 1e-8);
        assert!(out.unconverged_seeds.is_empty());
    }
}

#[test]
fn zero_nonlinearity_fails_every_multiplicity_certificate() {
    let env = envelope_for(ProblemId::second_order(-2.0 * PI)).unwrap();
    let f = Nonlinearity::zero(UNIT);
    let opts = SolverOptions { nodes: 64, seeds: 8, ..Default::default() };
    let out = find_fixed_points(&env, &f, &seed_amplitudes(1e-3, 1e3, opts.seeds), &opts);
    assert_eq!(out.solutions.len(), 1);
    assert_eq!(out.solutions[0].gamma, 0.0);
    assert!(out.solutions[0].values.iter().all(|&v| v == 0.0));
    let th = Thresholds { p: Some(1.0 / 28.0), q: Some(3.5), r: Some(15.0) };
    for theorem in [TheoremId::Thm2, TheoremId::Thm5, TheoremId::Thm6] {
        let cert = certify_solutions(&out.solutions, theorem, th);
        assert!(!cert.verdict.passed(), "{theorem}");
        assert!(cert.failure.is_some());
    }
}

#[test]
fn superlinear_problem_solution_satisfies_its_residual_certificates() {
    // u'' + u² + 1 = 0 has a small positive solution near the linear response.
    let env = envelope_for(ProblemId::second_order(0.0)).unwrap();
    let f = Nonlinearity::single("u^2 + 1", UNIT).unwrap();
    let opts = SolverOptions { nodes: 64, seeds: 4, ..Default::default() };
    let out = find_fixed_points(&env, &f, &seed_amplitudes(0.05, 0.5, opts.seeds), &opts);
    let s = out.solutions.iter().min_by(|a, b| a.gamma.total_cmp(&b.gamma)).unwrap();
    assert!(s.gamma > 0.125 && s.gamma < 0.2, "{}", s.gamma);
    assert!(s.fixed_point_residual <= 1e-10);
    assert!(s.ode_residual <= 1e-6);
    assert!(s.boundary_residual <= 1e-12);
    assert!(s.cone_margin >= -1e-12);
    assert!(s.mesh_change.unwrap() <= 1e-9);
}
