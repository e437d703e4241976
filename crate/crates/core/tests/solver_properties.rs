//! Cross-module solver properties: every converged inner solve must survive
//! an independent stationarity recheck, accepted iterates stay feasible and
//! monotone, and oracle counts scale sanely with the tolerance.

use ialm_core::lagrangian;
use ialm_core::points::{DualPoint, PrimalPoint};
use ialm_core::problem::{Problem, ProximalTerm};
use ialm_core::problems::{
    BasisPursuitInstance, ClusteringInstance, GenEigInstance, QuadraticProblem, SpectrumKind,
};
use ialm_core::stationarity;
use ialm_core::subsolvers::{self, ApgmOptions, ProjGradOptions, SubsolverKind};
use ialm_core::linalg;

fn recheck(prob: &dyn Problem, x: &PrimalPoint, y: &DualPoint, beta: f64, eps: f64) {
    let rep = stationarity::first_order_residual(prob, x, y, beta).unwrap();
    assert!(
        rep.grad_residual <= 1.05 * eps,
        "independent recheck failed: residual {} vs eps {}",
        rep.grad_residual,
        eps
    );
}

#[test]
fn apgm_results_pass_independent_recheck_on_all_problems() {
    let eps = 1e-6;

    // Generalized eigenvalue problem.
    let inst = GenEigInstance::generate(12, SpectrumKind::PolyDecay(1.0), 100).unwrap();
    let prob = inst.build().unwrap();
    let mut rng = linalg::seeded_rng(1);
    let x0 = PrimalPoint::new(linalg::random_unit_vector(12, &mut rng)).unwrap();
    let y = DualPoint::from_slice(&[0.3]).unwrap();
    let res = subsolvers::apgm(&prob, &y, 8.0, &x0, eps, &ApgmOptions::default()).unwrap();
    assert!(res.converged);
    recheck(&prob, &res.x, &y, 8.0, eps);

    // Basis pursuit with planted signal, warm-started near the solution.
    let (inst, _) = BasisPursuitInstance::generate(20, 10, 3, 1e-4, 101).unwrap();
    let prob = inst.build().unwrap();
    let x0 = inst.least_squares_init().unwrap();
    let y = DualPoint::zeros(10);
    let res = subsolvers::apgm(&prob, &y, 10.0, &x0, eps, &ApgmOptions::default()).unwrap();
    assert!(res.converged);
    recheck(&prob, &res.x, &y, 10.0, eps);

    // Clustering (indicator term): iterates must also stay in the set.
    let (inst, _) = ClusteringInstance::synthetic_blobs(2, 4, 2, 8.0, 102).unwrap();
    let prob = inst.build().unwrap();
    let mut rng = linalg::seeded_rng(2);
    let raw = linalg::standard_normal_vector(prob.dim_primal(), &mut rng);
    let x0 = match prob.proximal_term() {
        ProximalTerm::Indicator(set) => PrimalPoint::new(set.project(&raw)).unwrap(),
        _ => unreachable!(),
    };
    let y = DualPoint::zeros(prob.dim_constraint());
    let res = subsolvers::apgm(&prob, &y, 4.0, &x0, eps, &ApgmOptions::default()).unwrap();
    assert!(res.converged);
    recheck(&prob, &res.x, &y, 4.0, eps);
    if let ProximalTerm::Indicator(set) = prob.proximal_term() {
        assert!(set.contains(&res.x, 1e-9));
    }
}

#[test]
fn accepted_iterates_are_monotone_in_the_augmented_lagrangian() {
    let (inst, _) = ClusteringInstance::synthetic_blobs(2, 5, 2, 6.0, 200).unwrap();
    let prob = inst.build().unwrap();
    let mut rng = linalg::seeded_rng(3);
    let raw = linalg::standard_normal_vector(prob.dim_primal(), &mut rng) * 0.7;
    let x0 = match prob.proximal_term() {
        ProximalTerm::Indicator(set) => PrimalPoint::new(set.project(&raw)).unwrap(),
        _ => unreachable!(),
    };
    let y = DualPoint::new(linalg::standard_normal_vector(prob.dim_constraint(), &mut rng))
        .unwrap();
    let beta = 5.0;
    let l0 = lagrangian::value(&prob, &x0, &y, beta).unwrap();

    let apgm_res =
        subsolvers::apgm(&prob, &y, beta, &x0, 1e-7, &ApgmOptions::default()).unwrap();
    let l_apgm = lagrangian::value(&prob, &apgm_res.x, &y, beta).unwrap();
    assert!(l_apgm <= l0 + 1e-12 * (1.0 + l0.abs()));

    let pg_res =
        subsolvers::projected_gradient(&prob, &y, beta, &x0, 1e-7, &ProjGradOptions::default())
            .unwrap();
    let l_pg = lagrangian::value(&prob, &pg_res.x, &y, beta).unwrap();
    assert!(l_pg <= l0 + 1e-12 * (1.0 + l0.abs()));
}

#[test]
fn momentum_beats_plain_descent_on_ill_conditioned_quadratics() {
    let prob = QuadraticProblem::ill_conditioned(50, 1000.0).unwrap();
    let x0 = PrimalPoint::new(nalgebra::DVector::from_element(50, 1.0)).unwrap();
    let y = DualPoint::zeros(0);
    let eps = 1e-6;
    let apgm_res = subsolvers::apgm(&prob, &y, 1.0, &x0, eps, &ApgmOptions::default()).unwrap();
    let pg_res =
        subsolvers::projected_gradient(&prob, &y, 1.0, &x0, eps, &ProjGradOptions::default())
            .unwrap();
    assert!(apgm_res.converged && pg_res.converged);
    assert!(
        apgm_res.iterations < pg_res.iterations,
        "apgm {} vs pg {}",
        apgm_res.iterations,
        pg_res.iterations
    );
}

#[test]
fn gradient_evals_grow_no_faster_than_inverse_tolerance() {
    // Cold-started APGM on a fixed subproblem, tolerance halved four times:
    // counts must stay below c / eps with c fitted at the first point
    // (factor-2 slack).
    let inst = GenEigInstance::generate(20, SpectrumKind::GaussianIid, 300).unwrap();
    let prob = inst.build().unwrap();
    let mut rng = linalg::seeded_rng(4);
    let x0 = PrimalPoint::new(linalg::random_unit_vector(20, &mut rng)).unwrap();
    let y = DualPoint::from_slice(&[0.1]).unwrap();
    let beta = 16.0;

    let eps0 = 1e-1;
    let mut counts = Vec::new();
    for halvings in 0..=4 {
        let eps = eps0 / f64::powi(2.0, halvings);
        let res = subsolvers::apgm(&prob, &y, beta, &x0, eps, &ApgmOptions::default()).unwrap();
        assert!(res.converged, "eps {eps}");
        counts.push((eps, res.oracle.grad_evals as f64));
    }
    let c = counts[0].1 * counts[0].0;
    for (eps, grads) in &counts[1..] {
        assert!(
            *grads <= 2.0 * c / eps,
            "grad evals {} exceed bound {} at eps {}",
            grads,
            2.0 * c / eps,
            eps
        );
    }
}

#[test]
fn subsolver_kind_dispatch_matches_direct_calls() {
    let prob = QuadraticProblem::identity(6).unwrap();
    let x0 = PrimalPoint::new(nalgebra::DVector::from_element(6, 1.0)).unwrap();
    let y = DualPoint::zeros(0);
    let direct = subsolvers::apgm(&prob, &y, 1.0, &x0, 1e-8, &ApgmOptions::default()).unwrap();
    let via_kind = subsolvers::run(
        &SubsolverKind::Apgm(ApgmOptions::default()),
        &prob,
        &y,
        1.0,
        &x0,
        1e-8,
    )
    .unwrap();
    assert_eq!(direct.x.as_vector(), via_kind.x.as_vector());
    assert_eq!(direct.oracle, via_kind.oracle);
}
