//! Bookkeeping laws of the outer loop: the tolerance/penalty/dual-step
//! schedules are exact identities on every run, the dual norm stays under
//! its certified bound, and runs are bit-deterministic.

use ialm_core::ialm::{self, IalmConfig};
use ialm_core::linalg;
use ialm_core::points::{DualPoint, PrimalPoint};
use ialm_core::problems::{GenEigInstance, SpectrumKind};
use ialm_core::stationarity::Mode;
use ialm_core::subsolvers::{ApgmOptions, SubsolverKind, TrustRegionOptions};
use nalgebra::DMatrix;

fn default_geneig_run() -> (ialm_core::SolveReport, GenEigInstance) {
    let inst = GenEigInstance::generate(10, SpectrumKind::PolyDecay(1.0), 77).unwrap();
    let prob = inst.build().unwrap();
    let mut rng = linalg::seeded_rng(5);
    let x1 = PrimalPoint::new(linalg::random_unit_vector(10, &mut rng)).unwrap();
    let y0 = DualPoint::zeros(1);
    let cfg = IalmConfig::default();
    (ialm::solve(&prob, &cfg, &x1, &y0).unwrap(), inst)
}

#[test]
fn schedule_laws_hold_exactly() {
    let (report, _) = default_geneig_run();
    assert!(report.certified);
    let cfg = &report.config;
    let ln2 = std::f64::consts::LN_2;
    for (i, row) in report.trace.iter().enumerate() {
        assert_eq!(row.k, i + 1);
        // Tolerance law: eps * beta = 1 exactly (dyadic penalties).
        assert_eq!(row.eps * row.beta, 1.0, "row {}", row.k);
        // Penalty law: beta_{k+1} / beta_k = b exactly.
        if i + 1 < report.trace.len() {
            assert_eq!(report.trace[i + 1].beta, row.beta * cfg.penalty_base);
            assert_eq!(report.trace[i + 1].beta / row.beta, cfg.penalty_base);
        }
        // Dual steps never exceed sigma1.
        assert!(row.sigma <= cfg.sigma1);
        // Summable envelope on the dual increment.
        let kk = (row.k + 1) as f64;
        let envelope =
            cfg.sigma1 * report.a1_norm * ln2 * ln2 / (kk * ((kk + 1.0).ln()).powi(2));
        assert!(
            row.sigma * row.feasibility <= envelope * (1.0 + 1e-12),
            "row {}: {} vs {}",
            row.k,
            row.sigma * row.feasibility,
            envelope
        );
        // Dual norm stays below the certified bound.
        assert!(row.y_norm <= report.y_max_bound);
    }
}

#[test]
fn dual_ascent_increments_match_the_rule_exactly() {
    let inst = GenEigInstance::generate(8, SpectrumKind::GaussianIid, 11).unwrap();
    let prob = inst.build().unwrap();
    let mut rng = linalg::seeded_rng(6);
    let x1 = PrimalPoint::new(linalg::random_unit_vector(8, &mut rng)).unwrap();
    let y0 = DualPoint::zeros(1);
    let cfg = IalmConfig::default();

    let mut prev_y = y0.as_vector().clone();
    let mut rows = Vec::new();
    let report = ialm::solve_observed(&prob, &cfg, &x1, &y0, &mut |row, _x, y| {
        let increment = (y - &prev_y).norm();
        rows.push((row.k, increment, row.sigma, row.feasibility));
        prev_y = y.clone();
    })
    .unwrap();
    assert!(report.certified);
    for (k, increment, sigma, feas) in rows {
        let expect = sigma * feas;
        assert!(
            (increment - expect).abs() <= 1e-13 * (1.0 + expect),
            "row {k}: increment {increment} vs sigma*feas {expect}"
        );
    }
}

#[test]
fn feasibility_penalty_product_stays_bounded_when_regularity_holds() {
    let (report, _) = default_geneig_run();
    let nus: Vec<f64> = report.trace.iter().filter_map(|r| r.nu).collect();
    assert!(!nus.is_empty());
    let nu_floor = nus.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(nu_floor > 0.0, "regularity estimate collapsed");

    let mut products: Vec<f64> = report
        .trace
        .iter()
        .map(|r| r.feasibility * r.beta)
        .collect();
    products.sort_by(|a, b| a.total_cmp(b));
    let median = products[products.len() / 2];
    let max = *products.last().unwrap();
    assert!(
        max <= 10.0 * median,
        "feasibility * beta spread too wide: max {max} vs median {median}"
    );
}

#[test]
fn geneig_solve_matches_dense_oracle() {
    // 10x10 pencil with B = I and known spectrum.
    let mut rng = linalg::seeded_rng(21);
    let q = linalg::random_orthogonal(10, &mut rng);
    let diag = nalgebra::DVector::from_fn(10, |i, _| (i + 1) as f64 / 10.0);
    let c = &q * DMatrix::from_diagonal(&diag) * q.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let inst = GenEigInstance::new(DMatrix::identity(10, 10), c).unwrap();
    let prob = inst.build().unwrap();
    let (vals, _) = inst.dense_eigen().unwrap();

    let x1 = PrimalPoint::new(linalg::random_unit_vector(10, &mut rng)).unwrap();
    let y0 = DualPoint::zeros(1);
    let cfg = IalmConfig::default();
    let report = ialm::solve(&prob, &cfg, &x1, &y0).unwrap();
    assert!(report.certified);

    let x = report.x_final.as_vector();
    let bxx = x.dot(&(inst.b() * x));
    assert!((bxx - 1.0).abs() <= 1e-3, "constraint {}", bxx - 1.0);
    let f = prob_objective(&prob, x);
    let rel = (f - vals[0]).abs() / vals[0].abs();
    assert!(rel <= 1e-3, "objective {} vs dense minimum {}", f, vals[0]);
}

fn prob_objective(prob: &dyn ialm_core::Problem, x: &nalgebra::DVector<f64>) -> f64 {
    prob.objective(x)
}

#[test]
fn trace_is_bit_deterministic() {
    let (r1, _) = default_geneig_run();
    let (r2, _) = default_geneig_run();
    assert_eq!(r1.trace.len(), r2.trace.len());
    for (a, b) in r1.trace.iter().zip(r2.trace.iter()) {
        assert_eq!(a.beta.to_bits(), b.beta.to_bits());
        assert_eq!(a.eps.to_bits(), b.eps.to_bits());
        assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
        assert_eq!(a.feasibility.to_bits(), b.feasibility.to_bits());
        assert_eq!(a.grad_residual.to_bits(), b.grad_residual.to_bits());
        assert_eq!(a.y_norm.to_bits(), b.y_norm.to_bits());
        assert_eq!(a.nu.map(f64::to_bits), b.nu.map(f64::to_bits));
        assert_eq!(a.oracle, b.oracle);
        assert_eq!(a.wall_ms, b.wall_ms);
    }
    assert_eq!(
        r1.x_final.as_vector().as_slice(),
        r2.x_final.as_vector().as_slice()
    );
}

#[test]
fn second_order_mode_dispatches_trust_region_and_certifies() {
    let inst = GenEigInstance::generate(6, SpectrumKind::PolyDecay(1.0), 42).unwrap();
    let prob = inst.build().unwrap();
    let mut rng = linalg::seeded_rng(9);
    let x1 = PrimalPoint::new(linalg::random_unit_vector(6, &mut rng)).unwrap();
    let y0 = DualPoint::zeros(1);
    let cfg = IalmConfig {
        mode: Mode::SecondOrder,
        subsolver: SubsolverKind::TrustRegion(TrustRegionOptions::default()),
        tau_f: 1e-4,
        tau_s: 1e-3,
        ..Default::default()
    };
    let report = ialm::solve(&prob, &cfg, &x1, &y0).unwrap();
    assert!(report.certified);
    let min_eig = report.final_report.min_eig.unwrap();
    assert!(min_eig >= -1e-3, "min eig {min_eig}");
}

#[test]
fn inner_failure_is_reported_after_two_consecutive_unconverged_solves() {
    let inst = GenEigInstance::generate(12, SpectrumKind::GaussianIid, 55).unwrap();
    let prob = inst.build().unwrap();
    let mut rng = linalg::seeded_rng(10);
    let x1 = PrimalPoint::new(linalg::random_unit_vector(12, &mut rng)).unwrap();
    let y0 = DualPoint::zeros(1);
    // Starve the inner solver so it cannot converge.
    let cfg = IalmConfig {
        inner_max_iters: 1,
        subsolver: SubsolverKind::Apgm(ApgmOptions::default()),
        ..Default::default()
    };
    let report = ialm::solve(&prob, &cfg, &x1, &y0).unwrap();
    assert!(!report.certified);
    assert_eq!(report.stop_reason, ialm_core::StopReason::InnerFailure);
    assert_eq!(report.trace.len(), 2);
}
