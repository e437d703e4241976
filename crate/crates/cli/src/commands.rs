//! The four harness commands: `solve`, `sweep`, `check`, `gradcheck`.

use std::path::Path;

use nalgebra::DVector;

use ialm_core::gradcheck;
use ialm_core::ialm;
use ialm_core::points::DualPoint;
use ialm_core::problems::{basis_pursuit, clustering};
use ialm_core::regularity;

use crate::builder::{self, BuiltProblem};
use crate::config::RunConfig;
use crate::exit_codes;
use crate::output::{
    self, ensure_finite, stop_reason_str, to_json, CheckDocument, CheckRow, OracleTotals,
    OutputFormat, SolveDocument, SolveSummary, SweepDocument, SweepPoint,
};
use crate::CliError;

/// Tolerance slack when comparing the regularity estimate against a
/// closed-form lower bound.
pub const BOUND_SLACK: f64 = 1e-8;

fn run_solve(cfg: &RunConfig) -> Result<(BuiltProblem, ialm::SolveReport), CliError> {
    let built = builder::build(cfg)?;
    let x1 = built.default_start(cfg.seed, cfg.init)?;
    let y0 = DualPoint::zeros(built.problem().dim_constraint());
    let report = ialm::solve(built.problem(), &cfg.to_ialm_config(), &x1, &y0)
        .map_err(CliError::Solver)?;
    Ok((built, report))
}

fn summarize(built: &BuiltProblem, report: &ialm::SolveReport) -> SolveSummary {
    let prob = built.problem();
    let x = report.x_final.as_vector();
    let mut summary = SolveSummary {
        certified: report.certified,
        stop_reason: stop_reason_str(report.stop_reason),
        outer_iterations: report.trace.len(),
        f_final: prob.objective(x),
        feasibility_final: report.final_report.feasibility,
        grad_residual_final: report.final_report.grad_residual,
        min_eig_final: report.final_report.min_eig,
        y_norm_final: report.y_final.norm(),
        a1_norm: report.a1_norm,
        y_max_bound: report.y_max_bound,
        totals: OracleTotals {
            f_evals: report.totals.f_evals,
            grad_evals: report.totals.grad_evals,
            proj_evals: report.totals.prox_evals,
            hvp_evals: report.totals.hvp_evals,
        },
        bp_recovery_rel_error: None,
        geneig_dense_min: None,
        geneig_objective_rel_error: None,
        cluster_agreement: None,
    };
    match built {
        BuiltProblem::Bp { planted, .. } => {
            let z = basis_pursuit::decode(x);
            let denom = planted.norm();
            if denom > 0.0 {
                summary.bp_recovery_rel_error = Some((z - planted).norm() / denom);
            }
        }
        BuiltProblem::GenEig { instance, .. } if instance.dim() <= 400 => {
            if let Ok((vals, _)) = instance.dense_eigen() {
                summary.geneig_dense_min = Some(vals[0]);
                if vals[0] != 0.0 {
                    summary.geneig_objective_rel_error =
                        Some((summary.f_final - vals[0]).abs() / vals[0].abs());
                }
            }
        }
        BuiltProblem::Clustering {
            instance,
            labels: Some(labels),
            ..
        } => {
            let v = clustering::factor_matrix(x, instance.num_points(), instance.rank());
            summary.cluster_agreement = Some(clustering::co_cluster_agreement(&v, labels, 0.5));
        }
        _ => {}
    }
    summary
}

/// Runs one solve and writes the trace plus a summary block.
/// Exit code 0 when the run certified, otherwise the solver-failure code.
pub fn cmd_solve(
    cfg: &RunConfig,
    out: Option<&Path>,
    format: OutputFormat,
) -> Result<i32, CliError> {
    let (built, report) = run_solve(cfg)?;
    let doc = SolveDocument {
        config: cfg.clone(),
        summary: summarize(&built, &report),
        trace: output::trace_rows(&report),
    };
    ensure_finite(&doc.numeric_fields())?;
    let content = match format {
        OutputFormat::Csv => doc.to_csv(),
        OutputFormat::Json => to_json(&doc)?,
    };
    output::emit(out, &content)?;
    Ok(if report.certified {
        exit_codes::OK
    } else {
        exit_codes::SOLVER
    })
}

/// Runs one solve per threshold (fresh instance, no warm start across
/// runs), tallies gradient evaluations as the first-order oracle count, and
/// fits the log-log slope against `1/tau_f` over certified points.
pub fn cmd_sweep(
    cfg: &RunConfig,
    taus: &[f64],
    out: Option<&Path>,
    format: OutputFormat,
) -> Result<i32, CliError> {
    if taus.len() < 3 {
        return Err(CliError::config(
            "sweep needs at least 3 thresholds".into(),
        ));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) || taus.iter().any(|t| *t <= 0.0) {
        return Err(CliError::config(
            "sweep thresholds must be positive and strictly decreasing".into(),
        ));
    }

    let mut points = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut run_cfg = cfg.clone();
        run_cfg.tau_f = tau;
        let (_, report) = run_solve(&run_cfg)?;
        points.push(SweepPoint {
            tau_f: tau,
            grad_evals: report.totals.grad_evals,
            certified: report.certified,
        });
    }

    let certified: Vec<&SweepPoint> = points.iter().filter(|p| p.certified).collect();
    let (slope, fit_residual) = if certified.len() >= 3 {
        let xs: Vec<f64> = certified.iter().map(|p| (1.0 / p.tau_f).ln()).collect();
        let ys: Vec<f64> = certified.iter().map(|p| (p.grad_evals as f64).ln()).collect();
        let n = xs.len() as f64;
        let xm = xs.iter().sum::<f64>() / n;
        let ym = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let slope = sxy / sxx;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let pred = ym + slope * (x - xm);
                (y - pred) * (y - pred)
            })
            .sum();
        (Some(slope), Some((rss / n).sqrt()))
    } else {
        (None, None)
    };
    let unfit = certified.len() < 3;
    let all_certified = certified.len() == points.len();

    let doc = SweepDocument {
        config: cfg.clone(),
        points,
        slope,
        fit_residual,
        unfit,
    };
    ensure_finite(&doc.numeric_fields())?;
    let content = match format {
        OutputFormat::Csv => doc.to_csv(),
        OutputFormat::Json => to_json(&doc)?,
    };
    output::emit(out, &content)?;
    Ok(if all_certified && !unfit {
        exit_codes::OK
    } else {
        exit_codes::SOLVER
    })
}

/// Runs a solve while recording the regularity estimate per iteration and,
/// for the shipped problems, the closed-form lower bounds with their
/// precondition flags. Exit code 1 when any precondition-satisfying row
/// falls below its bound.
pub fn cmd_check(
    cfg: &RunConfig,
    out: Option<&Path>,
    format: OutputFormat,
) -> Result<i32, CliError> {
    let built = builder::build(cfg)?;
    let x1 = built.default_start(cfg.seed, cfg.init)?;
    let y0 = DualPoint::zeros(built.problem().dim_constraint());

    // Problem-level constants for the bounds.
    let geneig_eta_min = match &built {
        BuiltProblem::GenEig { instance, .. } => {
            Some(ialm_core::linalg::sym_eig_min(instance.b()))
        }
        _ => None,
    };
    let bp_subset = match &built {
        BuiltProblem::Bp { instance, .. } => {
            // The subset minimum does not depend on the iterate; compute it
            // once through the condition helper.
            let probe = DVector::zeros(instance.signal_dim());
            let rep = regularity::bp_condition(&probe, instance.matrix(), 1.0)
                .map_err(CliError::Solver)?;
            Some((rep.min_subset_sv, !rep.approximate))
        }
        _ => None,
    };

    let mut rows: Vec<CheckRow> = Vec::new();
    let prob = built.problem();
    let report = {
        let built = &built;
        ialm::solve_observed(
            prob,
            &cfg.to_ialm_config(),
            &x1,
            &y0,
            &mut |record, x, _y| {
                let nu = record.nu;
                let mut row = CheckRow {
                    k: record.k,
                    feas: record.feasibility,
                    nu_hat: nu,
                    degenerate: nu.is_none(),
                    lower_bound: None,
                    precond_holds: None,
                    vtv_deviation: None,
                    interior: None,
                    bp_nth_magnitude: None,
                    bp_condition_holds: None,
                };
                match built {
                    BuiltProblem::GenEig { .. } => {
                        let eta = geneig_eta_min.expect("geneig eta");
                        row.lower_bound = Some(eta * x.norm());
                        row.precond_holds = Some(true);
                    }
                    BuiltProblem::Clustering { instance, .. } => {
                        let v = clustering::factor_matrix(
                            x,
                            instance.num_points(),
                            instance.rank(),
                        );
                        let radius = (instance.cluster_count() as f64).sqrt();
                        let pre = regularity::clustering_preconditions(&v, radius);
                        row.lower_bound = Some(regularity::clustering_lower_bound(&v));
                        row.precond_holds = Some(pre.holds);
                        row.vtv_deviation = Some(pre.vtv_deviation);
                        row.interior = Some(pre.interior);
                    }
                    BuiltProblem::Bp { instance, .. } => {
                        let (min_sv, exact) = bp_subset.expect("bp subset");
                        let z = basis_pursuit::decode(x);
                        let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
                        mags.sort_by(|a, b| b.total_cmp(a));
                        let nth = mags[instance.num_measurements() - 1];
                        row.bp_nth_magnitude = Some(nth);
                        row.lower_bound = Some(2.0 * nth * min_sv.max(0.0).sqrt());
                        row.precond_holds = Some(exact && min_sv > 0.0);
                        row.bp_condition_holds = nu.map(|nu_val| {
                            min_sv > 0.0 && nth >= nu_val / (2.0 * min_sv.sqrt())
                        });
                    }
                    BuiltProblem::Quadratic { .. } => {}
                }
                rows.push(row);
            },
        )
        .map_err(CliError::Solver)?
    };

    let violations = rows
        .iter()
        .filter(|r| {
            !r.degenerate
                && r.precond_holds == Some(true)
                && match (r.nu_hat, r.lower_bound) {
                    (Some(nu), Some(bound)) => nu < bound - BOUND_SLACK,
                    _ => false,
                }
        })
        .count();

    let doc = CheckDocument {
        config: cfg.clone(),
        certified: report.certified,
        stop_reason: stop_reason_str(report.stop_reason),
        violations,
        bp_min_subset_sv: bp_subset.map(|(sv, _)| sv),
        bp_subset_exact: bp_subset.map(|(_, exact)| exact),
        rows,
    };
    ensure_finite(&doc.numeric_fields())?;
    let content = match format {
        OutputFormat::Csv => doc.to_csv(),
        OutputFormat::Json => to_json(&doc)?,
    };
    output::emit(out, &content)?;
    Ok(if violations == 0 {
        exit_codes::OK
    } else {
        exit_codes::CHECK_FAILED
    })
}

/// Runs every finite-difference invariant for the configured problem and
/// prints one line per callback. Exit code 0 only when all checks pass at
/// the standard tolerance.
pub fn cmd_gradcheck(cfg: &RunConfig, samples: usize) -> Result<i32, CliError> {
    let built = builder::build(cfg)?;
    let checks = gradcheck::check_all(built.problem(), samples, cfg.seed);
    let mut all_ok = true;
    for check in &checks {
        let status = if check.skipped {
            "SKIP"
        } else if check.passed() {
            "PASS"
        } else {
            all_ok = false;
            "FAIL"
        };
        println!(
            "{status} {name}: worst relative error {err:.3e} (tolerance {tol:.1e}, {n} samples)",
            name = check.name,
            err = check.max_rel_err,
            tol = check.tol,
            n = check.samples
        );
    }
    Ok(if all_ok {
        exit_codes::OK
    } else {
        exit_codes::CHECK_FAILED
    })
}
