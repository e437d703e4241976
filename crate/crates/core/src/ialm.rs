//! The outer loop: tolerance schedule, inexact primal solves, a bounded
//! dual-ascent rule, and stopping criteria, with full trace capture.
//!
//! Iteration `k` (with penalty `beta_k = beta1 * b^(k-1)`):
//!
//! 1. inner tolerance `eps_{k+1} = 1 / beta_k`;
//! 2. solve `min_x L_{beta_k}(x, y_k) + g(x)` inexactly from the warm start
//!    `x_k` to tolerance `eps_{k+1}`;
//! 3. dual step size
//!    `sigma_{k+1} = sigma1 * min(||A(x_1)|| ln^2 2 / (||A(x_{k+1})|| (k+1) ln^2(k+2)), 1)`
//!    (natural logarithms), which keeps the dual increments summable;
//! 4. dual ascent `y_{k+1} = y_k + sigma_{k+1} A(x_{k+1})`;
//! 5. stop once `dist(-grad L_{beta_k}(x_{k+1}, y_k), ∂g) + ||A(x_{k+1})||`
//!    is within `tau_f` (plus the smallest-eigenvalue check within `tau_s`
//!    in second-order mode). The criterion is evaluated at the pre-update
//!    dual `y_k`, the same dual the inner solve targeted.

use nalgebra::DVector;
use serde::Serialize;
use std::sync::OnceLock;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::points::{DualPoint, PrimalPoint};
use crate::problem::{Problem, ProximalTerm};
use crate::regularity;
use crate::stationarity::{self, Mode, StationarityReport};
use crate::subsolvers::{self, OracleCounts, SubsolverKind};

/// Outer-loop configuration. Defaults follow the reproducibility-first
/// choices recorded in every report: `beta1 = 1`, `b = 2`, `sigma1 = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct IalmConfig {
    /// Initial penalty weight `beta_1`.
    pub beta1: f64,
    /// Penalty growth base `b > 1`.
    pub penalty_base: f64,
    /// Initial dual step size `sigma_1`.
    pub sigma1: f64,
    /// First-order stopping threshold.
    pub tau_f: f64,
    /// Second-order stopping threshold (ignored in first-order mode).
    pub tau_s: f64,
    pub max_outer: usize,
    pub mode: Mode,
    pub subsolver: SubsolverKind,
    /// Iteration cap handed to the inner solver each outer iteration
    /// (overrides the cap inside `subsolver`'s options).
    pub inner_max_iters: usize,
    /// Record wall-clock times in the trace. Off by default so that traces
    /// are bit-identical across runs.
    pub record_timing: bool,
}

impl Default for IalmConfig {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            penalty_base: 2.0,
            sigma1: 1.0,
            tau_f: 1e-4,
            tau_s: 1e-3,
            max_outer: 50,
            mode: Mode::FirstOrder,
            subsolver: SubsolverKind::default(),
            inner_max_iters: 100_000,
            record_timing: false,
        }
    }
}

impl IalmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.beta1 > 0.0 && self.beta1.is_finite()) {
            return Err(Error::InvalidOptions("beta1 must be positive".into()));
        }
        if !(self.penalty_base > 1.0 && self.penalty_base.is_finite()) {
            return Err(Error::InvalidOptions("penalty base must exceed 1".into()));
        }
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return Err(Error::InvalidOptions("sigma1 must be positive".into()));
        }
        if !(self.tau_f > 0.0) || !(self.tau_s > 0.0) {
            return Err(Error::InvalidOptions(
                "stopping thresholds must be positive".into(),
            ));
        }
        if self.max_outer == 0 || self.inner_max_iters == 0 {
            return Err(Error::InvalidOptions("iteration caps must be positive".into()));
        }
        if self.mode == Mode::SecondOrder
            && !matches!(self.subsolver, SubsolverKind::TrustRegion(_))
        {
            return Err(Error::InvalidOptions(
                "second-order mode requires the trust-region subsolver".into(),
            ));
        }
        Ok(())
    }
}

/// Why the solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// The stopping criterion passed at the configured thresholds.
    Certified,
    /// The outer iteration cap was exhausted.
    MaxOuter,
    /// The inner solver failed to converge twice in a row.
    InnerFailure,
}

/// Per-outer-iteration diagnostics. Row `k` describes the iteration that
/// used penalty `beta_k` and produced the iterate `x_{k+1}`, so the
/// tolerance law `eps * beta = 1` holds within each row.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    /// Penalty weight `beta_k`.
    pub beta: f64,
    /// Inner tolerance `eps_{k+1} = 1 / beta_k`.
    pub eps: f64,
    /// Dual step `sigma_{k+1}` applied this iteration.
    pub sigma: f64,
    /// Feasibility gap `||A(x_{k+1})||`.
    pub feasibility: f64,
    /// `dist(-grad L_{beta_k}(x_{k+1}, y_k), ∂g(x_{k+1}))`.
    pub grad_residual: f64,
    /// Regularity estimate at `(x_{k+1}, beta_k)`; `None` when degenerate.
    pub nu: Option<f64>,
    /// `||y_{k+1}||` after the dual ascent.
    pub y_norm: f64,
    /// Inner-solver oracle tallies for this iteration.
    pub oracle: OracleCounts,
    pub inner_converged: bool,
    pub inner_iterations: usize,
    /// Wall-clock milliseconds (0 unless timing is enabled).
    pub wall_ms: u64,
}

/// Final outcome with the full trace.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub x_final: PrimalPoint,
    pub y_final: DualPoint,
    pub certified: bool,
    pub stop_reason: StopReason,
    /// Stationarity report backing the final certification decision.
    pub final_report: StationarityReport,
    pub trace: Vec<TraceRecord>,
    /// Aggregated inner-solver oracle counts.
    pub totals: OracleCounts,
    /// `||A(x_1)||` at the initial point (drives the dual step rule).
    pub a1_norm: f64,
    /// Certified upper bound on `||y_k||` over the whole run.
    pub y_max_bound: f64,
    /// The configuration used, echoed for reproducibility.
    pub config: IalmConfig,
}

/// Dual step-size rule (Step 3). All logarithms are natural. The
/// `feasibility = 0` case is guarded: the `min` resolves to 1 and no
/// division is performed.
pub fn dual_step_size(sigma1: f64, a1_norm: f64, ak1_norm: f64, k: usize) -> f64 {
    debug_assert!(k >= 1);
    if ak1_norm <= 0.0 {
        return sigma1;
    }
    let ln2 = std::f64::consts::LN_2;
    let kk = (k + 1) as f64;
    let log_term = (kk + 1.0).ln();
    let ratio = a1_norm * ln2 * ln2 / (ak1_norm * kk * log_term * log_term);
    sigma1 * ratio.min(1.0)
}

/// Constant `c >= sum_{k >= 1} 1 / (k ln^2(k+1))`, computed once by summing
/// the first 10^6 terms and adding the integral tail bound `1 / ln(10^6)`.
pub fn dual_series_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let n = 1_000_000usize;
        let mut s = 0.0f64;
        for k in 1..=n {
            let l = ((k + 1) as f64).ln();
            s += 1.0 / (k as f64 * l * l);
        }
        s + 1.0 / (n as f64).ln()
    })
}

/// Certified upper bound on the dual norm over any run:
/// `||y_0|| + sigma1 * c * ||A(x_1)|| ln^2 2`.
pub fn dual_norm_bound(y0_norm: f64, sigma1: f64, a1_norm: f64) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    y0_norm + sigma1 * dual_series_constant() * a1_norm * ln2 * ln2
}

/// Runs the outer loop. See [`solve_observed`] for a variant that exposes
/// each iterate to a caller-supplied observer.
pub fn solve(
    prob: &dyn Problem,
    cfg: &IalmConfig,
    x1: &PrimalPoint,
    y0: &DualPoint,
) -> Result<SolveReport> {
    solve_observed(prob, cfg, x1, y0, &mut |_, _, _| {})
}

/// Outer loop with an observer called once per iteration with the trace
/// row, the new primal iterate, and the new dual iterate. The observer is
/// read-only instrumentation; it must not affect determinism.
pub fn solve_observed(
    prob: &dyn Problem,
    cfg: &IalmConfig,
    x1: &PrimalPoint,
    y0: &DualPoint,
    observer: &mut dyn FnMut(&TraceRecord, &DVector<f64>, &DVector<f64>),
) -> Result<SolveReport> {
    cfg.validate()?;
    if x1.len() != prob.dim_primal() {
        return Err(Error::DimensionMismatch {
            what: "initial primal point",
            expected: prob.dim_primal(),
            got: x1.len(),
        });
    }
    if y0.len() != prob.dim_constraint() {
        return Err(Error::DimensionMismatch {
            what: "initial dual point",
            expected: prob.dim_constraint(),
            got: y0.len(),
        });
    }
    if let ProximalTerm::Indicator(set) = prob.proximal_term() {
        let violation = set.violation(x1);
        if violation > stationarity::MEMBERSHIP_TOL {
            return Err(Error::InfeasiblePoint { violation });
        }
    }

    let a1_norm = prob.constraint(x1).norm();
    if a1_norm == 0.0 {
        log::warn!(
            "initial point is feasible (||A(x_1)|| = 0): dual steps vanish and \
             the penalty term alone drives feasibility"
        );
    }
    let y_max_bound = dual_norm_bound(y0.norm(), cfg.sigma1, a1_norm);

    let mut x = x1.clone();
    let mut y = y0.clone();
    let mut beta = cfg.beta1;
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut totals = OracleCounts::default();
    let mut consecutive_failures = 0usize;
    let mut last_report: Option<StationarityReport> = None;

    for k in 1..=cfg.max_outer {
        let started = Instant::now();
        let eps = 1.0 / beta;
        let kind = cfg.subsolver.with_max_iters(cfg.inner_max_iters);
        let sub = subsolvers::run(&kind, prob, &y, beta, &x, eps)?;
        if sub.converged {
            consecutive_failures = 0;
        } else {
            consecutive_failures += 1;
        }
        let x_new = sub.x;

        let a = prob.constraint(&x_new);
        let feasibility = a.norm();
        let sigma = dual_step_size(cfg.sigma1, a1_norm, feasibility, k);

        // Step 5 is evaluated at the pre-update dual.
        let (certified, report) = stationarity::certify(
            prob,
            &x_new,
            &y,
            beta,
            cfg.mode,
            cfg.tau_f,
            cfg.tau_s,
        )?;
        let nu_est = regularity::estimate(prob, &x_new, beta)?;

        // Step 4: dual ascent.
        let y_new = DualPoint::new(y.as_vector() + &a * sigma)?;

        let wall_ms = if cfg.record_timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        let row = TraceRecord {
            k,
            beta,
            eps,
            sigma,
            feasibility,
            grad_residual: report.grad_residual,
            nu: if nu_est.degenerate { None } else { Some(nu_est.value) },
            y_norm: y_new.norm(),
            oracle: sub.oracle,
            inner_converged: sub.converged,
            inner_iterations: sub.iterations,
            wall_ms,
        };
        totals += sub.oracle;
        observer(&row, &x_new, &y_new);
        trace.push(row);

        x = x_new;
        y = y_new;
        last_report = Some(report.clone());

        if certified {
            return Ok(SolveReport {
                x_final: x,
                y_final: y,
                certified: true,
                stop_reason: StopReason::Certified,
                final_report: report,
                trace,
                totals,
                a1_norm,
                y_max_bound,
                config: cfg.clone(),
            });
        }
        if consecutive_failures >= 2 {
            return Ok(SolveReport {
                x_final: x,
                y_final: y,
                certified: false,
                stop_reason: StopReason::InnerFailure,
                final_report: report,
                trace,
                totals,
                a1_norm,
                y_max_bound,
                config: cfg.clone(),
            });
        }
        beta *= cfg.penalty_base;
    }

    let final_report = match last_report {
        Some(r) => r,
        None => unreachable!("max_outer >= 1 is validated"),
    };
    Ok(SolveReport {
        x_final: x,
        y_final: y,
        certified: false,
        stop_reason: StopReason::MaxOuter,
        final_report,
        trace,
        totals,
        a1_norm,
        y_max_bound,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dual_step_size_examples() {
        // Feasible iterate: the min resolves to 1.
        assert_eq!(dual_step_size(2.5, 3.0, 0.0, 4), 2.5);
        // Frozen direct evaluation with natural logs.
        assert_relative_eq!(
            dual_step_size(1.0, 1.0, 1.0, 1),
            0.19903617697086998,
            epsilon = 1e-12
        );
        // Huge feasibility shrinks the step far below sigma1.
        for k in [1usize, 5, 20] {
            let s = dual_step_size(1.0, 1.0, 1e6, k);
            let ln2 = std::f64::consts::LN_2;
            let kk = (k + 1) as f64;
            let expect = 1e-6 * ln2 * ln2 / (kk * ((kk + 1.0).ln()).powi(2));
            assert_relative_eq!(s, expect, max_relative = 1e-12);
            assert!(s < 1.0);
        }
    }

    #[test]
    fn dual_step_never_exceeds_sigma1() {
        use rand::Rng;
        let mut rng = crate::linalg::seeded_rng(3);
        for _ in 0..200 {
            let sigma1 = rng.random::<f64>() * 10.0 + 1e-3;
            let a1 = rng.random::<f64>() * 10.0;
            let ak = rng.random::<f64>() * 10.0;
            let k = 1 + (rng.random::<f64>() * 30.0) as usize;
            assert!(dual_step_size(sigma1, a1, ak, k) <= sigma1 + 1e-15);
        }
    }

    #[test]
    fn series_constant_matches_frozen_oracle_value() {
        // Partial sum to 1e6 plus integral tail, computed independently.
        assert_relative_eq!(dual_series_constant(), 3.3877355352008705, epsilon = 1e-12);
    }

    #[test]
    fn dual_norm_bound_examples() {
        assert_eq!(dual_norm_bound(4.5, 7.0, 0.0), 4.5);
        // Frozen regression value for y0 = 0, sigma1 = 1, ||A(x_1)|| = 1.
        assert_relative_eq!(dual_norm_bound(0.0, 1.0, 1.0), 1.6276477482450493, epsilon = 1e-12);
    }

    #[test]
    fn unconstrained_problem_certifies_in_one_outer_iteration() {
        let prob = crate::problems::QuadraticProblem::identity(6).unwrap();
        let x1 = PrimalPoint::new(nalgebra::DVector::from_element(6, 2.0)).unwrap();
        let y0 = DualPoint::zeros(0);
        let cfg = IalmConfig::default();
        let report = solve(&prob, &cfg, &x1, &y0).unwrap();
        assert!(report.certified);
        assert_eq!(report.trace.len(), 1);
        assert_eq!(report.y_final.len(), 0);
        assert!(report.final_report.first_order_total() <= cfg.tau_f);
    }

    #[test]
    fn rejects_second_order_mode_with_first_order_solver() {
        let cfg = IalmConfig {
            mode: Mode::SecondOrder,
            ..Default::default()
        };
        let prob = crate::problems::QuadraticProblem::identity(2).unwrap();
        let x1 = PrimalPoint::zeros(2);
        let y0 = DualPoint::zeros(0);
        assert!(matches!(
            solve(&prob, &cfg, &x1, &y0),
            Err(Error::InvalidOptions(_))
        ));
    }
}
