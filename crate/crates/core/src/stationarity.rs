//! First- and second-order stationarity certificates and the feasibility
//! gap.
//!
//! A pair `(x, y)` is declared first-order stationary at tolerance `tau_f`
//! when
//!
//! ```text
//! dist(-grad_x L_beta(x, y), ∂g(x)) + ||A(x)|| <= tau_f ,
//! ```
//!
//! where the subdifferential distance specializes per proximal term: the
//! plain gradient norm for `g = 0`, the tangent-cone residual for convex
//! indicators, and a problem-supplied callback for general proximal terms.
//! Second-order certification (defined for `g = 0`) additionally requires
//! the smallest Hessian eigenvalue to clear `-tau_s`, estimated matrix-free.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lagrangian;
use crate::linalg::{random_unit_vector, seeded_rng};
use crate::points::{DualPoint, PrimalPoint};
use crate::problem::{Problem, ProximalTerm};

/// Certification mode of both the outer loop and `certify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    FirstOrder,
    SecondOrder,
}

/// Stationarity measurements at a point.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    /// `dist(-grad_x L_beta(x,y), ∂g(x))`.
    pub grad_residual: f64,
    /// Feasibility gap `||A(x)||`.
    pub feasibility: f64,
    /// Estimate of the smallest Hessian eigenvalue (second-order mode only).
    pub min_eig: Option<f64>,
    /// Penalty weight the report was evaluated at.
    pub beta: f64,
}

impl StationarityReport {
    /// The first-order stopping metric.
    pub fn first_order_total(&self) -> f64 {
        self.grad_residual + self.feasibility
    }
}

/// Membership tolerance for indicator terms; beyond it the tangent cone is
/// undefined and the report is an error rather than a silent extension.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Computes the first-order stationarity report at `(x, y, beta)`.
pub fn first_order_residual(
    prob: &dyn Problem,
    x: &PrimalPoint,
    y: &DualPoint,
    beta: f64,
) -> Result<StationarityReport> {
    let g = lagrangian::gradient(prob, x, y, beta)?;
    let u = -g;
    let grad_residual = match prob.proximal_term() {
        ProximalTerm::Zero => u.norm(),
        ProximalTerm::Indicator(set) => {
            let violation = set.violation(x);
            if violation > MEMBERSHIP_TOL {
                return Err(Error::InfeasiblePoint { violation });
            }
            set.tangent_residual(x, &u)
        }
        ProximalTerm::GeneralProx(op) => op.subdiff_distance(x, &u),
    };
    let feasibility = prob.constraint(x).norm();
    if !grad_residual.is_finite() || !feasibility.is_finite() {
        return Err(Error::NonFinite("stationarity report"));
    }
    Ok(StationarityReport {
        grad_residual,
        feasibility,
        min_eig: None,
        beta,
    })
}

/// Result of the matrix-free smallest-eigenvalue estimator.
#[derive(Debug, Clone)]
pub struct MinEigEstimate {
    /// Estimated smallest eigenvalue.
    pub value: f64,
    /// Rayleigh residual `||H w - value * w||` at the returned unit vector;
    /// for a symmetric operator some eigenvalue lies within this distance
    /// of `value`.
    pub achieved_tol: f64,
    /// The unit vector achieving the estimate (a negative-curvature
    /// direction whenever `value < 0`).
    pub vector: DVector<f64>,
    /// Whether the residual target `tol * (1 + ||H||_est)` was met.
    pub converged: bool,
    /// Number of operator applications consumed.
    pub operator_calls: usize,
}

/// Estimates the smallest eigenvalue of a symmetric operator given only its
/// action, by shifted power iteration: first bound the spectrum from above,
/// then power-iterate `c I - H` and report `c` minus the top eigenvalue.
///
/// Penalty Hessians carry large positive eigenvalues (the `beta DA^T DA`
/// term has rank up to `m`) that would stall the shifted sweep; dominant
/// positive eigenpairs are therefore greedily deflated first, and the shift
/// is sized to the remaining spectrum.
pub fn min_eigenvalue_estimate(
    op: &mut dyn FnMut(&DVector<f64>) -> DVector<f64>,
    dim: usize,
    tol: f64,
    max_iters: usize,
) -> MinEigEstimate {
    min_eigenvalue_estimate_with_band(op, dim, tol, max_iters, None)
}

/// As [`min_eigenvalue_estimate`], but optionally stops early once the
/// decision "is `lambda_min >= -band`?" resolves: either the running
/// Rayleigh value clears `-band` with a residual small next to the margin,
/// or the returned vector itself has Rayleigh quotient below `-band`
/// (an exact witness of negative curvature).
pub fn min_eigenvalue_estimate_with_band(
    op: &mut dyn FnMut(&DVector<f64>) -> DVector<f64>,
    dim: usize,
    tol: f64,
    max_iters: usize,
    band: Option<f64>,
) -> MinEigEstimate {
    assert!(dim >= 1, "operator dimension must be at least 1");
    let mut rng = seeded_rng(0x5eed_0123_4567_89ab);
    let mut calls = 0usize;
    let budget = max_iters.max(16);
    let tol = tol.max(1e-14);

    // Greedy deflation of dominant positive eigenpairs.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut deflated_vals: Vec<f64> = Vec::new();
    let mut norm_scale = 0.0f64; // estimate of ||H||
    let mut top_bound = 0.0f64; // upper-ish bound for the deflated operator's top
    let max_rounds = 48.min(dim);
    let round_budget = (budget / 64).max(32);

    let project_out = |v: &mut DVector<f64>, basis: &[DVector<f64>]| {
        for b in basis {
            let c = b.dot(v);
            *v -= b * c;
        }
    };

    for round in 0..=max_rounds {
        if basis.len() == dim || calls + round_budget > budget / 2 {
            break;
        }
        let mut v = random_unit_vector(dim, &mut rng);
        project_out(&mut v, &basis);
        let n = v.norm();
        if n < 1e-12 {
            break;
        }
        v /= n;
        let mut theta = 0.0f64;
        let mut res = f64::INFINITY;
        let mut round_converged = false;
        for _ in 0..round_budget {
            if calls >= budget {
                break;
            }
            let mut hv = op(&v);
            calls += 1;
            project_out(&mut hv, &basis);
            theta = v.dot(&hv);
            res = (&hv - &v * theta).norm();
            if res <= tol.max(1e-10) * (1.0 + theta.abs()) {
                round_converged = true;
                break;
            }
            let hn = hv.norm();
            if hn < 1e-300 {
                theta = 0.0;
                res = 0.0;
                round_converged = true;
                break;
            }
            v = hv / hn;
            project_out(&mut v, &basis);
            let vn = v.norm();
            if vn < 1e-12 {
                break;
            }
            v /= vn;
        }
        if round == 0 {
            norm_scale = theta.abs() + res;
        }
        top_bound = theta + res;
        // Deflate only converged, positive, outlier-sized tops; anything
        // else is left for the shifted sweep.
        if !round_converged || theta <= 0.0 || calls >= budget {
            break;
        }
        basis.push(v);
        deflated_vals.push(theta);
        if theta <= 0.002 * norm_scale {
            break;
        }
    }

    let min_deflated = deflated_vals.iter().cloned().fold(f64::INFINITY, f64::min);

    if basis.len() == dim {
        // Everything was deflated: the smallest deflated value is the answer.
        let idx = deflated_vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let w = basis[idx].clone();
        let hw = op(&w);
        calls += 1;
        let value = deflated_vals[idx];
        let achieved = (&hw - &w * value).norm();
        return MinEigEstimate {
            value,
            achieved_tol: achieved,
            converged: achieved <= tol * (1.0 + norm_scale),
            vector: w,
            operator_calls: calls,
        };
    }

    // Shift sized to the deflated spectrum.
    let c = top_bound.max(0.0) * 1.1 + tol * (1.0 + norm_scale) + 1e-8;

    let mut w = random_unit_vector(dim, &mut rng);
    project_out(&mut w, &basis);
    let wn = w.norm();
    if wn > 1e-12 {
        w /= wn;
    }
    let mut theta2 = 0.0f64;
    let mut res2 = f64::INFINITY;
    while calls < budget {
        let mut hw = op(&w);
        calls += 1;
        project_out(&mut hw, &basis);
        let mw = &w * c - hw;
        theta2 = w.dot(&mw);
        res2 = (&mw - &w * theta2).norm();
        if res2 <= tol * (1.0 + c) {
            break;
        }
        if let Some(band) = band {
            let value = c - theta2;
            // Exact witness: the Rayleigh quotient of w itself is below
            // the band.
            if value < -band {
                break;
            }
            // Clears the band with residual small next to the margin.
            if res2 <= 0.25 * (value + band).max(0.0) {
                break;
            }
        }
        let nm = mw.norm();
        if nm < 1e-300 {
            // M annihilates w: H w = c w exactly in this subspace.
            theta2 = 0.0;
            res2 = 0.0;
            break;
        }
        w = mw / nm;
        project_out(&mut w, &basis);
        let nw = w.norm();
        if nw < 1e-12 {
            break;
        }
        w /= nw;
    }

    let mut value = c - theta2;
    let mut vector = w;
    if min_deflated < value {
        // All eigenvalues were positive and a deflated one is smallest.
        let idx = deflated_vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        value = deflated_vals[idx];
        vector = basis[idx].clone();
    }
    let hv = op(&vector);
    calls += 1;
    let achieved = (&hv - &vector * value).norm();
    MinEigEstimate {
        value,
        achieved_tol: achieved,
        converged: achieved <= tol * (1.0 + norm_scale.max(c)) + 1e-14 && res2.is_finite(),
        vector,
        operator_calls: calls,
    }
}

/// Relative tolerance passed to the eigenvalue estimator by `certify`.
const CERTIFY_EIG_TOL: f64 = 1e-9;

/// Operator applications allowed per certification eigen-solve.
const CERTIFY_EIG_BUDGET: usize = 60_000;

/// Checks the stopping criterion at `(x, y, beta)`: the first-order metric
/// against `tau_f`, and in second-order mode (which requires `g = 0` and
/// Hessian-vector products) additionally `lambda_min >= -tau_s`.
pub fn certify(
    prob: &dyn Problem,
    x: &PrimalPoint,
    y: &DualPoint,
    beta: f64,
    mode: Mode,
    tau_f: f64,
    tau_s: f64,
) -> Result<(bool, StationarityReport)> {
    let mut report = first_order_residual(prob, x, y, beta)?;
    let first_order_pass = report.first_order_total() <= tau_f;
    match mode {
        Mode::FirstOrder => Ok((first_order_pass, report)),
        Mode::SecondOrder => {
            if !prob.proximal_term().is_zero() {
                return Err(Error::MissingCapability(
                    "second-order certification requires g = 0",
                ));
            }
            if !prob.has_hessian() {
                return Err(Error::MissingCapability(
                    "second-order certification requires Hessian-vector products",
                ));
            }
            if !first_order_pass {
                // The eigen-solve is the expensive half; skip it until the
                // first-order metric is already inside the threshold.
                return Ok((false, report));
            }
            let mut op =
                |w: &DVector<f64>| prob.hessian_apply(x, y, beta, w).expect("has_hessian");
            let est = min_eigenvalue_estimate(
                &mut op,
                prob.dim_primal(),
                CERTIFY_EIG_TOL,
                CERTIFY_EIG_BUDGET,
            );
            report.min_eig = Some(est.value);
            let second_order_pass = est.converged && est.value >= -tau_s;
            Ok((first_order_pass && second_order_pass, report))
        }
    }
}
