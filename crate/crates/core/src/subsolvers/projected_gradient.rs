//! Plain projected/proximal gradient baseline: the same backtracking step
//! and termination certificate as APGM, without momentum. Monotone by
//! construction.

use crate::error::{Error, Result};
use crate::lagrangian;
use crate::points::{DualPoint, PrimalPoint};
use crate::problem::Problem;

use super::{
    backtrack_step, initial_step, validate_inputs, OracleCounts, ProjGradOptions, SubsolverResult,
};

pub fn projected_gradient(
    prob: &dyn Problem,
    y: &DualPoint,
    beta: f64,
    x0: &PrimalPoint,
    eps: f64,
    opts: &ProjGradOptions,
) -> Result<SubsolverResult> {
    validate_inputs(prob, y, beta, x0, eps)?;
    let yv = y.as_vector();
    let mut counts = OracleCounts::default();

    let mut x = x0.as_vector().clone();
    counts.f_evals += 1;
    let mut l_x = lagrangian::value_raw(prob, &x, yv, beta)
        .map_err(|_| Error::Divergence("augmented Lagrangian not finite at warm start".into()))?;

    let mut eta = initial_step(prob, y, beta, &x, opts.initial_step).clamp(1e-18, 1e12);
    let mut lambda_secant = 0.0f64;
    let mut prev_grad: Option<(nalgebra::DVector<f64>, nalgebra::DVector<f64>)> = None;
    let mut last_cert = f64::INFINITY;

    for iter in 1..=opts.max_iters {
        counts.grad_evals += 1;
        let g = lagrangian::gradient_raw(prob, &x, yv, beta)
            .map_err(|_| Error::Divergence("augmented Lagrangian gradient not finite".into()))?;

        if let Some((px, pg)) = &prev_grad {
            let dx = (&x - px).norm();
            if dx > 1e-300 {
                lambda_secant = (&g - pg).norm() / dx;
            }
        }

        let (cand, l_cand, eta_used) =
            backtrack_step(prob, &x, l_x, &g, yv, beta, eta, opts.shrink, &mut counts)?;

        let step_norm = (&x - &cand).norm();
        let lambda_est = lambda_secant.max(1.0 / eta_used);
        let cert = (1.0 + eta_used * lambda_est) * step_norm / eta_used;
        last_cert = cert;

        prev_grad = Some((x.clone(), g));
        x = cand;
        l_x = l_cand;
        // No step growth between iterations: one projection per iteration
        // on problems with a stable accepted step.
        eta = eta_used;

        if cert <= eps {
            return Ok(SubsolverResult {
                x: PrimalPoint::new(x)?,
                certified_residual: cert,
                oracle: counts,
                converged: true,
                iterations: iter,
            });
        }
    }

    Ok(SubsolverResult {
        x: PrimalPoint::new(x)?,
        certified_residual: last_cert,
        oracle: counts,
        converged: false,
        iterations: opts.max_iters,
    })
}
