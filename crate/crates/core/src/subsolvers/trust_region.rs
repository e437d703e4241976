//! Matrix-free trust-region solver for smooth subproblems (`g = 0`,
//! Hessian-vector products available): Steihaug truncated CG on the local
//! quadratic model, ratio-based radius control, and an explicit
//! negative-curvature escape so that termination certifies second-order
//! stationarity: `||grad L|| <= eps` and `lambda_min(H) >= -eps`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lagrangian;
use crate::points::{DualPoint, PrimalPoint};
use crate::problem::Problem;
use crate::stationarity::min_eigenvalue_estimate_with_band;

use super::{validate_inputs, OracleCounts, SubsolverResult, TrustRegionOptions};

const ACCEPT_RATIO: f64 = 0.1;
const EXPAND_RATIO: f64 = 0.75;
const SHRINK_FACTOR: f64 = 0.25;
const EXPAND_FACTOR: f64 = 2.0;
const MAX_RADIUS: f64 = 1e12;
const EIG_TOL: f64 = 1e-9;
const EIG_BUDGET: usize = 60_000;

pub fn trust_region(
    prob: &dyn Problem,
    y: &DualPoint,
    beta: f64,
    x0: &PrimalPoint,
    eps: f64,
    opts: &TrustRegionOptions,
) -> Result<SubsolverResult> {
    validate_inputs(prob, y, beta, x0, eps)?;
    if !prob.proximal_term().is_zero() {
        return Err(Error::MissingCapability("trust region requires g = 0"));
    }
    if !prob.has_hessian() {
        return Err(Error::MissingCapability(
            "trust region requires Hessian-vector products",
        ));
    }
    let yv = y.as_vector();
    let dim = prob.dim_primal();
    let mut counts = OracleCounts::default();

    let mut x = x0.as_vector().clone();
    counts.f_evals += 1;
    let mut l = lagrangian::value_raw(prob, &x, yv, beta)
        .map_err(|_| Error::Divergence("augmented Lagrangian not finite at warm start".into()))?;
    counts.grad_evals += 1;
    let mut g = lagrangian::gradient_raw(prob, &x, yv, beta)
        .map_err(|_| Error::Divergence("augmented Lagrangian gradient not finite".into()))?;

    let mut delta = opts.initial_radius;

    for iter in 1..=opts.max_iters {
        let g_norm = g.norm();
        let step: DVector<f64>;
        let hs: DVector<f64>;
        let at_boundary: bool;

        if g_norm <= eps {
            // First-order part holds; check curvature before certifying.
            let mut hvp_calls = 0usize;
            let est = {
                let mut op = |w: &DVector<f64>| {
                    hvp_calls += 1;
                    prob.hessian_apply(&x, yv, beta, w).expect("has_hessian")
                };
                min_eigenvalue_estimate_with_band(&mut op, dim, EIG_TOL, EIG_BUDGET, Some(eps))
            };
            counts.hvp_evals += hvp_calls;
            let margin_ok =
                est.converged || est.achieved_tol <= 0.25 * (est.value + eps).max(0.0);
            if margin_ok && est.value >= -eps {
                return Ok(SubsolverResult {
                    x: PrimalPoint::new(x)?,
                    certified_residual: g_norm,
                    oracle: counts,
                    converged: true,
                    iterations: iter,
                });
            }
            if est.value >= -eps {
                // Estimator exhausted its budget without resolving the
                // spectrum and found nothing to escape along; report the
                // best iterate honestly.
                break;
            }
            // Certified negative curvature: walk the full radius along it,
            // signed to decrease the model.
            let mut d = est.vector.clone() * delta;
            if g.dot(&d) > 0.0 {
                d = -d;
            }
            counts.hvp_evals += 1;
            hs = prob.hessian_apply(&x, yv, beta, &d).expect("has_hessian");
            step = d;
            at_boundary = true;
        } else {
            let cg = steihaug_cg(prob, &x, yv, beta, &g, delta, opts.cg_tol, &mut counts);
            step = cg.step;
            hs = cg.h_step;
            at_boundary = cg.at_boundary;
        }

        let model_decrease = -(g.dot(&step) + 0.5 * step.dot(&hs));
        let cand = &x + &step;
        counts.f_evals += 1;
        let l_cand = match lagrangian::value_raw(prob, &cand, yv, beta) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => {
                // Treat as a failed step: shrink and retry.
                delta *= SHRINK_FACTOR;
                if delta < 1e-16 {
                    return Err(Error::Divergence("trust region collapsed".into()));
                }
                continue;
            }
            Err(e) => return Err(e),
        };

        let ratio = if model_decrease > 0.0 {
            (l - l_cand) / model_decrease
        } else {
            // The model predicts no decrease (CG returned a null step):
            // force a shrink.
            -1.0
        };

        if ratio > ACCEPT_RATIO {
            x = cand;
            l = l_cand;
            counts.grad_evals += 1;
            g = lagrangian::gradient_raw(prob, &x, yv, beta)
                .map_err(|_| Error::Divergence("augmented Lagrangian gradient not finite".into()))?;
        }
        if ratio > EXPAND_RATIO && at_boundary {
            delta = (delta * EXPAND_FACTOR).min(MAX_RADIUS);
        } else if ratio < ACCEPT_RATIO {
            delta *= SHRINK_FACTOR;
            if delta < 1e-16 {
                break;
            }
        }
    }

    let residual = g.norm();
    Ok(SubsolverResult {
        x: PrimalPoint::new(x)?,
        certified_residual: residual,
        oracle: counts,
        converged: false,
        iterations: opts.max_iters,
    })
}

struct CgOutcome {
    step: DVector<f64>,
    h_step: DVector<f64>,
    at_boundary: bool,
}

/// Steihaug truncated conjugate gradient on the model
/// `m(p) = <g, p> + 1/2 <p, H p>` within `||p|| <= delta`. Stops on the
/// boundary, on negative curvature (following the current direction to the
/// boundary), or when the residual drops below `cg_tol * ||g||`.
fn steihaug_cg(
    prob: &dyn Problem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    beta: f64,
    g: &DVector<f64>,
    delta: f64,
    cg_tol: f64,
    counts: &mut OracleCounts,
) -> CgOutcome {
    let dim = g.len();
    let mut p = DVector::zeros(dim);
    let mut hp = DVector::zeros(dim);
    let mut r = -g;
    let mut d = r.clone();
    let mut rr = r.norm_squared();
    let tol = (cg_tol * g.norm()).max(1e-300);

    for _ in 0..(2 * dim + 10) {
        counts.hvp_evals += 1;
        let hd = prob.hessian_apply(x, y, beta, &d).expect("has_hessian");
        let dhd = d.dot(&hd);
        if dhd <= 0.0 {
            // Negative curvature: go to the boundary along d.
            let tau = boundary_step(&p, &d, delta);
            return CgOutcome {
                step: &p + &d * tau,
                h_step: &hp + &hd * tau,
                at_boundary: true,
            };
        }
        let alpha = rr / dhd;
        let p_next = &p + &d * alpha;
        if p_next.norm() >= delta {
            let tau = boundary_step(&p, &d, delta);
            return CgOutcome {
                step: &p + &d * tau,
                h_step: &hp + &hd * tau,
                at_boundary: true,
            };
        }
        hp += &hd * alpha;
        p = p_next;
        r -= &hd * alpha;
        let rr_new = r.norm_squared();
        if rr_new.sqrt() <= tol {
            return CgOutcome {
                step: p,
                h_step: hp,
                at_boundary: false,
            };
        }
        d = &r + &d * (rr_new / rr);
        rr = rr_new;
    }
    CgOutcome {
        step: p,
        h_step: hp,
        at_boundary: false,
    }
}

/// Positive root of `||p + tau d|| = delta`.
fn boundary_step(p: &DVector<f64>, d: &DVector<f64>, delta: f64) -> f64 {
    let dd = d.norm_squared();
    if dd <= 0.0 {
        return 0.0;
    }
    let pd = p.dot(d);
    let pp = p.norm_squared();
    let disc = (pd * pd + dd * (delta * delta - pp)).max(0.0);
    (-pd + disc.sqrt()) / dd
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{GenEigInstance, QuadraticProblem, SpectrumKind};

    #[test]
    fn convex_quadratic_certifies_second_order() {
        let prob = QuadraticProblem::ill_conditioned(8, 50.0).unwrap();
        let x0 = PrimalPoint::new(nalgebra::DVector::from_element(8, 2.0)).unwrap();
        let y = DualPoint::zeros(0);
        let res =
            trust_region(&prob, &y, 1.0, &x0, 1e-8, &TrustRegionOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.x.norm() < 1e-7, "||x|| = {}", res.x.norm());
        // Newton-like: far fewer iterations than the condition number.
        assert!(res.iterations < 30);
    }

    #[test]
    fn does_not_certify_a_strict_saddle() {
        // f(x) = -x^2 at the exact critical point 0: lambda_min = -2, so no
        // eps < 2 may certify; the solver must step away instead.
        let prob = QuadraticProblem::new(nalgebra::DVector::from_element(1, -1.0)).unwrap();
        let x0 = PrimalPoint::zeros(1);
        let y = DualPoint::zeros(0);
        let opts = TrustRegionOptions {
            max_iters: 30,
            ..Default::default()
        };
        let res = trust_region(&prob, &y, 1.0, &x0, 1.0, &opts).unwrap();
        assert!(!res.converged);
        assert!(res.x[0].abs() > 0.5, "stayed near the saddle: {}", res.x[0]);
    }

    #[test]
    fn escapes_saddle_of_pencil_problem() {
        // Start at the eigenvector of the largest pencil eigenvalue with its
        // exact multiplier: an exact critical point of L_beta with dense
        // solver-verified negative curvature.
        let inst = GenEigInstance::generate(8, SpectrumKind::PolyDecay(1.0), 33).unwrap();
        let prob = inst.build().unwrap();
        let (vals, vecs) = inst.dense_eigen().unwrap();
        let x0 = PrimalPoint::new(vecs.column(7).into_owned()).unwrap();
        let y = DualPoint::from_slice(&[-vals[7]]).unwrap();
        let beta = 4.0;

        // Verify the start is a saddle via the dense oracle.
        let g0 = lagrangian::gradient(&prob, &x0, &y, beta).unwrap();
        assert!(g0.norm() < 1e-10);

        let opts = TrustRegionOptions {
            max_iters: 500,
            ..Default::default()
        };
        let res = trust_region(&prob, &y, beta, &x0, 1e-6, &opts).unwrap();
        assert!(res.converged);
        assert!(res.certified_residual <= 1e-6);
        // Escaped: the objective dropped strictly below the saddle value.
        let f_end = prob.objective(&res.x);
        assert!(
            f_end < vals[7] - 1e-3,
            "objective {} vs saddle {}",
            f_end,
            vals[7]
        );
    }

    #[test]
    fn requires_hessian_capability() {
        let (inst, _) =
            crate::problems::ClusteringInstance::synthetic_blobs(2, 2, 2, 4.0, 3).unwrap();
        let prob = inst.build().unwrap();
        let x0 = PrimalPoint::zeros(prob.dim_primal());
        let y = DualPoint::zeros(prob.dim_constraint());
        assert!(matches!(
            trust_region(&prob, &y, 1.0, &x0, 1e-4, &TrustRegionOptions::default()),
            Err(Error::MissingCapability(_))
        ));
    }
}
