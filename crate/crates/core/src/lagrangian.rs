//! Augmented Lagrangian evaluation.
//!
//! For penalty weight `beta >= 0`,
//!
//! ```text
//! L_beta(x, y) = f(x) + <A(x), y> + (beta/2) ||A(x)||^2 .
//! ```
//!
//! The structural term `g` is never folded in here; inner solvers handle it
//! through projections or proximal maps, and stationarity is measured as a
//! distance to its subdifferential.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::points::{DualPoint, PrimalPoint};
use crate::problem::Problem;

fn check_dims(prob: &dyn Problem, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
    if x.len() != prob.dim_primal() {
        return Err(Error::DimensionMismatch {
            what: "primal point",
            expected: prob.dim_primal(),
            got: x.len(),
        });
    }
    if y.len() != prob.dim_constraint() {
        return Err(Error::DimensionMismatch {
            what: "dual point",
            expected: prob.dim_constraint(),
            got: y.len(),
        });
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidOptions(format!(
            "penalty weight must be finite and nonnegative, got {beta}"
        )))
    }
}

/// `L_beta(x, y)` on raw vectors; dimension checks are the caller's job.
pub(crate) fn value_raw(
    prob: &dyn Problem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    beta: f64,
) -> Result<f64> {
    let a = prob.constraint(x);
    let v = prob.objective(x) + a.dot(y) + 0.5 * beta * a.norm_squared();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("augmented Lagrangian value"))
    }
}

/// Gradient of `L_beta(., y)` on raw vectors.
///
/// Costs one objective gradient, one constraint evaluation, and one
/// Jacobian-transpose action with argument `y + beta * A(x)`.
pub(crate) fn gradient_raw(
    prob: &dyn Problem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    beta: f64,
) -> Result<DVector<f64>> {
    let a = prob.constraint(x);
    let w = y + beta * a;
    let g = prob.objective_grad(x) + prob.jacobian_t_apply(x, &w);
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(Error::NonFinite("augmented Lagrangian gradient"))
    }
}

/// Augmented Lagrangian value `L_beta(x, y)`.
pub fn value(prob: &dyn Problem, x: &PrimalPoint, y: &DualPoint, beta: f64) -> Result<f64> {
    check_dims(prob, x, y)?;
    check_beta(beta)?;
    value_raw(prob, x, y, beta)
}

/// Gradient of the augmented Lagrangian with respect to `x`:
/// `grad f(x) + DA(x)^T (y + beta A(x))`.
pub fn gradient(
    prob: &dyn Problem,
    x: &PrimalPoint,
    y: &DualPoint,
    beta: f64,
) -> Result<DVector<f64>> {
    check_dims(prob, x, y)?;
    check_beta(beta)?;
    gradient_raw(prob, x, y, beta)
}

/// Upper bound on the Lipschitz constant of `x -> grad L_beta(x, y)` over a
/// region where `||A(x)|| <= rho_prime`:
///
/// ```text
/// lambda_f + sqrt(m) lambda_a ||y|| + (sqrt(m) lambda_a rho_prime + d lambda_a_max_jac^2) beta .
/// ```
///
/// Inner solvers use `1 / bound` as an initial step-size guess; the bound is
/// a loose global one, so they still backtrack from there.
#[allow(clippy::too_many_arguments)]
pub fn gradient_lipschitz_bound(
    lambda_f: f64,
    lambda_a: f64,
    lambda_a_max_jac: f64,
    m: usize,
    d: usize,
    y_norm: f64,
    rho_prime: f64,
    beta: f64,
) -> f64 {
    let sqrt_m = (m as f64).sqrt();
    lambda_f
        + sqrt_m * lambda_a * y_norm
        + (sqrt_m * lambda_a * rho_prime + d as f64 * lambda_a_max_jac * lambda_a_max_jac) * beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::geneig::GenEigInstance;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    struct ZeroProblem {
        dim: usize,
        m: usize,
        prox: crate::problem::ProximalTerm,
    }

    impl Problem for ZeroProblem {
        fn dim_primal(&self) -> usize {
            self.dim
        }
        fn dim_constraint(&self) -> usize {
            self.m
        }
        fn objective(&self, _x: &DVector<f64>) -> f64 {
            0.0
        }
        fn objective_grad(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(x.len())
        }
        fn constraint(&self, _x: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(self.m)
        }
        fn jacobian_t_apply(&self, _x: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(self.dim)
        }
        fn proximal_term(&self) -> &crate::problem::ProximalTerm {
            &self.prox
        }
    }

    fn geneig_c12() -> impl Problem {
        // C = diag(1, 2), B = I.
        GenEigInstance::new(
            DMatrix::identity(2, 2),
            DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0])),
        )
        .unwrap()
        .build()
        .unwrap()
    }

    #[test]
    fn value_vanishes_for_trivial_problem() {
        let prob = ZeroProblem {
            dim: 3,
            m: 2,
            prox: crate::problem::ProximalTerm::Zero,
        };
        let x = PrimalPoint::from_slice(&[0.3, -1.0, 2.0]).unwrap();
        let y = DualPoint::from_slice(&[5.0, -7.0]).unwrap();
        assert_eq!(value(&prob, &x, &y, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn value_at_feasible_point_is_objective() {
        let prob = geneig_c12();
        let x = PrimalPoint::from_slice(&[1.0, 0.0]).unwrap();
        let y = DualPoint::from_slice(&[0.5]).unwrap();
        assert_eq!(value(&prob, &x, &y, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn value_matches_hand_computation() {
        // f = 4, A = 3, <A,y> = 1.5, (beta/2) A^2 = 18.
        let prob = geneig_c12();
        let x = PrimalPoint::from_slice(&[2.0, 0.0]).unwrap();
        let y = DualPoint::from_slice(&[0.5]).unwrap();
        assert_relative_eq!(value(&prob, &x, &y, 4.0).unwrap(), 23.5, max_relative = 1e-14);
    }

    #[test]
    fn gradient_matches_hand_computation() {
        // grad f = (4, 0); DA^T (y + beta A) = 2x * 3 = (12, 0).
        let prob = geneig_c12();
        let x = PrimalPoint::from_slice(&[2.0, 0.0]).unwrap();
        let y = DualPoint::from_slice(&[0.0]).unwrap();
        let g = gradient(&prob, &x, &y, 1.0).unwrap();
        assert_relative_eq!(g[0], 16.0, max_relative = 1e-14);
        assert_relative_eq!(g[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gradient_reduces_to_objective_grad_when_feasible_and_dual_zero() {
        let prob = geneig_c12();
        let x = PrimalPoint::from_slice(&[0.0, 1.0]).unwrap();
        let y = DualPoint::from_slice(&[0.0]).unwrap();
        let g = gradient(&prob, &x, &y, 3.0).unwrap();
        assert_relative_eq!(g[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(g[1], 4.0, max_relative = 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let prob = geneig_c12();
        let x = PrimalPoint::from_slice(&[1.0, 0.0, 0.0]).unwrap();
        let y = DualPoint::from_slice(&[0.0]).unwrap();
        assert!(matches!(
            value(&prob, &x, &y, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn overflow_is_reported() {
        let prob = geneig_c12();
        let x = PrimalPoint::from_slice(&[1e200, 0.0]).unwrap();
        let y = DualPoint::from_slice(&[0.0]).unwrap();
        assert!(matches!(
            value(&prob, &x, &y, 1.0),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn lipschitz_bound_examples() {
        assert_eq!(gradient_lipschitz_bound(0.0, 0.0, 0.0, 4, 7, 3.0, 2.0, 9.0), 0.0);
        // 1 + 0 + (0 + 3 * 4) * 5 = 61.
        assert_eq!(gradient_lipschitz_bound(1.0, 0.0, 2.0, 1, 3, 7.0, 1.0, 5.0), 61.0);
    }

    #[test]
    fn lipschitz_bound_is_monotone_in_beta() {
        use rand::Rng;
        let mut rng = crate::linalg::seeded_rng(7);
        for _ in 0..100 {
            let lf: f64 = rng.random::<f64>() * 5.0;
            let la: f64 = rng.random::<f64>() * 5.0;
            let laj: f64 = rng.random::<f64>() * 5.0;
            let yn: f64 = rng.random::<f64>() * 10.0;
            let rp: f64 = rng.random::<f64>() * 10.0;
            let b1: f64 = rng.random::<f64>() * 100.0;
            let b2 = b1 + rng.random::<f64>() * 100.0;
            let v1 = gradient_lipschitz_bound(lf, la, laj, 3, 6, yn, rp, b1);
            let v2 = gradient_lipschitz_bound(lf, la, laj, 3, 6, yn, rp, b2);
            assert!(v2 >= v1);
        }
    }
}
