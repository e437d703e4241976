//! Unconstrained diagonal quadratic, used as a diagnostic problem: it has
//! no constraints (`m = 0`), a closed-form solution, and a configurable
//! condition number, which makes solver bookkeeping and edge cases easy to
//! pin down.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::{Problem, ProximalTerm, SmoothnessConstants};

/// `f(x) = sum_i diag_i x_i^2`, `A = 0`, `g = 0`. Negative diagonal entries
/// are allowed so that saddle and negative-curvature behavior can be tested.
pub struct QuadraticProblem {
    diag: DVector<f64>,
    prox: ProximalTerm,
}

impl QuadraticProblem {
    pub fn new(diag: DVector<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidProblem("quadratic needs dimension >= 1".into()));
        }
        if !diag.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidProblem("quadratic diagonal must be finite".into()));
        }
        Ok(Self {
            diag,
            prox: ProximalTerm::Zero,
        })
    }

    /// `f(x) = ||x||^2`.
    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DVector::from_element(dim, 1.0))
    }

    /// Positive spectrum spread geometrically from 1 to `cond`.
    pub fn ill_conditioned(dim: usize, cond: f64) -> Result<Self> {
        if dim < 2 || cond < 1.0 {
            return Err(Error::InvalidProblem(
                "ill-conditioned quadratic needs dim >= 2 and cond >= 1".into(),
            ));
        }
        let diag = DVector::from_fn(dim, |i, _| cond.powf(i as f64 / (dim - 1) as f64));
        Self::new(diag)
    }
}

impl Problem for QuadraticProblem {
    fn dim_primal(&self) -> usize {
        self.diag.len()
    }

    fn dim_constraint(&self) -> usize {
        0
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        x.iter().zip(self.diag.iter()).map(|(v, d)| d * v * v).sum()
    }

    fn objective_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| 2.0 * self.diag[i] * x[i])
    }

    fn constraint(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn jacobian_t_apply(&self, _x: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.diag.len())
    }

    fn proximal_term(&self) -> &ProximalTerm {
        &self.prox
    }

    fn smoothness(&self) -> SmoothnessConstants {
        SmoothnessConstants {
            lambda_f: Some(2.0 * self.diag.iter().fold(0.0f64, |a, v| a.max(v.abs()))),
            lambda_a: Some(0.0),
            lambda_a_max_jac: Some(0.0),
            ..Default::default()
        }
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian_apply(
        &self,
        _x: &DVector<f64>,
        _y: &DVector<f64>,
        _beta: f64,
        w: &DVector<f64>,
    ) -> Option<DVector<f64>> {
        Some(DVector::from_fn(w.len(), |i, _| 2.0 * self.diag[i] * w[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_dimensions() {
        let p = QuadraticProblem::identity(4).unwrap();
        assert_eq!(p.dim_constraint(), 0);
        let x = DVector::from_element(4, 1.0);
        assert_eq!(p.constraint(&x).len(), 0);
        assert_eq!(p.objective(&x), 4.0);
    }

    #[test]
    fn condition_number_is_respected() {
        let p = QuadraticProblem::ill_conditioned(5, 1000.0).unwrap();
        let s = p.smoothness();
        assert_eq!(s.lambda_f, Some(2000.0));
    }
}
