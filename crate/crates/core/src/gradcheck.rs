//! Finite-difference verification of problem derivatives.
//!
//! Every check draws random base points with `||x|| <= 1`, a random unit
//! direction, and compares an analytic directional derivative against a
//! central difference with step `h = 1e-6 (1 + ||x||)`. Relative error is
//! measured as `|a - b| / (1 + max(|a|, |b|))` so that near-zero derivatives
//! do not blow the quotient up.

use nalgebra::DVector;
use rand::Rng;

use crate::linalg::{random_unit_vector, seeded_rng, standard_normal_vector};
use crate::problem::Problem;

/// Default relative tolerance for all derivative checks.
pub const DEFAULT_TOL: f64 = 1e-5;

/// Relative tolerance for the Hessian symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Outcome of one derivative check over a batch of random draws.
#[derive(Debug, Clone)]
pub struct DerivativeCheck {
    /// Which callback was checked.
    pub name: &'static str,
    /// Worst relative error over all draws (0 when skipped).
    pub max_rel_err: f64,
    /// Tolerance the check was run at.
    pub tol: f64,
    /// Number of random draws.
    pub samples: usize,
    /// True when the check does not apply (e.g. Jacobian checks on an
    /// unconstrained problem).
    pub skipped: bool,
}

impl DerivativeCheck {
    pub fn passed(&self) -> bool {
        self.skipped || self.max_rel_err <= self.tol
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

fn random_base_point(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    // Uniform radius in (0, 1] keeps draws away from pathological scales.
    let r: f64 = rng.random::<f64>().max(1e-3);
    random_unit_vector(dim, rng) * r
}

fn fd_step(x: &DVector<f64>) -> f64 {
    1e-6 * (1.0 + x.norm())
}

/// Checks the objective gradient against central differences of `f`.
pub fn check_objective_gradient(
    prob: &dyn Problem,
    samples: usize,
    tol: f64,
    seed: u64,
) -> DerivativeCheck {
    let mut rng = seeded_rng(seed);
    let d = prob.dim_primal();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = random_base_point(d, &mut rng);
        let w = random_unit_vector(d, &mut rng);
        let h = fd_step(&x);
        let fd = (prob.objective(&(&x + h * &w)) - prob.objective(&(&x - h * &w))) / (2.0 * h);
        let an = prob.objective_grad(&x).dot(&w);
        worst = worst.max(rel_err(an, fd));
    }
    DerivativeCheck {
        name: "objective gradient",
        max_rel_err: worst,
        tol,
        samples,
        skipped: false,
    }
}

/// Checks `DA(x)^T v` against central differences of `t -> <A(x + t w), v>`.
pub fn check_jacobian_adjoint(
    prob: &dyn Problem,
    samples: usize,
    tol: f64,
    seed: u64,
) -> DerivativeCheck {
    let d = prob.dim_primal();
    let m = prob.dim_constraint();
    if m == 0 {
        return DerivativeCheck {
            name: "constraint Jacobian adjoint",
            max_rel_err: 0.0,
            tol,
            samples: 0,
            skipped: true,
        };
    }
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = random_base_point(d, &mut rng);
        let v = random_unit_vector(m, &mut rng);
        let w = random_unit_vector(d, &mut rng);
        let h = fd_step(&x);
        let fd = (prob.constraint(&(&x + h * &w)).dot(&v)
            - prob.constraint(&(&x - h * &w)).dot(&v))
            / (2.0 * h);
        let an = prob.jacobian_t_apply(&x, &v).dot(&w);
        worst = worst.max(rel_err(an, fd));
    }
    DerivativeCheck {
        name: "constraint Jacobian adjoint",
        max_rel_err: worst,
        tol,
        samples,
        skipped: false,
    }
}

/// Checks the assembled augmented-Lagrangian gradient against central
/// differences of the augmented-Lagrangian value at random `(x, y, beta)`.
pub fn check_lagrangian_gradient(
    prob: &dyn Problem,
    samples: usize,
    tol: f64,
    seed: u64,
) -> DerivativeCheck {
    let mut rng = seeded_rng(seed);
    let d = prob.dim_primal();
    let m = prob.dim_constraint();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = random_base_point(d, &mut rng);
        let y = standard_normal_vector(m, &mut rng);
        let beta = 10f64.powf(rng.random::<f64>() * 3.0 - 1.0);
        let w = random_unit_vector(d, &mut rng);
        let h = fd_step(&x);
        let lv = |p: &DVector<f64>| {
            let a = prob.constraint(p);
            prob.objective(p) + a.dot(&y) + 0.5 * beta * a.norm_squared()
        };
        let fd = (lv(&(&x + h * &w)) - lv(&(&x - h * &w))) / (2.0 * h);
        let a = prob.constraint(&x);
        let an = (prob.objective_grad(&x) + prob.jacobian_t_apply(&x, &(&y + beta * &a))).dot(&w);
        worst = worst.max(rel_err(an, fd));
    }
    DerivativeCheck {
        name: "augmented Lagrangian gradient",
        max_rel_err: worst,
        tol,
        samples,
        skipped: false,
    }
}

/// Checks the Hessian-vector product against central differences of the
/// augmented-Lagrangian gradient. Skipped when the problem does not carry
/// second-order information.
pub fn check_hessian_apply(
    prob: &dyn Problem,
    samples: usize,
    tol: f64,
    seed: u64,
) -> DerivativeCheck {
    if !prob.has_hessian() {
        return DerivativeCheck {
            name: "Hessian-vector product",
            max_rel_err: 0.0,
            tol,
            samples: 0,
            skipped: true,
        };
    }
    let mut rng = seeded_rng(seed);
    let d = prob.dim_primal();
    let m = prob.dim_constraint();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = random_base_point(d, &mut rng);
        let y = standard_normal_vector(m, &mut rng);
        let beta = 10f64.powf(rng.random::<f64>() * 3.0 - 1.0);
        let w = random_unit_vector(d, &mut rng);
        let h = fd_step(&x);
        let grad = |p: &DVector<f64>| {
            let a = prob.constraint(p);
            prob.objective_grad(p) + prob.jacobian_t_apply(p, &(&y + beta * &a))
        };
        let fd = (grad(&(&x + h * &w)) - grad(&(&x - h * &w))) / (2.0 * h);
        let an = prob.hessian_apply(&x, &y, beta, &w).expect("has_hessian");
        worst = worst.max(rel_err_vec(&an, &fd));
    }
    DerivativeCheck {
        name: "Hessian-vector product",
        max_rel_err: worst,
        tol,
        samples,
        skipped: false,
    }
}

/// Checks Hessian symmetry: `<H u, w> = <H w, u>` on random pairs.
pub fn check_hessian_symmetry(
    prob: &dyn Problem,
    samples: usize,
    tol: f64,
    seed: u64,
) -> DerivativeCheck {
    if !prob.has_hessian() {
        return DerivativeCheck {
            name: "Hessian symmetry",
            max_rel_err: 0.0,
            tol,
            samples: 0,
            skipped: true,
        };
    }
    let mut rng = seeded_rng(seed);
    let d = prob.dim_primal();
    let m = prob.dim_constraint();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = random_base_point(d, &mut rng);
        let y = standard_normal_vector(m, &mut rng);
        let beta = 10f64.powf(rng.random::<f64>() * 3.0 - 1.0);
        let u = random_unit_vector(d, &mut rng);
        let w = random_unit_vector(d, &mut rng);
        let hu = prob.hessian_apply(&x, &y, beta, &u).expect("has_hessian");
        let hw = prob.hessian_apply(&x, &y, beta, &w).expect("has_hessian");
        worst = worst.max(rel_err(hu.dot(&w), hw.dot(&u)));
    }
    DerivativeCheck {
        name: "Hessian symmetry",
        max_rel_err: worst,
        tol,
        samples,
        skipped: false,
    }
}

/// Runs the full battery of derivative checks.
pub fn check_all(prob: &dyn Problem, samples: usize, seed: u64) -> Vec<DerivativeCheck> {
    vec![
        check_objective_gradient(prob, samples, DEFAULT_TOL, seed),
        check_jacobian_adjoint(prob, samples, DEFAULT_TOL, seed.wrapping_add(1)),
        check_lagrangian_gradient(prob, samples, DEFAULT_TOL, seed.wrapping_add(2)),
        check_hessian_apply(prob, samples, DEFAULT_TOL, seed.wrapping_add(3)),
        check_hessian_symmetry(prob, samples, SYMMETRY_TOL, seed.wrapping_add(4)),
    ]
}
