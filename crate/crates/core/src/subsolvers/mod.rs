//! Inner solvers for the augmented-Lagrangian subproblems: given `(y, beta)`
//! and a warm start, find `x` with `dist(-grad_x L_beta(x, y), ∂g(x)) <= eps`
//! (first order) or additionally `lambda_min(H) >= -eps` (trust region),
//! while counting every oracle call.
//!
//! First-order solvers certify termination through the prox-gradient
//! mapping: if `x+ = prox_{eta g}(x - eta grad L(x))` then
//!
//! ```text
//! dist(-grad L(x+), ∂g(x+)) <= (1 + eta * lambda) ||x - x+|| / eta
//! ```
//!
//! for any local Lipschitz constant `lambda` of the gradient between `x`
//! and `x+`. The bound is free per iteration; the exact metric is still
//! re-evaluated once by the outer loop at exit.

mod apgm;
mod projected_gradient;
mod trust_region;

pub use apgm::apgm;
pub use projected_gradient::projected_gradient;
pub use trust_region::trust_region;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lagrangian;
use crate::points::{DualPoint, PrimalPoint};
use crate::problem::{Problem, ProximalTerm};

/// Tally of oracle calls made by a solver invocation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OracleCounts {
    /// Augmented-Lagrangian value evaluations.
    pub f_evals: usize,
    /// Augmented-Lagrangian gradient evaluations.
    pub grad_evals: usize,
    /// Prox or projection applications.
    pub prox_evals: usize,
    /// Hessian-vector products.
    pub hvp_evals: usize,
}

impl std::ops::AddAssign for OracleCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.f_evals += rhs.f_evals;
        self.grad_evals += rhs.grad_evals;
        self.prox_evals += rhs.prox_evals;
        self.hvp_evals += rhs.hvp_evals;
    }
}

/// Outcome of one inner solve.
#[derive(Debug, Clone)]
pub struct SubsolverResult {
    pub x: PrimalPoint,
    /// The certificate value at the returned point; when `converged` it is
    /// at most the requested tolerance and upper-bounds the true
    /// subdifferential distance.
    pub certified_residual: f64,
    pub oracle: OracleCounts,
    pub converged: bool,
    pub iterations: usize,
}

/// Options for the accelerated proximal gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApgmOptions {
    pub max_iters: usize,
    /// Line-search shrink factor in (0, 1).
    pub shrink: f64,
    /// Step used when the problem carries no smoothness constants.
    pub initial_step: f64,
    /// Reset momentum whenever the objective increases.
    pub restart: bool,
}

impl Default for ApgmOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            shrink: 0.5,
            initial_step: 1.0,
            restart: true,
        }
    }
}

/// Options for the plain projected/proximal gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjGradOptions {
    pub max_iters: usize,
    pub shrink: f64,
    pub initial_step: f64,
}

impl Default for ProjGradOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            shrink: 0.5,
            initial_step: 1.0,
        }
    }
}

/// Options for the trust-region solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrustRegionOptions {
    pub max_iters: usize,
    pub initial_radius: f64,
    /// Relative residual target for the Steihaug CG solve.
    pub cg_tol: f64,
}

impl Default for TrustRegionOptions {
    fn default() -> Self {
        Self {
            max_iters: 2_000,
            initial_radius: 1.0,
            cg_tol: 1e-8,
        }
    }
}

/// Which inner solver the outer loop dispatches to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SubsolverKind {
    Apgm(ApgmOptions),
    ProjectedGradient(ProjGradOptions),
    TrustRegion(TrustRegionOptions),
}

impl Default for SubsolverKind {
    fn default() -> Self {
        SubsolverKind::Apgm(ApgmOptions::default())
    }
}

impl SubsolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SubsolverKind::Apgm(_) => "apgm",
            SubsolverKind::ProjectedGradient(_) => "projected_gradient",
            SubsolverKind::TrustRegion(_) => "trust_region",
        }
    }

    /// Copy of the kind with its iteration cap replaced.
    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        match &mut self {
            SubsolverKind::Apgm(o) => o.max_iters = max_iters,
            SubsolverKind::ProjectedGradient(o) => o.max_iters = max_iters,
            SubsolverKind::TrustRegion(o) => o.max_iters = max_iters,
        }
        self
    }
}

/// Dispatches to the configured solver.
pub fn run(
    kind: &SubsolverKind,
    prob: &dyn Problem,
    y: &DualPoint,
    beta: f64,
    x0: &PrimalPoint,
    eps: f64,
) -> Result<SubsolverResult> {
    match kind {
        SubsolverKind::Apgm(opts) => apgm(prob, y, beta, x0, eps, opts),
        SubsolverKind::ProjectedGradient(opts) => projected_gradient(prob, y, beta, x0, eps, opts),
        SubsolverKind::TrustRegion(opts) => trust_region(prob, y, beta, x0, eps, opts),
    }
}

pub(crate) fn validate_inputs(
    prob: &dyn Problem,
    y: &DualPoint,
    beta: f64,
    x0: &PrimalPoint,
    eps: f64,
) -> Result<()> {
    if x0.len() != prob.dim_primal() {
        return Err(Error::DimensionMismatch {
            what: "warm start",
            expected: prob.dim_primal(),
            got: x0.len(),
        });
    }
    if y.len() != prob.dim_constraint() {
        return Err(Error::DimensionMismatch {
            what: "dual point",
            expected: prob.dim_constraint(),
            got: y.len(),
        });
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidOptions(format!(
            "penalty weight must be positive and finite, got {beta}"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidOptions(format!(
            "inner tolerance must be positive, got {eps}"
        )));
    }
    if let ProximalTerm::Indicator(set) = prob.proximal_term() {
        let violation = set.violation(x0);
        if violation > crate::stationarity::MEMBERSHIP_TOL {
            return Err(Error::InfeasiblePoint { violation });
        }
    }
    Ok(())
}

/// First step-size guess: `1 / lambda_beta` from the smoothness bound when
/// the constants exist, otherwise the configured fallback. Backtracking
/// starts from here either way.
pub(crate) fn initial_step(
    prob: &dyn Problem,
    y: &DualPoint,
    beta: f64,
    x0: &nalgebra::DVector<f64>,
    fallback: f64,
) -> f64 {
    let s = prob.smoothness();
    if let (Some(lf), Some(la), Some(laj)) = (s.lambda_f, s.lambda_a, s.lambda_a_max_jac) {
        let rho_prime = prob.constraint(x0).norm();
        let bound = lagrangian::gradient_lipschitz_bound(
            lf,
            la,
            laj,
            prob.dim_constraint(),
            prob.dim_primal(),
            y.norm(),
            rho_prime,
            beta,
        );
        if bound > 0.0 && bound.is_finite() {
            return 1.0 / bound;
        }
    }
    fallback
}

/// Backtracking proximal step from `base`: halves the step until the
/// standard sufficient-decrease (descent-lemma) test holds. Also returns
/// the accepted step size.
pub(crate) fn backtrack_step(
    prob: &dyn Problem,
    base: &nalgebra::DVector<f64>,
    base_value: f64,
    base_grad: &nalgebra::DVector<f64>,
    y: &nalgebra::DVector<f64>,
    beta: f64,
    eta0: f64,
    shrink: f64,
    counts: &mut OracleCounts,
) -> Result<(nalgebra::DVector<f64>, f64, f64)> {
    let prox = prob.proximal_term();
    let mut eta = eta0;
    loop {
        let target = base - base_grad * eta;
        let cand = prox.step(&target, eta);
        counts.prox_evals += 1;
        counts.f_evals += 1;
        match lagrangian::value_raw(prob, &cand, y, beta) {
            Ok(l_c) => {
                let diff = &cand - base;
                let quad = base_value + base_grad.dot(&diff) + diff.norm_squared() / (2.0 * eta);
                if l_c <= quad + 1e-12 * (1.0 + base_value.abs()) {
                    return Ok((cand, l_c, eta));
                }
            }
            // Overshot into overflow territory; shrinking the step is the fix.
            Err(Error::NonFinite(_)) => {}
            Err(e) => return Err(e),
        }
        eta *= shrink;
        if eta < 1e-20 {
            return Err(Error::Divergence(
                "backtracking line search collapsed below 1e-20".into(),
            ));
        }
    }
}
