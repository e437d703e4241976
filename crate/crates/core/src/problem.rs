//! Problem-definition interface: smooth objective, nonlinear constraint map,
//! and the structural (proximal) part of the regularizer.

use nalgebra::DVector;

/// Optional Lipschitz and boundedness constants of the problem data.
///
/// When present they seed step sizes via
/// [`crate::lagrangian::gradient_lipschitz_bound`]; when absent, inner
/// solvers fall back to pure backtracking. The restricted constants are
/// suprema over the region the iterates visit and are only cheap in closed
/// form for specific problems.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SmoothnessConstants {
    /// Lipschitz constant of the objective gradient.
    pub lambda_f: Option<f64>,
    /// Lipschitz constant of the constraint Jacobian in the spectral norm.
    pub lambda_a: Option<f64>,
    /// Restricted bound `sup ||grad f(x)||`.
    pub lambda_f_max_grad: Option<f64>,
    /// Restricted bound `sup ||DA(x)||`.
    pub lambda_a_max_jac: Option<f64>,
}

/// A closed convex set accessed through projection and tangent-cone queries.
pub trait ConvexSet: Send + Sync {
    /// Euclidean projection onto the set.
    fn project(&self, v: &DVector<f64>) -> DVector<f64>;

    /// Norm of the projection of `u` onto the tangent cone at `x`.
    ///
    /// Equals the Euclidean distance from `u` to the normal cone at `x`,
    /// which is the subdifferential of the set's indicator function. `x`
    /// must belong to the set.
    fn tangent_residual(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64;

    /// How far `x` is from satisfying the set's defining inequalities
    /// (0 inside the set). Used for membership tests and diagnostics.
    fn violation(&self, x: &DVector<f64>) -> f64;

    fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

/// A general proximal term accessed through its proximal map.
pub trait ProxOperator: Send + Sync {
    /// `prox_{step * g}(v)`.
    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64>;

    /// Euclidean distance from `u` to the subdifferential of `g` at `x`.
    fn subdiff_distance(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64;

    /// `g(x)` itself, when cheap to evaluate. Inner solvers use it for
    /// function-value restarts and monotonicity bookkeeping on the
    /// composite objective; without it they fall back to a momentum
    /// alignment restart.
    fn value(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }

    /// Distance from `u` to the scaled subdifferential `∂g(x)/beta`.
    ///
    /// Needed by the regularity estimator. Returns `None` when the term
    /// cannot supply it.
    fn scaled_subdiff_distance(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _beta: f64,
    ) -> Option<f64> {
        None
    }
}

/// The structural part `g` of the objective, handled by inner solvers
/// through projections or proximal maps rather than folded into the
/// augmented Lagrangian.
pub enum ProximalTerm {
    /// `g = 0`: the prox step is the identity and the stationarity residual
    /// is the plain gradient norm.
    Zero,
    /// `g` is the indicator of a convex set: the prox step is the exact
    /// projection and the residual is the tangent-cone residual.
    Indicator(Box<dyn ConvexSet>),
    /// A general proximal term with a caller-supplied subdifferential
    /// distance.
    GeneralProx(Box<dyn ProxOperator>),
}

impl ProximalTerm {
    /// Applies the prox/projection step of a proximal-gradient iteration.
    pub fn step(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        match self {
            ProximalTerm::Zero => v.clone(),
            ProximalTerm::Indicator(set) => set.project(v),
            ProximalTerm::GeneralProx(op) => op.prox(v, step),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ProximalTerm::Zero)
    }

    /// `g(x)` for feasible iterates: zero for the trivial and indicator
    /// variants (solvers keep iterates inside the set), the term's own
    /// value for general proximal terms when it exposes one.
    pub fn structural_value(&self, x: &DVector<f64>) -> Option<f64> {
        match self {
            ProximalTerm::Zero | ProximalTerm::Indicator(_) => Some(0.0),
            ProximalTerm::GeneralProx(op) => op.value(x),
        }
    }
}

impl std::fmt::Debug for ProximalTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProximalTerm::Zero => write!(f, "Zero"),
            ProximalTerm::Indicator(_) => write!(f, "Indicator(..)"),
            ProximalTerm::GeneralProx(_) => write!(f, "GeneralProx(..)"),
        }
    }
}

/// A constrained problem instance.
///
/// Implementations must be pure: calling any method twice with the same
/// arguments returns the same value, and concurrent calls from independent
/// solver runs are safe.
pub trait Problem: Send + Sync {
    /// Primal dimension `d`.
    fn dim_primal(&self) -> usize;

    /// Constraint dimension `m` (0 for unconstrained problems).
    fn dim_constraint(&self) -> usize;

    /// Smooth objective `f(x)`.
    fn objective(&self, x: &DVector<f64>) -> f64;

    /// Gradient of the smooth objective.
    fn objective_grad(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Constraint map `A(x)` in R^m.
    fn constraint(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Action of the transposed constraint Jacobian, `DA(x)^T v`.
    fn jacobian_t_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// The structural term `g`.
    fn proximal_term(&self) -> &ProximalTerm;

    fn smoothness(&self) -> SmoothnessConstants {
        SmoothnessConstants::default()
    }

    /// Whether [`Problem::hessian_apply`] is available.
    fn has_hessian(&self) -> bool {
        false
    }

    /// Action of the augmented-Lagrangian Hessian on `w`:
    /// `∇²_x L_beta(x, y) w`. Returns `None` when unavailable.
    fn hessian_apply(
        &self,
        _x: &DVector<f64>,
        _y: &DVector<f64>,
        _beta: f64,
        _w: &DVector<f64>,
    ) -> Option<DVector<f64>> {
        None
    }
}
