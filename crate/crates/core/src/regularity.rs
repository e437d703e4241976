//! Online estimation of the regularity constant that governs how fast the
//! penalty schedule closes the feasibility gap, plus closed-form
//! per-problem lower bounds.
//!
//! The estimated quantity is the quotient
//!
//! ```text
//! nu_hat = dist(-DA(x)^T A(x), ∂g(x)/beta) / ||A(x)|| ,
//! ```
//!
//! evaluated along actual iterates (the condition is local, near the
//! constraint set, not global). At feasible points the quotient is vacuous
//! and the estimate is flagged degenerate instead of fabricating a number.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::points::PrimalPoint;
use crate::problem::{Problem, ProximalTerm};
use crate::stationarity::MEMBERSHIP_TOL;

/// Feasibility below this threshold makes the quotient undefined.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// One pointwise estimate of the regularity constant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegularityEstimate {
    /// The quotient; 0 when degenerate.
    pub value: f64,
    /// `||A(x)||` at the evaluation point.
    pub feasibility: f64,
    /// True when the point is feasible to within the degeneracy threshold.
    pub degenerate: bool,
}

/// Estimates the regularity constant at `(x, beta)`.
///
/// For indicator terms the scaled subdifferential equals the normal cone
/// itself (cones are invariant under positive scaling), so the distance is
/// the tangent-cone residual and the estimate does not depend on `beta`.
/// General proximal terms must supply the scaled distance.
pub fn estimate(prob: &dyn Problem, x: &PrimalPoint, beta: f64) -> Result<RegularityEstimate> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidOptions(format!(
            "penalty weight must be positive, got {beta}"
        )));
    }
    if x.len() != prob.dim_primal() {
        return Err(Error::DimensionMismatch {
            what: "primal point",
            expected: prob.dim_primal(),
            got: x.len(),
        });
    }
    let a = prob.constraint(x);
    let feasibility = a.norm();
    if feasibility <= DEGENERACY_THRESHOLD {
        return Ok(RegularityEstimate {
            value: 0.0,
            feasibility,
            degenerate: true,
        });
    }
    let u = -prob.jacobian_t_apply(x, &a);
    let dist = match prob.proximal_term() {
        ProximalTerm::Zero => u.norm(),
        ProximalTerm::Indicator(set) => {
            let violation = set.violation(x);
            if violation > MEMBERSHIP_TOL {
                return Err(Error::InfeasiblePoint { violation });
            }
            set.tangent_residual(x, &u)
        }
        ProximalTerm::GeneralProx(op) => op
            .scaled_subdiff_distance(x, &u, beta)
            .ok_or(Error::MissingCapability(
                "regularity estimation needs a scaled subdifferential distance",
            ))?,
    };
    if !dist.is_finite() {
        return Err(Error::NonFinite("regularity estimate"));
    }
    Ok(RegularityEstimate {
        value: dist / feasibility,
        feasibility,
        degenerate: false,
    })
}

/// Closed-form clustering lower bound: the minimum row norm of the factor
/// matrix. Valid when the iterate is strictly inside the trace ball and the
/// factor has near-orthonormal columns; see [`clustering_preconditions`].
pub fn clustering_lower_bound(v: &DMatrix<f64>) -> f64 {
    (0..v.nrows())
        .map(|i| v.row(i).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Whether the assumptions behind [`clustering_lower_bound`] hold at the
/// iterate, with the measured column-orthonormality deviation reported.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClusteringPreconditions {
    /// `||x|| < sqrt(s)` strictly.
    pub interior: bool,
    /// `||V^T V - I||` in the operator norm.
    pub vtv_deviation: f64,
    /// Both checks passed (deviation threshold 0.1).
    pub holds: bool,
}

/// Orthonormality tolerance accepted for the clustering bound.
pub const VTV_DEVIATION_TOL: f64 = 0.1;

pub fn clustering_preconditions(v: &DMatrix<f64>, radius: f64) -> ClusteringPreconditions {
    let x_norm = v.norm();
    let interior = x_norm < radius - 1e-12;
    let r = v.ncols();
    let gram = v.transpose() * v;
    let dev = linalg::sym_norm(&(gram - DMatrix::<f64>::identity(r, r)));
    ClusteringPreconditions {
        interior,
        vtv_deviation: dev,
        holds: interior && dev <= VTV_DEVIATION_TOL,
    }
}

/// Result of the basis-pursuit condition check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BpConditionReport {
    /// Whether `|z_(n)|` clears `nu / (2 sqrt(min_T eta_n(B_T)))`.
    pub holds: bool,
    /// n-th largest magnitude entry of the decoded signal.
    pub nth_magnitude: f64,
    /// `min_{|T| = n} eta_n(B_T)`: the smallest singular value minimized
    /// over column subsets of size n.
    pub min_subset_sv: f64,
    /// True when the subset minimum was sampled instead of enumerated.
    pub approximate: bool,
}

/// Largest signal dimension for which the subset minimum is enumerated
/// exactly; beyond it a seeded sample of subsets is used and the report is
/// flagged approximate.
pub const BP_EXACT_SUBSET_LIMIT: usize = 20;

/// Checks the basis-pursuit regularity condition for a prescribed `nu`:
/// the n-th largest magnitude entry of `z` must reach
/// `nu / (2 sqrt(min_{|T|=n} eta_n(B_T)))`.
pub fn bp_condition(z: &DVector<f64>, b: &DMatrix<f64>, nu: f64) -> Result<BpConditionReport> {
    let n = b.nrows();
    let d = b.ncols();
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            what: "signal",
            expected: d,
            got: z.len(),
        });
    }
    if n > d {
        return Err(Error::InvalidProblem("expected n <= d".into()));
    }
    let (min_sv, approximate) = min_subset_singular_value(b);
    let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let nth = mags[n - 1];
    let holds = if min_sv > 0.0 {
        nth >= nu / (2.0 * min_sv.sqrt())
    } else {
        false
    };
    Ok(BpConditionReport {
        holds,
        nth_magnitude: nth,
        min_subset_sv: min_sv,
        approximate,
    })
}

/// The closed-form basis-pursuit lower bound implied by the condition
/// chain: `2 |z_(n)| sqrt(min_T eta_n(B_T))`.
pub fn bp_lower_bound(z: &DVector<f64>, b: &DMatrix<f64>) -> Result<(f64, bool)> {
    let rep = bp_condition(z, b, 0.0)?;
    Ok((
        2.0 * rep.nth_magnitude * rep.min_subset_sv.max(0.0).sqrt(),
        rep.approximate,
    ))
}

fn min_subset_singular_value(b: &DMatrix<f64>) -> (f64, bool) {
    let n = b.nrows();
    let d = b.ncols();
    if d <= BP_EXACT_SUBSET_LIMIT {
        let mut best = f64::INFINITY;
        let mut subset: Vec<usize> = (0..n).collect();
        loop {
            let sub = b.select_columns(subset.iter());
            best = best.min(linalg::smallest_singular_value(&sub));
            // Next lexicographic combination of n indices out of d.
            let mut i = n;
            loop {
                if i == 0 {
                    return (best, false);
                }
                i -= 1;
                if subset[i] != i + d - n {
                    break;
                }
            }
            subset[i] += 1;
            for j in (i + 1)..n {
                subset[j] = subset[j - 1] + 1;
            }
        }
    } else {
        // Sampled lower proxy on large instances.
        let mut rng = linalg::seeded_rng(0xb5_5e7);
        let mut best = f64::INFINITY;
        for _ in 0..200 {
            let subset = rand::seq::index::sample(&mut rng, d, n);
            let sub = b.select_columns(subset.iter().collect::<Vec<_>>().iter());
            best = best.min(linalg::smallest_singular_value(&sub));
        }
        (best, true)
    }
}

/// Closed-form generalized-eigenvalue lower bound:
/// `eta_min(B) ||x||` for symmetric positive definite `B`.
pub fn geneig_lower_bound(b: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    let eta_min = linalg::sym_eig_min(b);
    if eta_min <= 0.0 {
        return Err(Error::InvalidProblem(
            "geneig bound requires positive definite B".into(),
        ));
    }
    Ok(eta_min * x.norm())
}
