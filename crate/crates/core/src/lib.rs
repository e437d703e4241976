//! Inexact augmented Lagrangian method (iALM) for nonconvex problems with
//! nonlinear equality constraints and a proximal-friendly regularizer:
//!
//! ```text
//! min  f(x) + g(x)   subject to   A(x) = 0,
//! ```
//!
//! where `f` is smooth (possibly nonconvex), `A` is a smooth nonlinear map,
//! and `g` is either zero, the indicator of a convex set, or a general
//! proximal term. The outer loop drives an increasing penalty schedule and a
//! bounded-step dual ascent; each subproblem is solved inexactly by a
//! pluggable inner solver (accelerated proximal gradient, projected gradient,
//! or a matrix-free trust-region method) to a certified stationarity
//! tolerance.
//!
//! The crate also ships:
//!
//! * first/second-order stationarity certification ([`stationarity`]),
//! * online estimation of the regularity constant that controls how fast the
//!   feasibility gap closes, plus closed-form per-problem lower bounds
//!   ([`regularity`]),
//! * three benchmark problem families with synthetic data generators:
//!   low-rank (Burer-Monteiro) clustering, a nonconvex basis-pursuit
//!   reformulation, and the generalized eigenvalue problem ([`problems`]),
//! * finite-difference derivative checking for any [`Problem`]
//!   ([`gradcheck`]).
//!
//! Everything is deterministic given seeds; solvers never spawn threads and
//! keep explicit oracle-call counts so that empirical complexity can be
//! measured.

pub mod error;
pub mod gradcheck;
pub mod ialm;
pub mod lagrangian;
pub mod linalg;
pub mod points;
pub mod problem;
pub mod problems;
pub mod regularity;
pub mod stationarity;
pub mod subsolvers;

pub use error::{Error, Result};
pub use ialm::{IalmConfig, SolveReport, StopReason, TraceRecord};
pub use points::{DualPoint, PrimalPoint};
pub use problem::{ConvexSet, Problem, ProxOperator, ProximalTerm, SmoothnessConstants};
pub use stationarity::{Mode, StationarityReport};
pub use subsolvers::{OracleCounts, SubsolverKind, SubsolverResult};
