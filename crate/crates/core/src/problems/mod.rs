//! Benchmark problem families and their synthetic data generators.
//!
//! Each constructor returns a fully wired [`crate::Problem`] with closed-form
//! gradients, Jacobian-transpose actions, and smoothness constants where
//! they are cheap. All generators are deterministic given a seed.

pub mod basis_pursuit;
pub mod clustering;
pub mod geneig;
pub mod quadratic;

pub use basis_pursuit::{BasisPursuitInstance, BasisPursuitProblem};
pub use clustering::{ClusteringInstance, ClusteringProblem};
pub use geneig::{GenEigInstance, GenEigProblem, SpectrumKind};
pub use quadratic::QuadraticProblem;
