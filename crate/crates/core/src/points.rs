//! Validated primal and dual iterates.
//!
//! Both wrappers guarantee that every entry is finite; solvers rely on this
//! to detect numerical faults at API boundaries instead of propagating NaNs.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};

/// Primal iterate `x` in R^d.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalPoint(DVector<f64>);

/// Dual iterate (Lagrange multiplier) `y` in R^m.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPoint(DVector<f64>);

macro_rules! impl_point {
    ($name:ident, $what:expr) => {
        impl $name {
            /// Wraps a vector after checking that all entries are finite.
            pub fn new(values: DVector<f64>) -> Result<Self> {
                if values.iter().all(|v| v.is_finite()) {
                    Ok(Self(values))
                } else {
                    Err(Error::NonFinite($what))
                }
            }

            pub fn from_slice(values: &[f64]) -> Result<Self> {
                Self::new(DVector::from_row_slice(values))
            }

            /// All-zero point of the given dimension.
            pub fn zeros(dim: usize) -> Self {
                Self(DVector::zeros(dim))
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.len() == 0
            }

            pub fn as_vector(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn into_vector(self) -> DVector<f64> {
                self.0
            }
        }

        impl std::ops::Deref for $name {
            type Target = DVector<f64>;
            fn deref(&self) -> &DVector<f64> {
                &self.0
            }
        }

        impl AsRef<DVector<f64>> for $name {
            fn as_ref(&self) -> &DVector<f64> {
                &self.0
            }
        }
    };
}

impl_point!(PrimalPoint, "primal point");
impl_point!(DualPoint, "dual point");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        assert!(PrimalPoint::from_slice(&[1.0, f64::NAN]).is_err());
        assert!(PrimalPoint::from_slice(&[f64::INFINITY]).is_err());
        assert!(DualPoint::from_slice(&[0.0, -2.5]).is_ok());
    }

    #[test]
    fn zero_dimension_is_allowed() {
        // Unconstrained problems have m = 0 and carry an empty dual point.
        let y = DualPoint::zeros(0);
        assert!(y.is_empty());
        assert_eq!(y.norm(), 0.0);
    }
}
