//! Generalized eigenvalue problem:
//!
//! ```text
//! min x^T C x   subject to   x^T B x = 1,
//! ```
//!
//! with symmetric `C` and symmetric positive definite `B`. The constrained
//! minimum is the smallest eigenvalue of the pencil `(C, B)` and the
//! minimizer a B-normalized eigenvector, which makes this family a natural
//! correctness oracle: a dense solve of the pencil gives both.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{Problem, ProximalTerm, SmoothnessConstants};

/// Spectrum recipes for the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumKind {
    /// `C = (G + G^T) / 2` with i.i.d. standard normal `G`.
    GaussianIid,
    /// `C` is a random rotation of `diag(1^-p, 2^-p, ..., n^-p)`.
    PolyDecay(f64),
    /// `C` is a random rotation of `diag(10^-p, 10^-2p, ..., 10^-np)`.
    ExpDecay(f64),
}

/// Problem data: the matrix pencil `(C, B)`.
#[derive(Debug, Clone)]
pub struct GenEigInstance {
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

fn require_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let dev = (m - m.transpose()).norm();
    if dev > 1e-9 * (1.0 + m.norm()) {
        return Err(Error::InvalidProblem(format!(
            "{what} must be symmetric (deviation {dev:.3e})"
        )));
    }
    Ok(())
}

impl GenEigInstance {
    pub fn new(b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if b.nrows() != b.ncols() || c.nrows() != c.ncols() || b.nrows() != c.nrows() {
            return Err(Error::InvalidProblem(
                "B and C must be square matrices of the same size".into(),
            ));
        }
        require_symmetric(&b, "B")?;
        require_symmetric(&c, "C")?;
        if linalg::sym_eig_min(&b) <= 0.0 {
            return Err(Error::InvalidProblem("B must be positive definite".into()));
        }
        Ok(Self { b, c })
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Wires the instance into a solvable problem.
    pub fn build(&self) -> Result<GenEigProblem> {
        Ok(GenEigProblem {
            lambda_f: 2.0 * linalg::sym_norm(&self.c),
            lambda_a: 2.0 * linalg::sym_norm(&self.b),
            b: self.b.clone(),
            c: self.c.clone(),
            prox: ProximalTerm::Zero,
        })
    }

    /// Synthetic pencil following the given spectrum recipe for `C`; `B` is
    /// a randomly rotated diagonal with eigenvalues uniform in [0.5, 2]
    /// (condition number at most 4).
    pub fn generate(n: usize, kind: SpectrumKind, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidProblem("pencil dimension must be >= 2".into()));
        }
        let mut rng = linalg::seeded_rng(seed);
        let c = match kind {
            SpectrumKind::GaussianIid => {
                let g = linalg::standard_normal_matrix(n, n, &mut rng);
                (&g + g.transpose()) * 0.5
            }
            SpectrumKind::PolyDecay(p) => {
                let diag = DVector::from_fn(n, |i, _| ((i + 1) as f64).powf(-p));
                let q = linalg::random_orthogonal(n, &mut rng);
                &q * DMatrix::from_diagonal(&diag) * q.transpose()
            }
            SpectrumKind::ExpDecay(p) => {
                let diag = DVector::from_fn(n, |i, _| 10f64.powf(-((i + 1) as f64) * p));
                let q = linalg::random_orthogonal(n, &mut rng);
                &q * DMatrix::from_diagonal(&diag) * q.transpose()
            }
        };
        let c = (&c + c.transpose()) * 0.5;
        let diag_b = DVector::from_fn(n, |_, _| 0.5 + 1.5 * rng.random::<f64>());
        let qb = linalg::random_orthogonal(n, &mut rng);
        let b = &qb * DMatrix::from_diagonal(&diag_b) * qb.transpose();
        let b = (&b + b.transpose()) * 0.5;
        Self::new(b, c)
    }

    /// Dense solve of the pencil: eigenvalues ascending, B-orthonormal
    /// eigenvector columns.
    pub fn dense_eigen(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        linalg::generalized_sym_eigen(&self.c, &self.b)
    }
}

/// `f(x) = x^T C x`, `g = 0`, `A(x) = x^T B x - 1` (one constraint).
pub struct GenEigProblem {
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    lambda_f: f64,
    lambda_a: f64,
    prox: ProximalTerm,
}

impl GenEigProblem {
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
}

impl Problem for GenEigProblem {
    fn dim_primal(&self) -> usize {
        self.b.nrows()
    }

    fn dim_constraint(&self) -> usize {
        1
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.c * x))
    }

    fn objective_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        2.0 * (&self.c * x)
    }

    fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x.dot(&(&self.b * x)) - 1.0)
    }

    fn jacobian_t_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        // DA(x) = (2 B x)^T, so DA^T v = 2 v[0] B x.
        (&self.b * x) * (2.0 * v[0])
    }

    fn proximal_term(&self) -> &ProximalTerm {
        &self.prox
    }

    fn smoothness(&self) -> SmoothnessConstants {
        SmoothnessConstants {
            lambda_f: Some(self.lambda_f),
            lambda_a: Some(self.lambda_a),
            ..Default::default()
        }
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian_apply(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        beta: f64,
        w: &DVector<f64>,
    ) -> Option<DVector<f64>> {
        // H = 2C + 2 (y + beta A(x)) B + 4 beta (Bx)(Bx)^T.
        let bx = &self.b * x;
        let a = x.dot(&bx) - 1.0;
        let scale = 2.0 * (y[0] + beta * a);
        let mut out = 2.0 * (&self.c * w);
        out += (&self.b * w) * scale;
        out += &bx * (4.0 * beta * bx.dot(w));
        Some(out)
    }
}
