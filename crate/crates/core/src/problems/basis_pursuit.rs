//! Nonconvex reformulation of basis pursuit.
//!
//! The sparse recovery program `min ||z||_1 s.t. B z = b` is rewritten over
//! `x = [u1; u2]` with `z = u1^2 - u2^2` (elementwise squares), giving the
//! smooth template
//!
//! ```text
//! f(x) = ||x||^2,  g = 0,  A(x) = Bbar x^2 - b,  Bbar = [B, -B],
//! ```
//!
//! since `||x||^2 = sum(u1^2 + u2^2)` matches `||z||_1` whenever the
//! supports of `u1` and `u2` do not overlap.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::points::PrimalPoint;
use crate::problem::{Problem, ProximalTerm, SmoothnessConstants};

/// Problem data: measurement matrix and observations.
#[derive(Debug, Clone)]
pub struct BasisPursuitInstance {
    b_mat: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl BasisPursuitInstance {
    pub fn new(b_mat: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        if b_mat.nrows() > b_mat.ncols() {
            return Err(Error::InvalidProblem(
                "basis pursuit expects an underdetermined system (n <= d)".into(),
            ));
        }
        if rhs.len() != b_mat.nrows() {
            return Err(Error::InvalidProblem(format!(
                "right-hand side has length {}, expected {}",
                rhs.len(),
                b_mat.nrows()
            )));
        }
        Ok(Self { b_mat, rhs })
    }

    /// Signal dimension `d` (the primal dimension is `2d`).
    pub fn signal_dim(&self) -> usize {
        self.b_mat.ncols()
    }

    pub fn num_measurements(&self) -> usize {
        self.b_mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b_mat
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn build(&self) -> Result<BasisPursuitProblem> {
        Ok(BasisPursuitProblem {
            b_mat: self.b_mat.clone(),
            rhs: self.rhs.clone(),
            prox: ProximalTerm::Zero,
        })
    }

    /// Random instance with a planted `k`-sparse signal. The measurement
    /// matrix has i.i.d. standard normal entries, the planted support and
    /// amplitudes are standard normal, and `b = B z* + noise` with
    /// `noise ~ N(0, noise_sigma^2 I)`. Returns the instance and `z*`.
    pub fn generate(
        d: usize,
        n: usize,
        sparsity: usize,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<(Self, DVector<f64>)> {
        if sparsity > n || n > d {
            return Err(Error::InvalidProblem(
                "generator requires sparsity <= n <= d".into(),
            ));
        }
        let mut rng = linalg::seeded_rng(seed);
        let b_mat = linalg::standard_normal_matrix(n, d, &mut rng);
        let support = rand::seq::index::sample(&mut rng, d, sparsity);
        let mut z_star = DVector::zeros(d);
        for idx in support.iter() {
            z_star[idx] = rng.sample(rand_distr::StandardNormal);
        }
        let noise = linalg::standard_normal_vector(n, &mut rng) * noise_sigma;
        let rhs = &b_mat * &z_star + noise;
        Ok((Self { b_mat, rhs }, z_star))
    }

    /// Initialization near the solution: decodes the minimum-norm solution
    /// of `B z = b` into `(u1, u2)` through square roots of its positive and
    /// negative parts. Random initialization frequently stalls at `z = 0`.
    pub fn least_squares_init(&self) -> Result<PrimalPoint> {
        let z0 = linalg::min_norm_solution(&self.b_mat, &self.rhs)?;
        Ok(encode(&z0))
    }
}

/// Splits the primal vector into its `u1` and `u2` halves.
fn split(x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let d = x.len() / 2;
    (x.rows(0, d).into_owned(), x.rows(d, d).into_owned())
}

/// Decodes the signal `z = u1^2 - u2^2` from a primal point.
pub fn decode(x: &DVector<f64>) -> DVector<f64> {
    let (u1, u2) = split(x);
    DVector::from_fn(u1.len(), |i, _| u1[i] * u1[i] - u2[i] * u2[i])
}

/// Encodes a signal into the primal parametrization via
/// `u1 = sqrt(max(z, 0))`, `u2 = sqrt(max(-z, 0))`.
pub fn encode(z: &DVector<f64>) -> PrimalPoint {
    let d = z.len();
    let mut x = DVector::zeros(2 * d);
    for i in 0..d {
        if z[i] >= 0.0 {
            x[i] = z[i].sqrt();
        } else {
            x[d + i] = (-z[i]).sqrt();
        }
    }
    PrimalPoint::new(x).expect("finite encoding")
}

/// The wired problem over `x` in `R^{2d}` with `m = n` constraints.
pub struct BasisPursuitProblem {
    b_mat: DMatrix<f64>,
    rhs: DVector<f64>,
    prox: ProximalTerm,
}

impl BasisPursuitProblem {
    /// `Bbar t` for `t` in `R^{2d}`, using `Bbar = [B, -B]`.
    fn bbar_apply(&self, t: &DVector<f64>) -> DVector<f64> {
        let (t1, t2) = split(t);
        &self.b_mat * (t1 - t2)
    }

    /// `Bbar^T v` for `v` in `R^n`.
    fn bbar_t_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let w = self.b_mat.transpose() * v;
        let d = w.len();
        let mut out = DVector::zeros(2 * d);
        for i in 0..d {
            out[i] = w[i];
            out[d + i] = -w[i];
        }
        out
    }
}

impl Problem for BasisPursuitProblem {
    fn dim_primal(&self) -> usize {
        2 * self.b_mat.ncols()
    }

    fn dim_constraint(&self) -> usize {
        self.b_mat.nrows()
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        x.norm_squared()
    }

    fn objective_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        2.0 * x
    }

    fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        let sq = x.map(|v| v * v);
        self.bbar_apply(&sq) - &self.rhs
    }

    fn jacobian_t_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        // DA(x) = 2 Bbar diag(x), so DA^T v = 2 x .* (Bbar^T v).
        let w = self.bbar_t_apply(v);
        DVector::from_fn(x.len(), |i, _| 2.0 * x[i] * w[i])
    }

    fn proximal_term(&self) -> &ProximalTerm {
        &self.prox
    }

    fn smoothness(&self) -> SmoothnessConstants {
        SmoothnessConstants {
            lambda_f: Some(2.0),
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
        // H = 2I + 2 diag(Bbar^T c) + 4 beta diag(x) Bbar^T Bbar diag(x),
        // with c = y + beta A(x).
        let a = self.constraint(x);
        let c = y + beta * a;
        let btc = self.bbar_t_apply(&c);
        let xw = DVector::from_fn(x.len(), |i, _| x[i] * w[i]);
        let bxw = self.bbar_apply(&xw);
        let btbxw = self.bbar_t_apply(&bxw);
        let mut out = 2.0 * w;
        for i in 0..out.len() {
            out[i] += 2.0 * btc[i] * w[i] + 4.0 * beta * x[i] * btbxw[i];
        }
        Some(out)
    }
}
