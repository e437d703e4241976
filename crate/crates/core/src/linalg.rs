//! Dense linear-algebra helpers and seeded random sampling.
//!
//! The iterative solvers themselves are matrix-free; dense factorizations
//! appear only in problem generators, closed-form regularity bounds, and
//! test oracles, all at desk scale.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// The project-wide deterministic RNG.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Vector of i.i.d. standard normal entries.
pub fn standard_normal_vector(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Matrix of i.i.d. standard normal entries.
pub fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Uniformly distributed random unit vector.
pub fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = standard_normal_vector(dim, rng);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// the sign convention fixed from the diagonal of R).
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = standard_normal_matrix(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// ascending order. Columns of the returned matrix are the eigenvectors.
pub fn sym_eigen_ascending(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_eig_min(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Solves the symmetric-definite generalized eigenvalue problem
/// `C v = lambda B v` by a Cholesky reduction to a standard symmetric
/// problem. Returns eigenvalues in ascending order and B-orthonormal
/// eigenvectors as columns (`v_i^T B v_j = delta_ij`).
pub fn generalized_sym_eigen(
    c: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = b.nrows();
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidProblem("B is not positive definite".into()))?;
    let l = chol.l();
    // M = L^{-1} C L^{-T}, symmetrized against rounding.
    let mut li_c = c.clone();
    l.solve_lower_triangular_mut(&mut li_c);
    let mut m = li_c.transpose();
    l.solve_lower_triangular_mut(&mut m);
    let m = (&m + m.transpose()) * 0.5;
    let (values, w) = sym_eigen_ascending(&m);
    // Map back: v = L^{-T} w.
    let mut vectors = w;
    l.transpose().solve_upper_triangular_mut(&mut vectors);
    // B-normalize each column.
    for j in 0..n {
        let col = vectors.column(j).into_owned();
        let s = (col.dot(&(b * &col))).sqrt();
        if s > 0.0 {
            for i in 0..n {
                vectors[(i, j)] /= s;
            }
        }
    }
    Ok((values, vectors))
}

/// Smallest singular value of a rectangular matrix.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Minimum-norm solution of `B z = rhs` for a full-row-rank wide matrix,
/// via a Cholesky solve of the Gram system `(B B^T) w = rhs`, `z = B^T w`.
pub fn min_norm_solution(b: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if b.nrows() != rhs.len() {
        return Err(Error::DimensionMismatch {
            what: "least-squares right-hand side",
            expected: b.nrows(),
            got: rhs.len(),
        });
    }
    let gram = b * b.transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::InvalidProblem("B B^T is singular; B must have full row rank".into()))?;
    let w = chol.solve(rhs);
    Ok(b.transpose() * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = seeded_rng(3);
        let q = random_orthogonal(8, &mut rng);
        let qtq = q.transpose() * &q;
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(qtq[(i, j)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sym_eigen_sorts_ascending() {
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(&[3.0, -2.0, 1.0]));
        let (vals, _) = sym_eigen_ascending(&m);
        assert_relative_eq!(vals[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(vals[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn generalized_eigen_recovers_known_pencil() {
        // C = diag(2, 6), B = diag(2, 3): eigenvalues 1 and 2.
        let c = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 6.0]));
        let b = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 3.0]));
        let (vals, vecs) = generalized_sym_eigen(&c, &b).unwrap();
        assert_relative_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 2.0, epsilon = 1e-12);
        for j in 0..2 {
            let v = vecs.column(j).into_owned();
            assert_relative_eq!(v.dot(&(&b * &v)), 1.0, epsilon = 1e-10);
            let lhs = &c * &v;
            let rhs = (&b * &v) * vals[j];
            assert_relative_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn generalized_eigen_rejects_indefinite_b() {
        let c = DMatrix::identity(2, 2);
        let b = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, -1.0]));
        assert!(generalized_sym_eigen(&c, &b).is_err());
    }

    #[test]
    fn min_norm_solution_solves_system() {
        let mut rng = seeded_rng(11);
        let b = standard_normal_matrix(4, 9, &mut rng);
        let rhs = standard_normal_vector(4, &mut rng);
        let z = min_norm_solution(&b, &rhs).unwrap();
        assert_relative_eq!((&b * &z - &rhs).norm(), 0.0, epsilon = 1e-10);
    }
}
