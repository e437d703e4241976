//! Low-rank factorized clustering.
//!
//! Given an `n x n` distance matrix `D`, the semidefinite clustering
//! relaxation `min tr(DY), Y 1 = 1, tr(Y) = s, Y >= 0, Y PSD` is solved
//! through the factorization `Y = V V^T` with `V` an `n x r` nonnegative
//! matrix:
//!
//! ```text
//! f(x) = sum_ij D_ij <x_i, x_j>,   A_i(x) = x_i^T sum_j x_j - 1,
//! g = indicator of C = {x >= 0} ∩ {||x|| <= sqrt(s)},
//! ```
//!
//! where `x` stacks the rows `x_i` of `V` (row-major, `d = n r`).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{ConvexSet, Problem, ProximalTerm};

/// Intersection of the nonnegative orthant with the Euclidean ball of a
/// given radius. The Euclidean projection factors exactly: clamp to the
/// orthant, then scale radially, because the orthant is a cone invariant
/// under radial scaling.
#[derive(Debug, Clone, Copy)]
pub struct OrthantBall {
    radius: f64,
}

impl OrthantBall {
    pub fn new(radius: f64) -> Self {
        Self { radius }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ConvexSet for OrthantBall {
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut u = v.map(|t| t.max(0.0));
        let n = u.norm();
        if n > self.radius {
            u *= self.radius / n;
        }
        u
    }

    fn tangent_residual(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        // Tangent cone of the orthant at x: directions are free on strictly
        // positive coordinates and nonnegative on active ones.
        let mut t = DVector::zeros(u.len());
        for i in 0..u.len() {
            t[i] = if x[i] > 0.0 { u[i] } else { u[i].max(0.0) };
        }
        // On the ball boundary the outward radial component is infeasible
        // too; project it out.
        let xn = x.norm();
        if xn >= self.radius - 1e-9 && xn > 0.0 {
            let radial = t.dot(x) / xn;
            if radial > 0.0 {
                t -= x * (radial / xn);
            }
        }
        t.norm()
    }

    fn violation(&self, x: &DVector<f64>) -> f64 {
        let neg = x.iter().fold(0.0f64, |acc, v| acc.max(-v));
        let excess = (x.norm() - self.radius).max(0.0);
        neg.max(excess)
    }
}

/// Problem data: distance matrix, cluster count, and factorization rank.
#[derive(Debug, Clone)]
pub struct ClusteringInstance {
    d_mat: DMatrix<f64>,
    s: usize,
    r: usize,
}

impl ClusteringInstance {
    /// Validates and stores the distance matrix. `D` must be square,
    /// symmetric within `1e-9`, entrywise nonnegative, with zero diagonal;
    /// it is symmetrized exactly on ingestion.
    pub fn new(d_mat: DMatrix<f64>, s: usize, r: usize) -> Result<Self> {
        let n = d_mat.nrows();
        if n == 0 || d_mat.ncols() != n {
            return Err(Error::InvalidProblem("distance matrix must be square".into()));
        }
        if s == 0 || r == 0 {
            return Err(Error::InvalidProblem(
                "cluster count and rank must be positive".into(),
            ));
        }
        let scale = 1.0 + d_mat.norm();
        for i in 0..n {
            if d_mat[(i, i)].abs() > 1e-9 * scale {
                return Err(Error::InvalidProblem(format!(
                    "distance matrix diagonal entry {i} is {}, expected 0",
                    d_mat[(i, i)]
                )));
            }
            for j in 0..n {
                if (d_mat[(i, j)] - d_mat[(j, i)]).abs() > 1e-9 * scale {
                    return Err(Error::InvalidProblem(format!(
                        "distance matrix is not symmetric at ({i}, {j})"
                    )));
                }
                if d_mat[(i, j)] < -1e-12 {
                    return Err(Error::InvalidProblem(format!(
                        "distance matrix has negative entry at ({i}, {j})"
                    )));
                }
            }
        }
        let mut sym = (&d_mat + d_mat.transpose()) * 0.5;
        for i in 0..n {
            sym[(i, i)] = 0.0;
        }
        let sym = sym.map(|v| v.max(0.0));
        Ok(Self { d_mat: sym, s, r })
    }

    /// Parses the plain-text distance-matrix format: `n` rows of `n`
    /// comma-separated reals.
    pub fn from_csv_str(text: &str, s: usize, r: usize) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidProblem(format!(
                        "distance CSV line {}: cannot parse '{}'",
                        lineno + 1,
                        field.trim()
                    ))
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidProblem("distance CSV is empty".into()));
        }
        if rows.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidProblem(format!(
                "distance CSV must be square ({n} rows)"
            )));
        }
        let d_mat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(d_mat, s, r)
    }

    pub fn from_csv_path(path: &std::path::Path, s: usize, r: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidProblem(format!("cannot read {}: {e}", path.display())))?;
        Self::from_csv_str(&text, s, r)
    }

    /// Synthetic instance: `k` Gaussian blobs (unit within-blob standard
    /// deviation) with centers kept at pairwise distance at least
    /// `separation`; `D` holds squared Euclidean distances, `s = k`, and the
    /// rank defaults to `k + 2`. Also returns the planted labels.
    pub fn synthetic_blobs(
        k: usize,
        points_per_cluster: usize,
        dim: usize,
        separation: f64,
        seed: u64,
    ) -> Result<(Self, Vec<usize>)> {
        if k == 0 || points_per_cluster == 0 || dim == 0 {
            return Err(Error::InvalidProblem(
                "blob generator needs positive counts and dimension".into(),
            ));
        }
        let mut rng = linalg::seeded_rng(seed);
        let mut centers: Vec<DVector<f64>> = Vec::with_capacity(k);
        let mut scale = separation.max(1.0) * (k as f64).powf(1.0 / dim as f64);
        let mut rejects = 0;
        while centers.len() < k {
            let cand = linalg::standard_normal_vector(dim, &mut rng) * scale;
            if centers.iter().all(|c| (c - &cand).norm() >= separation) {
                centers.push(cand);
                rejects = 0;
            } else {
                rejects += 1;
                if rejects > 100 {
                    scale *= 1.5;
                    rejects = 0;
                }
            }
        }
        let n = k * points_per_cluster;
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..points_per_cluster {
                points.push(center + linalg::standard_normal_vector(dim, &mut rng));
                labels.push(c);
            }
        }
        let d_mat = DMatrix::from_fn(n, n, |i, j| (&points[i] - &points[j]).norm_squared());
        let inst = Self::new(d_mat, k, k + 2)?;
        Ok((inst, labels))
    }

    /// Overrides the factorization rank.
    pub fn with_rank(mut self, r: usize) -> Self {
        self.r = r.max(1);
        self
    }

    pub fn num_points(&self) -> usize {
        self.d_mat.nrows()
    }

    pub fn cluster_count(&self) -> usize {
        self.s
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.d_mat
    }

    pub fn build(&self) -> Result<ClusteringProblem> {
        Ok(ClusteringProblem {
            d_mat: self.d_mat.clone(),
            n: self.d_mat.nrows(),
            r: self.r,
            prox: ProximalTerm::Indicator(Box::new(OrthantBall::new((self.s as f64).sqrt()))),
        })
    }
}

/// Reshapes the stacked-row vector into the `n x r` factor matrix.
pub fn factor_matrix(x: &DVector<f64>, n: usize, r: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, r, |i, j| x[i * r + j])
}

/// Stacks the rows of the factor matrix back into a vector.
pub fn flatten_rows(v: &DMatrix<f64>) -> DVector<f64> {
    let (n, r) = v.shape();
    DVector::from_fn(n * r, |idx, _| v[(idx / r, idx % r)])
}

/// The wired problem over `x` in `R^{n r}` with `m = n` constraints.
pub struct ClusteringProblem {
    d_mat: DMatrix<f64>,
    n: usize,
    r: usize,
    prox: ProximalTerm,
}

impl ClusteringProblem {
    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn num_points(&self) -> usize {
        self.n
    }
}

impl Problem for ClusteringProblem {
    fn dim_primal(&self) -> usize {
        self.n * self.r
    }

    fn dim_constraint(&self) -> usize {
        self.n
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        // tr(D V V^T) evaluated as <D V, V>: O(n^2 r), never O(n^3).
        let v = factor_matrix(x, self.n, self.r);
        (&self.d_mat * &v).dot(&v)
    }

    fn objective_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let v = factor_matrix(x, self.n, self.r);
        flatten_rows(&(&self.d_mat * &v * 2.0))
    }

    fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        // A(x) = V (V^T 1) - 1.
        let v = factor_matrix(x, self.n, self.r);
        let col_sums = v.transpose() * DVector::from_element(self.n, 1.0);
        &v * col_sums - DVector::from_element(self.n, 1.0)
    }

    fn jacobian_t_apply(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        // DA(x)^T w reshapes to w (V^T 1)^T + 1 (w^T V).
        let v = factor_matrix(x, self.n, self.r);
        let col_sums = v.transpose() * DVector::from_element(self.n, 1.0);
        let wtv = v.transpose() * w;
        DVector::from_fn(self.n * self.r, |idx, _| {
            let (i, j) = (idx / self.r, idx % self.r);
            w[i] * col_sums[j] + wtv[j]
        })
    }

    fn proximal_term(&self) -> &ProximalTerm {
        &self.prox
    }
}

/// Pairwise co-cluster prediction from the factor matrix: two points are
/// declared co-clustered when the cosine similarity of their factor rows
/// reaches the threshold (the co-association matrix `V V^T` normalized to
/// unit diagonal, which makes the 0.5 threshold scale-free).
pub fn co_cluster_agreement(v: &DMatrix<f64>, labels: &[usize], threshold: f64) -> f64 {
    let n = v.nrows();
    assert_eq!(n, labels.len());
    let norms: Vec<f64> = (0..n).map(|i| v.row(i).norm()).collect();
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let denom = norms[i] * norms[j];
            let cos = if denom > 1e-300 {
                v.row(i).dot(&v.row(j)) / denom
            } else {
                0.0
            };
            let predicted = cos >= threshold;
            let actual = labels[i] == labels[j];
            if predicted == actual {
                agree += 1;
            }
            total += 1;
        }
    }
    agree as f64 / total.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_rank_one_point_is_feasible() {
        // n = 2, r = 1, V = (1/sqrt(2), 1/sqrt(2)): V V^T 1 = 1.
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let inst = ClusteringInstance::new(d, 1, 1).unwrap();
        let prob = inst.build().unwrap();
        let x = DVector::from_element(2, 1.0 / 2f64.sqrt());
        assert!(prob.constraint(&x).norm() < 1e-12);
        assert_relative_eq!(prob.objective(&x), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_is_weighted_inner_products() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let inst = ClusteringInstance::new(d, 1, 1).unwrap();
        let prob = inst.build().unwrap();
        let x = DVector::from_row_slice(&[0.3, 0.9]);
        // f = 2ab for D = [[0,1],[1,0]].
        assert_relative_eq!(prob.objective(&x), 2.0 * 0.3 * 0.9, epsilon = 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (inst, _) = ClusteringInstance::synthetic_blobs(2, 2, 2, 3.0, 9).unwrap();
        let prob = inst.build().unwrap();
        for check in gradcheck::check_all(&prob, 40, 13) {
            assert!(check.passed(), "{}: {:.3e}", check.name, check.max_rel_err);
        }
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        use rand::Rng;
        let set = OrthantBall::new(2.0);
        let mut rng = crate::linalg::seeded_rng(51);
        for _ in 0..200 {
            let v = crate::linalg::standard_normal_vector(6, &mut rng) * rng.random::<f64>() * 4.0;
            let w = crate::linalg::standard_normal_vector(6, &mut rng) * rng.random::<f64>() * 4.0;
            let pv = set.project(&v);
            let pw = set.project(&w);
            assert!(set.violation(&pv) <= 1e-12);
            assert_relative_eq!((set.project(&pv) - &pv).norm(), 0.0, epsilon = 1e-12);
            assert!((pv - pw).norm() <= (v - w).norm() + 1e-12);
        }
    }

    #[test]
    fn tangent_residual_interior_and_active_cases() {
        let set = OrthantBall::new(10.0);
        // Strictly interior point: the tangent cone is everything.
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        let u = DVector::from_row_slice(&[-3.0, 4.0]);
        assert_relative_eq!(set.tangent_residual(&x, &u), 5.0, epsilon = 1e-12);
        // Active coordinate: only the nonnegative part of u survives there.
        let x = DVector::from_row_slice(&[1.0, 0.0]);
        let u = DVector::from_row_slice(&[-3.0, -4.0]);
        assert_relative_eq!(set.tangent_residual(&x, &u), 3.0, epsilon = 1e-12);
        let u = DVector::from_row_slice(&[-3.0, 4.0]);
        assert_relative_eq!(set.tangent_residual(&x, &u), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn tangent_residual_is_positively_homogeneous() {
        use rand::Rng;
        let set = OrthantBall::new(3.0);
        let mut rng = crate::linalg::seeded_rng(77);
        for _ in 0..100 {
            let mut x = crate::linalg::standard_normal_vector(5, &mut rng).map(|v| v.abs());
            // Make a couple of coordinates active.
            x[1] = 0.0;
            x[3] = 0.0;
            let x = set.project(&x);
            let u = crate::linalg::standard_normal_vector(5, &mut rng);
            let t: f64 = rng.random::<f64>() * 10.0 + 0.1;
            let r1 = set.tangent_residual(&x, &(&u * t));
            let r0 = set.tangent_residual(&x, &u);
            assert_relative_eq!(r1, t * r0, max_relative = 1e-12);
        }
    }

    #[test]
    fn boundary_residual_removes_outward_radial_component() {
        let set = OrthantBall::new(1.0);
        // x on the ball boundary, strictly positive: tangent directions may
        // not point outward.
        let x = DVector::from_row_slice(&[1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()]);
        let u = x.clone() * 2.0; // purely outward radial
        assert!(set.tangent_residual(&x, &u) < 1e-12);
        // Inward radial direction is fine.
        let u = -x.clone();
        assert_relative_eq!(set.tangent_residual(&x, &u), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_roundtrip_and_validation() {
        let text = "0, 1.5, 2\n1.5, 0, 3\n2, 3, 0\n";
        let inst = ClusteringInstance::from_csv_str(text, 2, 3).unwrap();
        assert_eq!(inst.num_points(), 3);
        assert_eq!(inst.distances()[(0, 1)], 1.5);

        // Asymmetric matrices are rejected.
        let bad = "0, 1\n2, 0\n";
        assert!(ClusteringInstance::from_csv_str(bad, 2, 3).is_err());
        // Ragged rows are rejected.
        let bad = "0, 1\n1\n";
        assert!(ClusteringInstance::from_csv_str(bad, 2, 3).is_err());
    }

    #[test]
    fn blob_generator_plants_recoverable_labels() {
        let (inst, labels) = ClusteringInstance::synthetic_blobs(3, 5, 2, 10.0, 42).unwrap();
        assert_eq!(labels.len(), 15);
        assert_eq!(inst.cluster_count(), 3);
        assert_eq!(inst.rank(), 5);
        // Within-cluster squared distances stay below across-cluster ones.
        let d = inst.distances();
        let mut max_within = 0.0f64;
        let mut min_across = f64::INFINITY;
        for i in 0..15 {
            for j in 0..15 {
                if i == j {
                    continue;
                }
                if labels[i] == labels[j] {
                    max_within = max_within.max(d[(i, j)]);
                } else {
                    min_across = min_across.min(d[(i, j)]);
                }
            }
        }
        assert!(max_within < min_across);
    }

    #[test]
    fn degenerate_generator_inputs_still_produce_valid_instances() {
        let (inst, labels) = ClusteringInstance::synthetic_blobs(1, 4, 2, 5.0, 1).unwrap();
        assert_eq!(inst.cluster_count(), 1);
        assert_eq!(labels, vec![0, 0, 0, 0]);
        // Overlapping blobs are fine; invariants are on D only.
        let (inst, _) = ClusteringInstance::synthetic_blobs(2, 3, 2, 0.0, 1).unwrap();
        assert_eq!(inst.num_points(), 6);
    }
}
