//! Small dense linear algebra helpers on top of `nalgebra`.
//!
//! All QR factorizations here are thin and sign-normalized so that the
//! diagonal of `R` is non-negative. That makes `Qᵀy`, `R⁻¹` and every
//! quantity derived from them reproducible regardless of the reflector
//! signs chosen by the underlying Householder routine.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on `|R_ii| / max_j |R_jj|` below which a column is
/// considered linearly dependent on its predecessors.
pub const RANK_TOL: f64 = 1e-10;

/// Thin QR factorization `A = QR` with `diag(R) ≥ 0`.
#[derive(Debug, Clone)]
pub struct ThinQr {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl ThinQr {
    /// Factorizes an `n × k` matrix with `n ≥ k`.
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (n, k) = a.shape();
        assert!(n >= k, "thin QR needs at least as many rows as columns");
        if k == 0 {
            return ThinQr {
                q: DMatrix::zeros(n, 0),
                r: DMatrix::zeros(0, 0),
            };
        }
        let qr = a.clone().qr();
        let mut q = qr.q();
        let mut r = qr.r();
        for i in 0..k {
            if r[(i, i)] < 0.0 {
                r.row_mut(i).neg_mut();
                q.column_mut(i).neg_mut();
            }
        }
        ThinQr { q, r }
    }

    /// Index of the first column whose diagonal entry falls under the
    /// relative rank tolerance, if any.
    pub fn first_deficient_column(&self) -> Option<usize> {
        deficient_diagonal(&self.r)
    }

    /// Inverse of the upper-triangular factor. Caller guarantees full rank.
    pub fn r_inverse(&self) -> DMatrix<f64> {
        let k = self.r.ncols();
        self.r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("R is nonsingular")
    }

    /// Solves the least-squares problem `min ‖y − A x‖` for full-rank `A`.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let z = self.q.tr_mul(y);
        self.r.solve_upper_triangular(&z).expect("R is nonsingular")
    }
}

/// Returns the first index `i` with `|R_ii| < RANK_TOL · max_j |R_jj|`.
pub fn deficient_diagonal(r: &DMatrix<f64>) -> Option<usize> {
    let k = r.nrows().min(r.ncols());
    let max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max == 0.0 {
        return if k > 0 { Some(0) } else { None };
    }
    (0..k).find(|&i| r[(i, i)].abs() < RANK_TOL * max)
}

/// Numerical rank of an arbitrary matrix via column-pivoted QR, using the
/// same relative tolerance as [`deficient_diagonal`].
pub fn rank(a: &DMatrix<f64>) -> usize {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0;
    }
    // Pivoted QR wants rows ≥ columns to expose the full diagonal.
    let a = if m < n { a.transpose() } else { a.clone() };
    let r = a.col_piv_qr().r();
    let k = r.nrows().min(r.ncols());
    let max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    (0..k)
        .filter(|&i| r[(i, i)].abs() >= RANK_TOL * max)
        .count()
}

pub fn sq_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x * x).sum()
}
