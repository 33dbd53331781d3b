//! Dense complex linear algebra used by the lifted signal model and the
//! least-squares estimator.
//!
//! Containers are plain `nalgebra` dynamic vectors and matrices over
//! [`Complex64`]. Every function here checks conformance and returns a
//! [`LinalgError`] instead of panicking.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Largest input length accepted by [`kron`]; the output holds the square of it.
pub const KRON_MAX_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("system is rank deficient: numerical rank {rank}, required {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("system is underdetermined: {rows} rows for {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("kronecker input length {len} exceeds cap {cap}")]
    TooLarge { len: usize, cap: usize },
}

pub fn ensure_finite<'a>(entries: impl IntoIterator<Item = &'a Complex64>) -> Result<(), LinalgError> {
    if entries.into_iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, found })
    }
}

/// Kronecker product of two equal-length vectors.
///
/// Entry `i * n + j` (zero-based) holds `u[i] * w[j]`, i.e. the blocks
/// `u[0] * w, u[1] * w, ...` stacked in order.
pub fn kron(u: &CVector, w: &CVector) -> Result<CVector, LinalgError> {
    check_len(u.len(), w.len())?;
    if u.len() > KRON_MAX_LEN {
        return Err(LinalgError::TooLarge { len: u.len(), cap: KRON_MAX_LEN });
    }
    let n = u.len();
    Ok(CVector::from_fn(n * n, |idx, _| u[idx / n] * w[idx % n]))
}

/// `a^H b`.
pub fn hermitian_product(a: &CVector, b: &CVector) -> Result<Complex64, LinalgError> {
    check_len(a.len(), b.len())?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Relative rank tolerance `max(rows, cols) * eps`.
pub fn default_rank_tol(a: &CMatrix) -> f64 {
    a.nrows().max(a.ncols()) as f64 * f64::EPSILON
}

/// Number of singular values strictly above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &CMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let Some(&smax) = sv.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

fn require_full_column_rank(a: &CMatrix) -> Result<Vec<f64>, LinalgError> {
    if a.nrows() < a.ncols() {
        return Err(LinalgError::Underdetermined { rows: a.nrows(), cols: a.ncols() });
    }
    let sv = singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    let tol = default_rank_tol(a) * smax;
    let rank = if smax == 0.0 { 0 } else { sv.iter().filter(|&&s| s > tol).count() };
    if rank < a.ncols() {
        return Err(LinalgError::RankDeficient { rank, required: a.ncols() });
    }
    Ok(sv)
}

/// Least-squares solver for a fixed tall matrix, factored once by QR.
#[derive(Debug, Clone)]
pub struct LsSolver {
    rows: usize,
    q: CMatrix,
    r: CMatrix,
    singular_values: Vec<f64>,
}

impl LsSolver {
    pub fn new(a: &CMatrix) -> Result<Self, LinalgError> {
        ensure_finite(a.iter())?;
        let singular_values = require_full_column_rank(a)?;
        let qr = a.clone().qr();
        Ok(Self { rows: a.nrows(), q: qr.q(), r: qr.r(), singular_values })
    }

    /// `argmin_x |A x - y|^2` via `R x = Q^H y`.
    pub fn solve(&self, y: &CVector) -> Result<CVector, LinalgError> {
        check_len(self.rows, y.len())?;
        let qhy = self.q.ad_mul(y);
        // R is square upper triangular with nonzero diagonal (full rank checked above).
        Ok(self.r.solve_upper_triangular(&qhy).expect("full-rank R has a nonzero diagonal"))
    }

    /// `Tr((A^H A)^-1)` as `sum 1 / sigma_i^2`.
    pub fn trace_inverse_gram(&self) -> f64 {
        self.singular_values.iter().map(|s| 1.0 / (s * s)).sum()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }
}

pub fn ls_solve(a: &CMatrix, y: &CVector) -> Result<CVector, LinalgError> {
    check_len(a.nrows(), y.len())?;
    LsSolver::new(a)?.solve(y)
}

/// `Tr((A^H A)^-1)` from the singular values of `A`.
pub fn trace_inverse_gram(a: &CMatrix) -> Result<f64, LinalgError> {
    ensure_finite(a.iter())?;
    let sv = require_full_column_rank(a)?;
    Ok(sv.iter().map(|s| 1.0 / (s * s)).sum())
}

pub fn gram(a: &CMatrix) -> CMatrix {
    a.ad_mul(a)
}
