//! Triangular low-rank factorizations `X = S Sᵀ` with `S` lower triangular,
//! plus the rank formulas used to size the factor.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{qr_decompose, sym_eig, LinalgError, LowerTriMatrix, SymMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error("rank argument must be at least 1")]
    ZeroRank,
    #[error("requested {r} columns for a matrix of order {n}")]
    TooManyColumns { r: usize, n: usize },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },
    #[error("matrix rank exceeds {r}: eigenvalue {eigenvalue:e} above tolerance {tolerance:e}")]
    RankExceeded { r: usize, eigenvalue: f64, tolerance: f64 },
    #[error("factor is singular: diagonal entry {index} is zero")]
    Singular { index: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Lower-triangular factor `S ∈ 𝕃^{n×r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriFactor {
    pub s: LowerTriMatrix,
    /// Every nonzero diagonal entry is positive.
    pub sign_normalized: bool,
}

/// Largest `r` with `r(r+1)/2 ≤ k`.
pub fn max_triangular_rank(k: usize) -> Result<usize, FactorError> {
    if k == 0 {
        return Err(FactorError::ZeroRank);
    }
    let mut r = 1;
    while (r + 1) * (r + 2) / 2 <= k {
        r += 1;
    }
    Ok(r)
}

/// `⌈(√(8m+1) − 1)/2⌉`, evaluated exactly as the smallest `r` with
/// `r(r+1)/2 ≥ m`.
pub fn heuristic_rank(m: usize) -> usize {
    let mut r = 1;
    while r * (r + 1) / 2 < m {
        r += 1;
    }
    r
}

/// Relative cutoff below which an eigenvalue counts as zero.
pub fn rank_tolerance(lambda_max: f64) -> f64 {
    1e-8 * lambda_max.max(1.0)
}

/// Turns an arbitrary `n×r` factor `U` (`r ≤ n`) into a lower-triangular `S`
/// with `S Sᵀ = U Uᵀ`.
///
/// With `U = [U₁; U₂]`, `U₁` the leading `r×r` block and `U₁ᵀ = Q R`, the
/// result is `S = [Rᵀ; U₂ Q]`. `R` has a nonnegative diagonal, so `S` does too.
pub fn triangularize(u: &DMatrix<f64>) -> LowerTriMatrix {
    let (n, r) = u.shape();
    assert!(r <= n, "factor has more columns than rows");
    let u1t = u.view((0, 0), (r, r)).transpose();
    let (q, rr) = qr_decompose(&u1t);
    let mut s = DMatrix::zeros(n, r);
    s.view_mut((0, 0), (r, r)).copy_from(&rr.transpose());
    if n > r {
        let lower = u.view((r, 0), (n - r, r)) * &q;
        s.view_mut((r, 0), (n - r, r)).copy_from(&lower);
    }
    LowerTriMatrix::from_lower_part(s)
}

/// Flips column signs so every nonzero diagonal entry is positive.
pub fn sign_normalize(s: LowerTriMatrix) -> LowerTriMatrix {
    let mut m = s.into_matrix();
    for k in 0..m.ncols() {
        if m[(k, k)] < 0.0 {
            m.column_mut(k).neg_mut();
        }
    }
    LowerTriMatrix::from_lower_part(m)
}

/// Lower-triangular factor of a PSD matrix of rank at most `r`.
pub fn tri_factor(x: &SymMatrix, r: usize) -> Result<TriFactor, FactorError> {
    let n = x.order();
    if r == 0 {
        return Err(FactorError::ZeroRank);
    }
    if r > n {
        return Err(FactorError::TooManyColumns { r, n });
    }
    let eig = sym_eig(x)?;
    let lmax = eig.values[n - 1];
    let lmin = eig.values[0];
    if lmin < -1e-8 * lmax.max(0.0) || (lmax <= 0.0 && lmin < 0.0) {
        return Err(FactorError::NotPsd { eigenvalue: lmin });
    }
    let tol = rank_tolerance(lmax);
    if r < n {
        // (r+1)-th largest eigenvalue
        let next = eig.values[n - 1 - r];
        if next > tol {
            return Err(FactorError::RankExceeded {
                r,
                eigenvalue: next,
                tolerance: tol,
            });
        }
    }
    let mut u = DMatrix::zeros(n, r);
    for k in 0..r {
        let lambda = eig.values[n - 1 - k].max(0.0);
        u.set_column(k, &(eig.vectors.column(n - 1 - k) * lambda.sqrt()));
    }
    Ok(TriFactor {
        s: sign_normalize(triangularize(&u)),
        sign_normalized: true,
    })
}

/// Radius `√λ_min(P Pᵀ)` separating a full-rank triangular `P` from every
/// other triangular factor of `P Pᵀ`.
pub fn separation_delta(p: &LowerTriMatrix) -> Result<f64, FactorError> {
    let l = p.ncols();
    if p.nrows() != l {
        return Err(FactorError::Linalg(LinalgError::DimensionMismatch {
            expected: p.nrows(),
            found: l,
        }));
    }
    for j in 0..l {
        if p.as_matrix()[(j, j)] == 0.0 {
            return Err(FactorError::Singular { index: j });
        }
    }
    let lmin = p.gram().min_eigenvalue()?;
    Ok(lmin.max(0.0).sqrt())
}
