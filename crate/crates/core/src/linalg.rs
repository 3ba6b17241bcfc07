//! Dense real linear algebra kernel.
//!
//! Everything above this module works with [`SymMatrix`] for symmetric data and
//! plain `nalgebra` matrices for factors. The kernel supplies the four
//! factorizations the solver needs: symmetric eigendecomposition, QR with a
//! fixed sign convention, Cholesky, and a regularized symmetric indefinite
//! solve for KKT systems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Errors raised by the dense kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is not positive definite (pivot {pivot} is {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("linear system is singular even with regularization {max_regularization:e}")]
    SingularSystem { max_regularization: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry ({row}, {col}) above the diagonal is nonzero")]
    NotLowerTriangular { row: usize, col: usize },
}

/// A real symmetric matrix.
///
/// Construction symmetrizes its input as `(M + Mᵀ)/2`, so `[i][j] == [j][i]`
/// holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetric matrix must be square");
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMatrix(out)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Builds from a row-major slice of `n*n` values.
    pub fn from_row_slice(n: usize, values: &[f64]) -> Self {
        Self::new(DMatrix::from_row_slice(n, n, values))
    }

    /// `e_i e_jᵀ + e_j e_iᵀ` scaled so that the `(i, j)` entry is one.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
        SymMatrix(m)
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Frobenius inner product `tr(AᵀB)`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(&self.0 * s)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &SymMatrix) {
        self.0 += &other.0 * s;
    }

    /// `Uᵀ M U`, symmetrized.
    pub fn congruence(&self, u: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::new(u.transpose() * &self.0 * u)
    }

    pub fn min_eigenvalue(&self) -> Result<f64, LinalgError> {
        Ok(sym_eig(self)?.values[0])
    }

    pub fn max_eigenvalue(&self) -> Result<f64, LinalgError> {
        let eig = sym_eig(self)?;
        Ok(eig.values[eig.values.len() - 1])
    }
}

/// A lower-triangular `n×r` matrix (`r ≤ n`): entries with `i < j` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriMatrix(DMatrix<f64>);

impl LowerTriMatrix {
    /// Wraps `m`, rejecting any nonzero entry above the diagonal.
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        if m.ncols() > m.nrows() {
            return Err(LinalgError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        for j in 0..m.ncols() {
            for i in 0..j {
                if m[(i, j)] != 0.0 {
                    return Err(LinalgError::NotLowerTriangular { row: i, col: j });
                }
            }
        }
        Ok(LowerTriMatrix(m))
    }

    /// Wraps `m` after zeroing its strict upper triangle.
    pub fn from_lower_part(mut m: DMatrix<f64>) -> Self {
        assert!(m.ncols() <= m.nrows());
        for j in 0..m.ncols() {
            for i in 0..j {
                m[(i, j)] = 0.0;
            }
        }
        LowerTriMatrix(m)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Number of entries on or below the diagonal: `nr − r(r−1)/2`.
    pub fn packed_len(&self) -> usize {
        let (n, r) = (self.nrows(), self.ncols());
        n * r - r * (r.saturating_sub(1)) / 2
    }

    /// `S Sᵀ`
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::new(&self.0 * self.0.transpose())
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored column-wise.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// Rebuilds `V diag(λ) Vᵀ`.
    pub fn recompose(&self) -> SymMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(l);
        }
        SymMatrix::new(&scaled * self.vectors.transpose())
    }
}

const EIG_SWEEPS_PER_ORDER: usize = 30;

/// Symmetric eigendecomposition (Householder tridiagonalization followed by
/// implicit shifted QR on the tridiagonal).
pub fn sym_eig(m: &SymMatrix) -> Result<SymEigen, LinalgError> {
    let n = m.order();
    if n == 0 {
        return Ok(SymEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let sweeps = EIG_SWEEPS_PER_ORDER * n;
    let eig = SymmetricEigen::try_new(m.0.clone(), f64::EPSILON, sweeps)
        .ok_or(LinalgError::NoConvergence { sweeps })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}

/// Householder QR of a square matrix, `M = Q R`.
///
/// The diagonal of `R` is made nonnegative by flipping signs of matching
/// columns of `Q` and rows of `R`, which makes the factorization unique for
/// nonsingular `M`.
pub fn qr_decompose(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    assert!(m.is_square(), "qr_decompose expects a square matrix");
    let n = m.nrows();
    let mut r = m.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    for k in 0..n.saturating_sub(1) {
        let alpha = r.view((k, k), (n - k, 1)).norm();
        if alpha == 0.0 {
            continue;
        }
        let mut v: DVector<f64> = r.view((k, k), (n - k, 1)).column(0).into_owned();
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 == 0.0 {
            continue;
        }
        // R ← (I − 2vvᵀ/vᵀv) R on rows k.., Q ← Q (I − 2vvᵀ/vᵀv) on columns k..
        let mut rows = r.view_mut((k, 0), (n - k, n));
        let w: DVector<f64> = rows.tr_mul(&v) * (2.0 / vnorm2);
        rows.ger(-1.0, &v, &w, 1.0);
        let mut cols = q.view_mut((0, k), (n, n - k));
        let u: DVector<f64> = &cols * &v * (2.0 / vnorm2);
        cols.ger(-1.0, &u, &v, 1.0);
    }
    for i in 0..n {
        for j in 0..i {
            r[(i, j)] = 0.0;
        }
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Cholesky factor `L` with `L Lᵀ = M` and positive diagonal.
pub fn cholesky_lower(m: &SymMatrix) -> Result<LowerTriMatrix, LinalgError> {
    let n = m.order();
    let a = &m.0;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag.is_nan() || diag <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(LowerTriMatrix(l))
}

/// Solution of a symmetric (possibly indefinite) system plus the diagonal
/// shift that was needed to obtain it.
#[derive(Debug, Clone)]
pub struct IndefiniteSolve {
    pub solution: DVector<f64>,
    pub regularization: f64,
}

const PIVOT_RATIO_FLOOR: f64 = 1e-14;
const REGULARIZATION_STEPS: [f64; 7] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Solves `K x = rhs` for symmetric `K`.
///
/// A plain LU solve is attempted first. If the pivots indicate near
/// singularity or the residual bound `‖Kx − rhs‖ ≤ 1e-10 (‖K‖_F ‖x‖ + ‖rhs‖)`
/// fails, `K + ρ I` is solved for `ρ = s (1 + ‖K‖_F)` with `s` running from
/// `1e-12` to `1e-6`; the first shifted solution meeting the residual bound
/// against the unshifted `K` is returned.
pub fn solve_sym_indefinite(k: &SymMatrix, rhs: &DVector<f64>) -> Result<IndefiniteSolve, LinalgError> {
    let n = k.order();
    if rhs.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    let knorm = k.frobenius_norm();
    let acceptable = |x: &DVector<f64>| {
        if !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        let residual = (&k.0 * x - rhs).norm();
        residual <= 1e-10 * (knorm * x.norm() + rhs.norm())
    };

    if let Some(x) = lu_solve(&k.0, rhs, true) {
        if acceptable(&x) {
            return Ok(IndefiniteSolve {
                solution: x,
                regularization: 0.0,
            });
        }
    }
    let scale = 1.0 + knorm;
    for s in REGULARIZATION_STEPS {
        let rho = s * scale;
        let mut shifted = k.0.clone();
        for i in 0..n {
            shifted[(i, i)] += rho;
        }
        if let Some(x) = lu_solve(&shifted, rhs, false) {
            if acceptable(&x) {
                return Ok(IndefiniteSolve {
                    solution: x,
                    regularization: rho,
                });
            }
        }
    }
    Err(LinalgError::SingularSystem {
        max_regularization: REGULARIZATION_STEPS[REGULARIZATION_STEPS.len() - 1] * scale,
    })
}

fn lu_solve(a: &DMatrix<f64>, rhs: &DVector<f64>, check_pivots: bool) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..u.nrows() {
        let p = u[(i, i)].abs();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if hi == 0.0 || (check_pivots && lo <= PIVOT_RATIO_FLOOR * hi) {
        return None;
    }
    lu.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eig_of_identity_and_diagonal() {
        let e = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);

        let e = sym_eig(&SymMatrix::from_diagonal(&[2.0, 1.0])).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.values[1], 2.0, epsilon = 1e-15);
        // eigenvector of 1 is ±e₂
        assert_abs_diff_eq!(e.vectors[(1, 0)].abs(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.vectors[(0, 1)].abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn eig_of_swap() {
        let e = sym_eig(&SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn qr_examples() {
        let (q, r) = qr_decompose(&DMatrix::identity(2, 2));
        assert_eq!(q, DMatrix::identity(2, 2));
        assert_eq!(r, DMatrix::identity(2, 2));

        let (q, r) = qr_decompose(&DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 5.0]));
        assert_abs_diff_eq!(q, DMatrix::identity(2, 2), epsilon = 1e-15);
        assert_abs_diff_eq!(r, DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 5.0]), epsilon = 1e-15);

        // Gram–Schmidt by hand: first column (3,4)/5, second column orthogonal.
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 5.0]);
        let (q, r) = qr_decompose(&m);
        let q_hand = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let r_hand = DMatrix::from_row_slice(2, 2, &[5.0, 4.0, 0.0, 3.0]);
        assert_abs_diff_eq!(q, q_hand, epsilon = 1e-14);
        assert_abs_diff_eq!(r, r_hand, epsilon = 1e-14);
        assert_abs_diff_eq!(&q * &r, m, epsilon = 1e-14);
        assert_abs_diff_eq!(q.transpose() * &q, DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn qr_rank_deficient() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 3.0, 6.0, 0.0]);
        let (q, r) = qr_decompose(&m);
        assert_abs_diff_eq!(&q * &r, m, epsilon = 1e-13);
        assert_abs_diff_eq!(q.transpose() * &q, DMatrix::identity(3, 3), epsilon = 1e-14);
        for i in 0..3 {
            assert!(r[(i, i)] >= 0.0);
        }
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky_lower(&SymMatrix::identity(3)).unwrap();
        assert_eq!(l.as_matrix(), &DMatrix::identity(3, 3));

        let l = cholesky_lower(&SymMatrix::from_row_slice(2, &[4.0, 2.0, 2.0, 2.0])).unwrap();
        assert_abs_diff_eq!(
            l.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]),
            epsilon = 1e-15
        );

        let err = cholesky_lower(&SymMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0])).unwrap_err();
        assert!(matches!(err, LinalgError::NotPositiveDefinite { pivot: 1, .. }));
    }

    #[test]
    fn indefinite_solve_examples() {
        let x = solve_sym_indefinite(&SymMatrix::identity(2), &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(x.solution.as_slice(), &[1.0, 2.0]);
        assert_eq!(x.regularization, 0.0);

        // The KKT system of one Newton step on min x² s.t. x² = 1 from x = 2.
        let k = SymMatrix::from_row_slice(2, &[2.0, -4.0, -4.0, 0.0]);
        let x = solve_sym_indefinite(&k, &DVector::from_vec(vec![-4.0, 3.0])).unwrap();
        assert_abs_diff_eq!(x.solution[0], -0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(x.solution[1], 0.625, epsilon = 1e-15);

        let err = solve_sym_indefinite(&SymMatrix::zeros(2), &DVector::from_vec(vec![1.0, 0.0])).unwrap_err();
        assert!(matches!(err, LinalgError::SingularSystem { .. }));
    }

    #[test]
    fn singular_but_consistent_system_is_regularized() {
        // rank one, rhs in the range
        let k = SymMatrix::from_row_slice(2, &[1.0, 1.0, 1.0, 1.0]);
        let sol = solve_sym_indefinite(&k, &DVector::from_vec(vec![2.0, 2.0])).unwrap();
        assert!(sol.regularization > 0.0);
        let residual = (k.as_matrix() * &sol.solution - DVector::from_vec(vec![2.0, 2.0])).norm();
        assert!(residual <= 1e-9);
    }

    #[test]
    fn lower_tri_rejects_upper_entries() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert_eq!(
            LowerTriMatrix::new(m).unwrap_err(),
            LinalgError::NotLowerTriangular { row: 0, col: 1 }
        );
        let s = LowerTriMatrix::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!(s.packed_len(), 5);
    }
}
