//! Vectorized factor models as quadratic programs with quadratic equality
//! constraints:
//!
//! ```txt
//!     min  f(x) = ½⟨Hx, x⟩
//!     s.t. g_j(x) = ½⟨G_j x, x⟩ − ½ b_j = 0,   j = 1..m
//! ```
//!
//! `x` packs the columns of the factor `F` (full `n×r` for [`ModelKind::Nsdp`],
//! lower triangular for [`ModelKind::Tnsdp`]). `H` and `G_j` are block diagonal
//! with one block per factor column: the whole of `C` (resp. `A_j`) for the
//! full model, and `C` with its first `k−1` rows and columns removed for
//! column `k` of the triangular model. They are never formed; every product
//! goes through `C F` and `A_j F` followed by restriction to the factor's
//! sparsity pattern.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LowerTriMatrix, SymMatrix};
use crate::model::SdpProblem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QecqpError {
    #[error("rank {r} out of range 1..={n}")]
    RankOutOfRange { r: usize, n: usize },
    #[error("{what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("factor has nonzero entry ({row}, {col}) outside the triangular pattern")]
    PatternViolation { row: usize, col: usize },
    #[error("packed vector belongs to a {found:?} instance, expected {expected:?}")]
    KindMismatch { expected: ModelKind, found: ModelKind },
}

/// Which factor model is vectorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Full factor `R ∈ ℝ^{n×r}`.
    Nsdp,
    /// Lower-triangular factor `S ∈ 𝕃^{n×r}`.
    Tnsdp,
}

impl ModelKind {
    /// First row stored for column `k` (0-based).
    fn first_row(self, k: usize) -> usize {
        match self {
            ModelKind::Nsdp => 0,
            ModelKind::Tnsdp => k,
        }
    }

    /// Packed dimension `d`: `nr` or `nr − r(r−1)/2`.
    pub fn packed_dim(self, n: usize, r: usize) -> usize {
        match self {
            ModelKind::Nsdp => n * r,
            ModelKind::Tnsdp => n * r - r * r.saturating_sub(1) / 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Nsdp => "nsdp",
            ModelKind::Tnsdp => "tnsdp",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nsdp" => Ok(ModelKind::Nsdp),
            "tnsdp" => Ok(ModelKind::Tnsdp),
            other => Err(format!("unknown model '{other}' (expected nsdp or tnsdp)")),
        }
    }
}

/// Column-major packing of a factor, tagged with its model.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedVector {
    pub values: DVector<f64>,
    pub kind: ModelKind,
}

impl PackedVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Packs `f` column by column; for the triangular model column `k` contributes
/// rows `k..n`.
pub fn pack(f: &DMatrix<f64>, kind: ModelKind) -> Result<PackedVector, QecqpError> {
    let (n, r) = f.shape();
    if r > n {
        return Err(QecqpError::RankOutOfRange { r, n });
    }
    let mut values = Vec::with_capacity(kind.packed_dim(n, r));
    for k in 0..r {
        let start = kind.first_row(k);
        for i in 0..start {
            if f[(i, k)] != 0.0 {
                return Err(QecqpError::PatternViolation { row: i, col: k });
            }
        }
        values.extend((start..n).map(|i| f[(i, k)]));
    }
    Ok(PackedVector {
        values: DVector::from_vec(values),
        kind,
    })
}

/// A factor model built over a borrowed problem.
#[derive(Debug, Clone)]
pub struct QecqpInstance<'p> {
    problem: &'p SdpProblem,
    kind: ModelKind,
    r: usize,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

/// Everything one SQP iteration needs at a point `(x, μ)`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: f64,
    pub grad_f: DVector<f64>,
    pub g: DVector<f64>,
    /// `∇g(x)`, one column per constraint (`d×m`).
    pub jac_g: DMatrix<f64>,
    /// `∇²ₓₓℒ(x, μ) = H − Σ μ_j G_j`, dense `d×d`.
    pub hess_l: SymMatrix,
}

pub fn build_qecqp(p: &SdpProblem, r: usize, kind: ModelKind) -> Result<QecqpInstance<'_>, QecqpError> {
    let n = p.n();
    if r == 0 || r > n {
        return Err(QecqpError::RankOutOfRange { r, n });
    }
    let sizes: Vec<usize> = (0..r).map(|k| n - kind.first_row(k)).collect();
    let offsets = sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    Ok(QecqpInstance {
        problem: p,
        kind,
        r,
        offsets,
        sizes,
    })
}

impl<'p> QecqpInstance<'p> {
    pub fn problem(&self) -> &'p SdpProblem {
        self.problem
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn m(&self) -> usize {
        self.problem.m()
    }

    /// Packed dimension `d`.
    pub fn dim(&self) -> usize {
        self.offsets[self.r - 1] + self.sizes[self.r - 1]
    }

    /// Start of each column block within the packed vector.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Block sizes (`s_k = n` or `t_k = n − k + 1`).
    pub fn block_sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn check(&self, x: &PackedVector) -> Result<(), QecqpError> {
        if x.kind != self.kind {
            return Err(QecqpError::KindMismatch {
                expected: self.kind,
                found: x.kind,
            });
        }
        if x.len() != self.dim() {
            return Err(QecqpError::Dimension {
                what: "packed vector",
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn pack(&self, f: &DMatrix<f64>) -> Result<PackedVector, QecqpError> {
        if f.shape() != (self.n(), self.r) {
            return Err(QecqpError::Dimension {
                what: "factor columns",
                expected: self.r,
                found: f.ncols(),
            });
        }
        pack(f, self.kind)
    }

    pub fn unpack(&self, x: &PackedVector) -> Result<DMatrix<f64>, QecqpError> {
        self.check(x)?;
        Ok(self.unpack_values(&x.values))
    }

    fn unpack_values(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut f = DMatrix::zeros(n, self.r);
        for k in 0..self.r {
            let start = self.kind.first_row(k);
            f.view_mut((start, k), (self.sizes[k], 1))
                .copy_from(&x.rows(self.offsets[k], self.sizes[k]));
        }
        f
    }

    /// Restricts an `n×r` matrix to the factor pattern and packs it.
    fn restrict(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for k in 0..self.r {
            let start = self.kind.first_row(k);
            out.rows_mut(self.offsets[k], self.sizes[k])
                .copy_from(&m.view((start, k), (self.sizes[k], 1)));
        }
        out
    }

    /// The triangular factor carried by a packed vector, when the model is
    /// triangular.
    pub fn lower_factor(&self, x: &PackedVector) -> Result<Option<LowerTriMatrix>, QecqpError> {
        let f = self.unpack(x)?;
        Ok(match self.kind {
            ModelKind::Tnsdp => Some(LowerTriMatrix::from_lower_part(f)),
            ModelKind::Nsdp => None,
        })
    }

    /// Objective `f(x) = ½⟨C, FFᵀ⟩`.
    pub fn objective(&self, x: &PackedVector) -> Result<f64, QecqpError> {
        let f = self.unpack(x)?;
        Ok(0.5 * (self.problem.c().as_matrix() * &f).dot(&f))
    }

    /// Constraint values `g(x)`.
    pub fn constraints(&self, x: &PackedVector) -> Result<DVector<f64>, QecqpError> {
        let f = self.unpack(x)?;
        let (_, forms) = self.problem.quadratic_forms(&f);
        Ok((forms - self.problem.b()) * 0.5)
    }

    /// `∇f(x) − ∇g(x) μ`, i.e. the packed restriction of `(C − 𝒜*(μ)) F`.
    pub fn lagrangian_gradient(&self, x: &PackedVector, mu: &DVector<f64>) -> Result<DVector<f64>, QecqpError> {
        self.check_mu(mu)?;
        let f = self.unpack(x)?;
        let slack = self
            .problem
            .dual_slack(mu)
            .expect("multiplier length checked");
        Ok(self.restrict(&(slack.as_matrix() * &f)))
    }

    fn check_mu(&self, mu: &DVector<f64>) -> Result<(), QecqpError> {
        if mu.len() != self.m() {
            return Err(QecqpError::Dimension {
                what: "multipliers",
                expected: self.m(),
                found: mu.len(),
            });
        }
        Ok(())
    }

    /// Dense `d×d` block-diagonal matrix whose block `k` is `M` restricted to
    /// rows/columns `first_row(k)..n`.
    pub fn block_operator(&self, m: &SymMatrix) -> SymMatrix {
        let d = self.dim();
        let n = self.n();
        let mut out = DMatrix::zeros(d, d);
        for k in 0..self.r {
            let start = self.kind.first_row(k);
            let size = self.sizes[k];
            out.view_mut((self.offsets[k], self.offsets[k]), (size, size))
                .copy_from(&m.as_matrix().view((start, start), (n - start, n - start)));
        }
        SymMatrix::new(out)
    }

    /// Objective, constraints, their derivatives and the Lagrangian Hessian.
    pub fn evaluate(&self, x: &PackedVector, mu: &DVector<f64>) -> Result<Evaluation, QecqpError> {
        self.check_mu(mu)?;
        let f = self.unpack(x)?;
        let p = self.problem;
        let cf = p.c().as_matrix() * &f;
        let obj = 0.5 * cf.dot(&f);
        let grad_f = self.restrict(&cf);

        let m = p.m();
        let mut g = DVector::zeros(m);
        let mut jac_g = DMatrix::zeros(self.dim(), m);
        for (j, aj) in p.a().iter().enumerate() {
            let af = aj.as_matrix() * &f;
            g[j] = 0.5 * af.dot(&f) - 0.5 * p.b()[j];
            jac_g.set_column(j, &self.restrict(&af));
        }
        let slack = p.dual_slack(mu).expect("multiplier length checked");
        Ok(Evaluation {
            f: obj,
            grad_f,
            g,
            jac_g,
            hess_l: self.block_operator(&slack),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn maxcut_like(n: usize) -> SdpProblem {
        let a = (0..n).map(|j| SymMatrix::unit(n, j, j)).collect();
        let c = SymMatrix::from_row_slice(
            n,
            &(0..n * n).map(|k| if k % (n + 1) == 0 { -1.0 } else { 0.25 }).collect::<Vec<_>>(),
        );
        SdpProblem::new(c, a, vec![1.0; n]).unwrap()
    }

    #[test]
    fn pack_triangular_two_by_two() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 3.0]);
        let x = pack(&s, ModelKind::Tnsdp).unwrap();
        assert_eq!(x.values.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(pack(&s, ModelKind::Nsdp).unwrap().len(), 4);
    }

    #[test]
    fn pack_rejects_upper_entries() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 2.0, 3.0]);
        assert_eq!(
            pack(&s, ModelKind::Tnsdp).unwrap_err(),
            QecqpError::PatternViolation { row: 0, col: 1 }
        );
    }

    #[test]
    fn packed_dimensions() {
        assert_eq!(ModelKind::Nsdp.packed_dim(10, 4), 40);
        assert_eq!(ModelKind::Tnsdp.packed_dim(10, 4), 34);
    }

    #[test]
    fn block_layout() {
        let p = maxcut_like(3);
        let nsdp = build_qecqp(&p, 2, ModelKind::Nsdp).unwrap();
        assert_eq!(nsdp.block_sizes(), &[3, 3]);
        let t = build_qecqp(&p, 2, ModelKind::Tnsdp).unwrap();
        assert_eq!(t.block_sizes(), &[3, 2]);
        assert_eq!(t.offsets(), &[0, 3]);
        assert_eq!(t.dim(), 5);
        assert!(matches!(
            build_qecqp(&p, 4, ModelKind::Tnsdp),
            Err(QecqpError::RankOutOfRange { .. })
        ));
        assert!(matches!(
            build_qecqp(&p, 0, ModelKind::Nsdp),
            Err(QecqpError::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn identity_factor_is_feasible_for_unit_diagonal() {
        let p = maxcut_like(4);
        let inst = build_qecqp(&p, 4, ModelKind::Tnsdp).unwrap();
        let x = inst.pack(&DMatrix::identity(4, 4)).unwrap();
        let ev = inst.evaluate(&x, &DVector::zeros(4)).unwrap();
        assert_eq!(ev.g, DVector::zeros(4));
    }

    #[test]
    fn quadratic_form_identity_at_zero_multipliers() {
        let p = maxcut_like(3);
        let inst = build_qecqp(&p, 2, ModelKind::Tnsdp).unwrap();
        let s = DMatrix::from_row_slice(3, 2, &[0.3, 0.0, -1.2, 0.7, 2.0, 0.1]);
        let x = inst.pack(&s).unwrap();
        let ev = inst.evaluate(&x, &DVector::zeros(3)).unwrap();
        let quad = 0.5 * x.values.dot(&(ev.hess_l.as_matrix() * &x.values));
        assert_abs_diff_eq!(ev.f, quad, epsilon = 1e-14);
        assert_eq!(ev.hess_l, inst.block_operator(p.c()));
    }

    #[test]
    fn unpack_rejects_foreign_vectors() {
        let p = maxcut_like(3);
        let inst = build_qecqp(&p, 2, ModelKind::Tnsdp).unwrap();
        let wrong_kind = PackedVector {
            values: DVector::zeros(5),
            kind: ModelKind::Nsdp,
        };
        assert!(matches!(inst.unpack(&wrong_kind), Err(QecqpError::KindMismatch { .. })));
        let wrong_len = PackedVector {
            values: DVector::zeros(6),
            kind: ModelKind::Tnsdp,
        };
        assert!(matches!(inst.unpack(&wrong_len), Err(QecqpError::Dimension { .. })));
    }
}
