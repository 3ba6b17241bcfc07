//! Standard-form SDP data, the constraint operator and its adjoint, and the
//! residual/accuracy indicators used to judge candidate solutions.
//!
//! ```txt
//!     min ⟨C, X⟩   s.t.  ⟨A_j, X⟩ = b_j  (j = 1..m),  X ⪰ 0
//!     max ⟨b, y⟩   s.t.  Σ y_j A_j + Z = C,           Z ⪰ 0
//! ```

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{sym_eig, LinalgError, SymMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("problem needs at least one constraint")]
    NoConstraints,
    #[error("{what}: expected order/length {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A standard-form SDP with a single dense block.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    c: SymMatrix,
    a: Vec<SymMatrix>,
    b: DVector<f64>,
}

impl SdpProblem {
    pub fn new(c: SymMatrix, a: Vec<SymMatrix>, b: Vec<f64>) -> Result<Self, ModelError> {
        if a.is_empty() {
            return Err(ModelError::NoConstraints);
        }
        if b.len() != a.len() {
            return Err(ModelError::Dimension {
                what: "right-hand side",
                expected: a.len(),
                found: b.len(),
            });
        }
        let n = c.order();
        for aj in &a {
            if aj.order() != n {
                return Err(ModelError::Dimension {
                    what: "constraint matrix",
                    expected: n,
                    found: aj.order(),
                });
            }
        }
        Ok(SdpProblem {
            c,
            a,
            b: DVector::from_vec(b),
        })
    }

    /// Matrix order `n`.
    pub fn n(&self) -> usize {
        self.c.order()
    }

    /// Number of equality constraints `m`.
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn c(&self) -> &SymMatrix {
        &self.c
    }

    pub fn a(&self) -> &[SymMatrix] {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    fn check_order(&self, what: &'static str, found: usize) -> Result<(), ModelError> {
        if found != self.n() {
            return Err(ModelError::Dimension {
                what,
                expected: self.n(),
                found,
            });
        }
        Ok(())
    }

    fn check_len(&self, what: &'static str, found: usize) -> Result<(), ModelError> {
        if found != self.m() {
            return Err(ModelError::Dimension {
                what,
                expected: self.m(),
                found,
            });
        }
        Ok(())
    }

    /// `𝒜(X) = (⟨A_1, X⟩, …, ⟨A_m, X⟩)`
    pub fn apply_a(&self, x: &SymMatrix) -> Result<DVector<f64>, ModelError> {
        self.check_order("X", x.order())?;
        Ok(DVector::from_iterator(
            self.m(),
            self.a.iter().map(|aj| aj.dot(x)),
        ))
    }

    /// `𝒜*(v) = Σ v_j A_j`
    pub fn apply_a_star(&self, v: &DVector<f64>) -> Result<SymMatrix, ModelError> {
        self.check_len("multiplier vector", v.len())?;
        let mut out = SymMatrix::zeros(self.n());
        for (aj, &vj) in self.a.iter().zip(v.iter()) {
            if vj != 0.0 {
                out.axpy(vj, aj);
            }
        }
        Ok(out)
    }

    /// Dual slack `C − 𝒜*(y)`.
    pub fn dual_slack(&self, y: &DVector<f64>) -> Result<SymMatrix, ModelError> {
        Ok(self.c.sub(&self.apply_a_star(y)?))
    }

    /// Evaluates `⟨M, F Fᵀ⟩` for every `M` in `C, A_1, …, A_m` without forming `F Fᵀ`.
    pub(crate) fn quadratic_forms(&self, f: &DMatrix<f64>) -> (f64, DVector<f64>) {
        let form = |m: &SymMatrix| (m.as_matrix() * f).dot(f);
        let obj = form(&self.c);
        let cons = DVector::from_iterator(self.m(), self.a.iter().map(form));
        (obj, cons)
    }

    /// Applies `Ĉ = UᵀCU`, `Â_j = UᵀA_jU`; `b` is unchanged.
    pub fn congruence(&self, u: &DMatrix<f64>) -> SdpProblem {
        SdpProblem {
            c: self.c.congruence(u),
            a: self.a.iter().map(|aj| aj.congruence(u)).collect(),
            b: self.b.clone(),
        }
    }
}

/// A candidate `(X, y, Z)` for the primal-dual optimality system.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualTriple {
    pub x: SymMatrix,
    pub y: DVector<f64>,
    pub z: SymMatrix,
}

impl PrimalDualTriple {
    pub fn new(x: SymMatrix, y: DVector<f64>, z: SymMatrix) -> Self {
        PrimalDualTriple { x, y, z }
    }

    fn check(&self, p: &SdpProblem) -> Result<(), ModelError> {
        p.check_order("X", self.x.order())?;
        p.check_order("Z", self.z.order())?;
        p.check_len("y", self.y.len())
    }

    /// The triple expressed in rotated coordinates `(UᵀXU, y, UᵀZU)`.
    pub fn congruence(&self, u: &DMatrix<f64>) -> PrimalDualTriple {
        PrimalDualTriple {
            x: self.x.congruence(u),
            y: self.y.clone(),
            z: self.z.congruence(u),
        }
    }
}

/// Residuals of the optimality system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖𝒜(X) − b‖`
    pub primal: f64,
    /// `‖C − 𝒜*(y) − Z‖_F`
    pub dual: f64,
    /// `|⟨X, Z⟩|`
    pub complementarity: f64,
    pub min_eig_x: f64,
    pub min_eig_z: f64,
}

pub fn kkt_residuals(p: &SdpProblem, t: &PrimalDualTriple) -> Result<KktResiduals, ModelError> {
    t.check(p)?;
    let primal = (p.apply_a(&t.x)? - p.b()).norm();
    let dual = p.dual_slack(&t.y)?.sub(&t.z).frobenius_norm();
    Ok(KktResiduals {
        primal,
        dual,
        complementarity: t.x.dot(&t.z).abs(),
        min_eig_x: sym_eig(&t.x)?.values[0],
        min_eig_z: sym_eig(&t.z)?.values[0],
    })
}

/// Stopping metric
/// `E = max{ ‖𝒜(X) − b‖ / (1 + ‖b‖),  |⟨X, Z⟩| / (1 + |⟨C, X⟩| + |⟨b, y⟩|) }`.
pub fn accuracy_metric(p: &SdpProblem, t: &PrimalDualTriple) -> Result<f64, ModelError> {
    t.check(p)?;
    let primal = (p.apply_a(&t.x)? - p.b()).norm() / (1.0 + p.b().norm());
    let comp = t.x.dot(&t.z).abs() / (1.0 + p.c().dot(&t.x).abs() + p.b().dot(&t.y).abs());
    Ok(primal.max(comp))
}

/// `‖𝒜(X) − b‖ + max{−λ_min(C − 𝒜*(y)), 0}`; `Z` is not consulted.
pub fn infeasibility(p: &SdpProblem, t: &PrimalDualTriple) -> Result<f64, ModelError> {
    t.check(p)?;
    let primal = (p.apply_a(&t.x)? - p.b()).norm();
    let lmin = p.dual_slack(&t.y)?.min_eigenvalue()?;
    Ok(primal + (-lmin).max(0.0))
}

/// `⟨C, X⟩ − ⟨b, y⟩`
pub fn duality_gap(p: &SdpProblem, t: &PrimalDualTriple) -> Result<f64, ModelError> {
    t.check(p)?;
    Ok(p.c().dot(&t.x) - p.b().dot(&t.y))
}

/// Rotates the problem into the eigenbasis of `x_ref`.
///
/// Returns the rotated problem together with the orthogonal `U` whose columns
/// are the eigenvectors of `x_ref` ordered by descending eigenvalue, so that
/// `Uᵀ x_ref U` is diagonal with its largest entries leading. A point `X̂` of
/// the rotated problem corresponds to `U X̂ Uᵀ` of the original.
pub fn rotate_to_block_structure(
    p: &SdpProblem,
    x_ref: &SymMatrix,
) -> Result<(SdpProblem, DMatrix<f64>), ModelError> {
    p.check_order("reference X", x_ref.order())?;
    let eig = sym_eig(x_ref)?;
    let n = p.n();
    let mut u = DMatrix::zeros(n, n);
    for k in 0..n {
        u.set_column(k, &eig.vectors.column(n - 1 - k));
    }
    Ok((p.congruence(&u), u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag_picker() -> SdpProblem {
        SdpProblem::new(
            SymMatrix::identity(2),
            vec![SymMatrix::unit(2, 0, 0), SymMatrix::unit(2, 1, 1)],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn apply_a_examples() {
        let p = SdpProblem::new(SymMatrix::identity(2), vec![SymMatrix::identity(2)], vec![3.0]).unwrap();
        assert_eq!(p.apply_a(&SymMatrix::from_diagonal(&[1.0, 2.0])).unwrap()[0], 3.0);

        let p0 = SdpProblem::new(SymMatrix::identity(2), vec![SymMatrix::zeros(2)], vec![0.0]).unwrap();
        assert_eq!(p0.apply_a(&SymMatrix::from_row_slice(2, &[1.0, 5.0, 5.0, 4.0])).unwrap()[0], 0.0);

        let v = diag_picker()
            .apply_a(&SymMatrix::from_row_slice(2, &[1.0, 5.0, 5.0, 4.0]))
            .unwrap();
        assert_eq!(v.as_slice(), &[1.0, 4.0]);
    }

    #[test]
    fn apply_a_star_examples() {
        let p = diag_picker();
        assert_eq!(p.apply_a_star(&DVector::zeros(2)).unwrap(), SymMatrix::zeros(2));
        let p1 = SdpProblem::new(SymMatrix::identity(2), vec![SymMatrix::identity(2)], vec![2.0]).unwrap();
        assert_eq!(
            p1.apply_a_star(&DVector::from_vec(vec![2.0])).unwrap(),
            SymMatrix::identity(2).scale(2.0)
        );
    }

    #[test]
    fn dimension_errors() {
        let p = diag_picker();
        assert!(matches!(
            p.apply_a(&SymMatrix::identity(3)),
            Err(ModelError::Dimension { .. })
        ));
        assert!(matches!(
            p.apply_a_star(&DVector::zeros(3)),
            Err(ModelError::Dimension { .. })
        ));
        assert_eq!(
            SdpProblem::new(SymMatrix::identity(2), vec![], vec![]).unwrap_err(),
            ModelError::NoConstraints
        );
    }

    #[test]
    fn complementarity_of_identities() {
        let p = diag_picker();
        let t = PrimalDualTriple::new(SymMatrix::identity(2), DVector::zeros(2), SymMatrix::identity(2));
        let r = kkt_residuals(&p, &t).unwrap();
        assert_eq!(r.complementarity, 2.0);
    }

    #[test]
    fn infeasibility_counts_negative_dual_slack() {
        // C − 𝒜*(y) = I − 2I = −I, X feasible
        let p = diag_picker();
        let t = PrimalDualTriple::new(
            SymMatrix::identity(2),
            DVector::from_vec(vec![2.0, 2.0]),
            SymMatrix::zeros(2),
        );
        assert_abs_diff_eq!(infeasibility(&p, &t).unwrap(), 1.0, epsilon = 1e-14);
        // dual feasible y: only the primal residual remains
        let t = PrimalDualTriple::new(
            SymMatrix::from_diagonal(&[2.0, 1.0]),
            DVector::from_vec(vec![0.5, 0.5]),
            SymMatrix::zeros(2),
        );
        assert_abs_diff_eq!(infeasibility(&p, &t).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gap_with_zero_multipliers_is_primal_objective() {
        let p = diag_picker();
        let x = SymMatrix::from_row_slice(2, &[1.0, 0.3, 0.3, 2.0]);
        let t = PrimalDualTriple::new(x, DVector::zeros(2), SymMatrix::zeros(2));
        assert_abs_diff_eq!(duality_gap(&p, &t).unwrap(), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rotation_orders_eigenvalues_descending() {
        let p = diag_picker();
        let xref = SymMatrix::from_diagonal(&[0.0, 5.0]);
        let (_, u) = rotate_to_block_structure(&p, &xref).unwrap();
        let d = xref.congruence(&u);
        assert_abs_diff_eq!(d.as_matrix(), &DMatrix::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 0.0]), epsilon = 1e-15);
    }
}
