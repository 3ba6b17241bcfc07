//! Dense primal-dual interior-point warm start and the handoff to the SQP
//! phase.
//!
//! Infeasible path-following on the HKM direction: the complementarity
//! equation `XZ = σμI` is linearized as `ΔX Z + X ΔZ = σμI − XZ`, solved
//! through the Schur complement `M_ij = ⟨A_i, X A_j Z⁻¹⟩`, and `ΔX` is
//! symmetrized afterwards. The centering weight follows the affine-scaling
//! reduction `σ = min(σ_max, (μ_aff/μ)³)` and the combined step carries the
//! second-order term `ΔX_aff ΔZ_aff`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::factor::{sign_normalize, triangularize, FactorError};
use crate::linalg::{solve_sym_indefinite, sym_eig, LinalgError, SymMatrix};
use crate::model::{ModelError, PrimalDualTriple, SdpProblem};
use crate::qecqp::{pack, ModelKind, QecqpError};
use crate::sqp::SqpState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IpmError {
    #[error("{m} constraints cannot be independent on symmetric matrices of order {n}")]
    Dimension { m: usize, n: usize },
    #[error("Newton system failed at iteration {iteration}: {source}")]
    LinearSolveFailure {
        iteration: usize,
        #[source]
        source: LinalgError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("warm-start matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Qecqp(#[from] QecqpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmConfig {
    /// Exit once both the feasibility criterion and `⟨X, Z⟩/n` drop below it.
    pub target_accuracy: f64,
    pub max_iter: usize,
    /// Upper bound on the centering weight, in `(0, 1)`.
    pub sigma: f64,
    /// Fraction-to-boundary factor, in `(0, 1)`.
    pub tau: f64,
}

impl Default for IpmConfig {
    fn default() -> Self {
        IpmConfig {
            target_accuracy: 1e-3,
            max_iter: 50,
            sigma: 0.3,
            tau: 0.98,
        }
    }
}

impl IpmConfig {
    /// Settings for running the interior-point method on its own.
    pub fn standalone() -> Self {
        IpmConfig {
            target_accuracy: 1e-8,
            ..IpmConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IpmStatus {
    Converged,
    IterationLimit,
    /// Step lengths collapsed or an iterate lost definiteness to roundoff; the
    /// last good iterate is returned.
    Stalled,
}

/// One row of the iteration log, recorded before the step is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IpmIterate {
    pub iteration: usize,
    /// `⟨X, Z⟩ / n`
    pub mu: f64,
    /// `⟨C, X⟩ − ⟨b, y⟩`
    pub gap: f64,
    /// `‖𝒜(X) − b‖ / (1 + ‖b‖)`
    pub primal_rel: f64,
    /// `‖C − 𝒜*(y) − Z‖_F / (1 + ‖C‖_F)`
    pub dual_rel: f64,
    pub min_eig_x: f64,
    pub min_eig_z: f64,
}

impl IpmIterate {
    pub fn criterion(&self) -> f64 {
        self.primal_rel.max(self.dual_rel)
    }
}

#[derive(Debug, Clone)]
pub struct IpmOutcome {
    pub triple: PrimalDualTriple,
    pub status: IpmStatus,
    pub iterations: usize,
    /// Feasibility criterion of the returned triple.
    pub criterion: f64,
    pub log: Vec<IpmIterate>,
}

impl IpmOutcome {
    pub fn meets(&self, target: f64) -> bool {
        self.criterion < target
    }
}

fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::new(m)
}

fn snapshot(p: &SdpProblem, t: &PrimalDualTriple, iteration: usize) -> Result<(IpmIterate, DVector<f64>, SymMatrix), IpmError> {
    let rp = p.b() - p.apply_a(&t.x)?;
    let rd = p.dual_slack(&t.y)?.sub(&t.z);
    let n = p.n() as f64;
    let row = IpmIterate {
        iteration,
        mu: t.x.dot(&t.z) / n,
        gap: p.c().dot(&t.x) - p.b().dot(&t.y),
        primal_rel: rp.norm() / (1.0 + p.b().norm()),
        dual_rel: rd.frobenius_norm() / (1.0 + p.c().frobenius_norm()),
        min_eig_x: t.x.min_eigenvalue()?,
        min_eig_z: t.z.min_eigenvalue()?,
    };
    Ok((row, rp, rd))
}

/// Largest `α` with `X + αΔX ⪰ 0`, given the Cholesky factor of `X ≻ 0`.
fn max_step(chol: &Cholesky<f64, nalgebra::Dyn>, dx: &SymMatrix) -> Result<f64, LinalgError> {
    let l = chol.l();
    let left = l
        .solve_lower_triangular(dx.as_matrix())
        .expect("Cholesky factor has a positive diagonal");
    let w = l
        .solve_lower_triangular(&left.transpose())
        .expect("Cholesky factor has a positive diagonal");
    let lmin = sym(w).min_eigenvalue()?;
    Ok(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

struct Newton<'a> {
    p: &'a SdpProblem,
    x: &'a SymMatrix,
    z_inv: DMatrix<f64>,
    /// `X A_j Z⁻¹`
    g: Vec<DMatrix<f64>>,
    schur: SchurSolver,
}

enum SchurSolver {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Indefinite(SymMatrix),
}

impl<'a> Newton<'a> {
    fn new(p: &'a SdpProblem, t: &'a PrimalDualTriple, iteration: usize) -> Result<Option<Self>, IpmError> {
        let Some(zc) = Cholesky::new(t.z.as_matrix().clone()) else {
            return Ok(None);
        };
        let z_inv = zc.inverse();
        let xm = t.x.as_matrix();
        let g: Vec<DMatrix<f64>> = p.a().iter().map(|aj| xm * aj.as_matrix() * &z_inv).collect();
        let m = p.m();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = p.a()[i].as_matrix().dot(&g[j]);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let schur = match Cholesky::new(schur.clone()) {
            Some(c) => SchurSolver::Chol(c),
            None => {
                // probe once so a hopeless system is reported here
                let s = sym(schur);
                solve_sym_indefinite(&s, &DVector::zeros(m))
                    .map_err(|source| IpmError::LinearSolveFailure { iteration, source })?;
                SchurSolver::Indefinite(s)
            }
        };
        Ok(Some(Newton {
            p,
            x: &t.x,
            z_inv,
            g,
            schur,
        }))
    }

    /// Direction for target `σμ`; `corr` is the second-order product
    /// `ΔX_aff ΔZ_aff` when present.
    fn direction(
        &self,
        rp: &DVector<f64>,
        rd: &SymMatrix,
        sigma_mu: f64,
        corr: Option<&DMatrix<f64>>,
        iteration: usize,
    ) -> Result<(SymMatrix, DVector<f64>, SymMatrix), IpmError> {
        let xm = self.x.as_matrix();
        let mut r = &self.z_inv * sigma_mu - xm - xm * rd.as_matrix() * &self.z_inv;
        if let Some(c) = corr {
            r -= c * &self.z_inv;
        }
        let ar = DVector::from_iterator(self.p.m(), self.p.a().iter().map(|aj| aj.as_matrix().dot(&r)));
        let rhs = rp - ar;
        let dy = match &self.schur {
            SchurSolver::Chol(c) => c.solve(&rhs),
            SchurSolver::Indefinite(s) => {
                solve_sym_indefinite(s, &rhs)
                    .map_err(|source| IpmError::LinearSolveFailure { iteration, source })?
                    .solution
            }
        };
        for (gj, &v) in self.g.iter().zip(dy.iter()) {
            r += gj * v;
        }
        let dx = sym(r);
        let dz = rd.sub(&self.p.apply_a_star(&dy)?);
        Ok((dx, dy, dz))
    }
}

/// Runs the interior-point method from `X = Z = ρI`, `y = 0`,
/// `ρ = 1 + ‖b‖ + ‖C‖_F`.
///
/// Exhausting `max_iter` or stalling is not an error; the outcome carries the
/// status and the achieved criterion.
pub fn interior_point(p: &SdpProblem, cfg: &IpmConfig) -> Result<IpmOutcome, IpmError> {
    let n = p.n();
    let m = p.m();
    if m > n * (n + 1) / 2 {
        return Err(IpmError::Dimension { m, n });
    }
    let rho = 1.0 + p.b().norm() + p.c().frobenius_norm();
    let mut t = PrimalDualTriple::new(
        SymMatrix::identity(n).scale(rho),
        DVector::zeros(m),
        SymMatrix::identity(n).scale(rho),
    );
    let mut log = Vec::new();
    let mut iteration = 0;
    let status = loop {
        let (row, rp, rd) = snapshot(p, &t, iteration)?;
        log.push(row);
        if row.criterion() < cfg.target_accuracy && row.mu <= cfg.target_accuracy {
            break IpmStatus::Converged;
        }
        if iteration == cfg.max_iter {
            break IpmStatus::IterationLimit;
        }
        let Some(xc) = Cholesky::new(t.x.as_matrix().clone()) else {
            break IpmStatus::Stalled;
        };
        let Some(zc) = Cholesky::new(t.z.as_matrix().clone()) else {
            break IpmStatus::Stalled;
        };
        let Some(newton) = Newton::new(p, &t, iteration)? else {
            break IpmStatus::Stalled;
        };
        let mu = row.mu;

        let (ax, _, az) = newton.direction(&rp, &rd, 0.0, None, iteration)?;
        let ap = max_step(&xc, &ax)?.min(1.0);
        let ad = max_step(&zc, &az)?.min(1.0);
        let mu_aff = t.x.add(&ax.scale(ap)).dot(&t.z.add(&az.scale(ad))) / n as f64;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(cfg.sigma);
        let corr = ax.as_matrix() * az.as_matrix();

        let (dx, dy, dz) = newton.direction(&rp, &rd, sigma * mu, Some(&corr), iteration)?;
        let ap = (cfg.tau * max_step(&xc, &dx)?).min(1.0);
        let ad = (cfg.tau * max_step(&zc, &dz)?).min(1.0);
        if ap.max(ad) < 1e-12 {
            break IpmStatus::Stalled;
        }
        let next = PrimalDualTriple::new(t.x.add(&dx.scale(ap)), &t.y + dy * ad, t.z.add(&dz.scale(ad)));
        if Cholesky::new(next.x.as_matrix().clone()).is_none() || Cholesky::new(next.z.as_matrix().clone()).is_none() {
            break IpmStatus::Stalled;
        }
        t = next;
        iteration += 1;
    };
    let criterion = log.last().map(IpmIterate::criterion).unwrap_or(f64::INFINITY);
    Ok(IpmOutcome {
        triple: t,
        status,
        iterations: iteration,
        criterion,
        log,
    })
}

/// Starting point of the vectorized problem from an interior-point triple.
///
/// `X₀` is truncated to its `r` leading eigenpairs (negative eigenvalues
/// clamped to zero) and factored as `F₀ = V_r diag(√λ)`; for the triangular
/// model `F₀` is then triangularized. The multipliers are `y₀` unchanged.
pub fn extract_state(
    p: &SdpProblem,
    triple: &PrimalDualTriple,
    r: usize,
    kind: ModelKind,
) -> Result<SqpState, ExtractError> {
    let n = p.n();
    if r == 0 {
        return Err(FactorError::ZeroRank.into());
    }
    if r > n {
        return Err(FactorError::TooManyColumns { r, n }.into());
    }
    if triple.x.order() != n {
        return Err(ModelError::Dimension {
            what: "X",
            expected: n,
            found: triple.x.order(),
        }
        .into());
    }
    if triple.y.len() != p.m() {
        return Err(ModelError::Dimension {
            what: "y",
            expected: p.m(),
            found: triple.y.len(),
        }
        .into());
    }
    let eig = sym_eig(&triple.x)?;
    let lmax = eig.values[n - 1];
    if eig.values[0] < -1e-6 * lmax.max(1.0) {
        return Err(ExtractError::NotPsd {
            eigenvalue: eig.values[0],
        });
    }
    let mut f = DMatrix::zeros(n, r);
    for k in 0..r {
        let lambda = eig.values[n - 1 - k].max(0.0);
        f.set_column(k, &(eig.vectors.column(n - 1 - k) * lambda.sqrt()));
    }
    if kind == ModelKind::Tnsdp {
        f = sign_normalize(triangularize(&f)).into_matrix();
    }
    Ok(SqpState {
        x: pack(&f, kind)?,
        mu: triple.y.clone(),
    })
}
