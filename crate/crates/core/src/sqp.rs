//! Local Newton-KKT SQP for the vectorized factor models, the dual optimality
//! certificate, and the second-order strictness probe.
//!
//! Each iteration solves
//!
//! ```txt
//!     [ ∇²ₓₓℒ(x, μ)   −∇g(x) ] [ξ]     [ ∇f(x) ]
//!     [ ∇g(x)ᵀ         0     ] [ζ] = − [ g(x)  ]
//! ```
//!
//! and takes the full step `x ← x + ξ`, `μ ← ζ`. There is no globalization;
//! the starting point is expected to come from a warm start close to a
//! solution.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{solve_sym_indefinite, sym_eig, LinalgError, SymMatrix};
use crate::model::{self, ModelError, PrimalDualTriple, SdpProblem};
use crate::qecqp::{PackedVector, QecqpError, QecqpInstance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SqpError {
    #[error("KKT system is singular (d = {d}, m = {m}, constraint Jacobian rank {jacobian_rank})")]
    SingularSystem {
        d: usize,
        m: usize,
        jacobian_rank: usize,
    },
    #[error("iterates diverged at iteration {iteration} (‖x‖ = {norm:e})")]
    Diverged { iteration: usize, norm: f64 },
    #[error("point is not stationary: ‖∇ℒ‖ = {residual:e} exceeds {tolerance:e}")]
    NotStationary { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Qecqp(#[from] QecqpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Primal point and multipliers of the vectorized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SqpState {
    pub x: PackedVector,
    pub mu: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpConfig {
    /// Stop once the accuracy metric drops to `eps`. Zero runs all `max_iter`
    /// iterations.
    pub eps: f64,
    pub max_iter: usize,
    /// Coefficient `c` of the proximal shift `ρ = c·min(‖r‖, 10⁻²)` added to
    /// the Hessian block, where `r = (∇ℒ, g)` is the current KKT residual.
    /// The shift vanishes at solutions, so the local rate is unchanged, but it
    /// keeps steps bounded where the KKT matrix is nearly singular (flat
    /// rotation directions of the full factor, zero columns when the solution
    /// rank is below `r`). Zero gives the plain Newton-KKT iteration.
    pub proximal: f64,
}

impl Default for SqpConfig {
    fn default() -> Self {
        SqpConfig {
            eps: 1e-8,
            max_iter: 100,
            proximal: 1.0,
        }
    }
}

const PROXIMAL_CAP: f64 = 1e-2;

const DIVERGENCE_FACTOR: f64 = 1e8;

/// Accuracy indicators on the SDP scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Indicators {
    /// Stopping metric `E(X, y, Z)`.
    pub accuracy: f64,
    pub infeasibility: f64,
    pub duality_gap: f64,
}

impl Indicators {
    pub fn evaluate(p: &SdpProblem, t: &PrimalDualTriple) -> Result<Self, ModelError> {
        Ok(Indicators {
            accuracy: model::accuracy_metric(p, t)?,
            infeasibility: model::infeasibility(p, t)?,
            duality_gap: model::duality_gap(p, t)?,
        })
    }
}

/// Outcome of the second-order probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Strictness {
    /// `λ_min(Nᵀ ∇²ₓₓℒ N)`; `+∞` when the null space of `∇g(x)ᵀ` is trivial.
    pub lambda_min_reduced: f64,
    /// Eigenvalues of the reduced Hessian within `±tol`.
    pub nullity: usize,
    /// Dimension of the null space of `∇g(x)ᵀ`.
    pub reduced_dim: usize,
}

impl Strictness {
    pub fn is_strict(&self, tol: f64) -> bool {
        self.lambda_min_reduced > tol
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Iterate with the smallest accuracy metric.
    pub state: SqpState,
    pub iterations: usize,
    /// Accuracy metric of the starting point followed by one value per step.
    pub e_history: Vec<f64>,
    pub sqp_time: Duration,
    pub warm_start_time: Option<Duration>,
    pub indicators: Indicators,
    /// `λ_min(C − 𝒜*(μ))`
    pub certificate_margin: f64,
    pub strictness: Option<Strictness>,
    /// `⟨C, F Fᵀ⟩`
    pub objective: f64,
    /// Largest diagonal shift used by any KKT solve.
    pub max_regularization: f64,
}

/// The SDP triple `(F Fᵀ, μ, C − 𝒜*(μ))` represented by an SQP state.
pub fn state_triple(inst: &QecqpInstance<'_>, state: &SqpState) -> Result<PrimalDualTriple, SqpError> {
    let f = inst.unpack(&state.x)?;
    let p = inst.problem();
    Ok(PrimalDualTriple::new(
        SymMatrix::new(&f * f.transpose()),
        state.mu.clone(),
        p.dual_slack(&state.mu)?,
    ))
}

fn jacobian_rank(jac: &DMatrix<f64>) -> usize {
    let gram = SymMatrix::new(jac.transpose() * jac);
    match sym_eig(&gram) {
        Ok(e) => {
            let top = e.values.last().copied().unwrap_or(0.0).max(0.0);
            e.values.iter().filter(|&&v| v > 1e-10 * top).count()
        }
        Err(_) => 0,
    }
}

fn newton_step(inst: &QecqpInstance<'_>, state: &SqpState, proximal: f64) -> Result<(SqpState, f64), SqpError> {
    let ev = inst.evaluate(&state.x, &state.mu)?;
    let d = inst.dim();
    let m = inst.m();
    let mut k = DMatrix::zeros(d + m, d + m);
    k.view_mut((0, 0), (d, d)).copy_from(ev.hess_l.as_matrix());
    if proximal > 0.0 {
        let residual = ((&ev.grad_f - &ev.jac_g * &state.mu).norm_squared() + ev.g.norm_squared()).sqrt();
        let rho = proximal * residual.min(PROXIMAL_CAP);
        for i in 0..d {
            k[(i, i)] += rho;
        }
    }
    k.view_mut((0, d), (d, m)).copy_from(&(-&ev.jac_g));
    k.view_mut((d, 0), (m, d)).copy_from(&(-ev.jac_g.transpose()));
    let mut rhs = DVector::zeros(d + m);
    rhs.rows_mut(0, d).copy_from(&(-&ev.grad_f));
    rhs.rows_mut(d, m).copy_from(&ev.g);

    let sol = solve_sym_indefinite(&SymMatrix::new(k), &rhs).map_err(|e| match e {
        LinalgError::SingularSystem { .. } => SqpError::SingularSystem {
            d,
            m,
            jacobian_rank: jacobian_rank(&ev.jac_g),
        },
        other => SqpError::Linalg(other),
    })?;
    let x = PackedVector {
        values: &state.x.values + sol.solution.rows(0, d),
        kind: state.x.kind,
    };
    let mu = sol.solution.rows(d, m).into_owned();
    Ok((SqpState { x, mu }, sol.regularization))
}

/// One full Newton-KKT step, without the proximal term.
pub fn sqp_step(inst: &QecqpInstance<'_>, state: &SqpState) -> Result<SqpState, SqpError> {
    newton_step(inst, state, 0.0).map(|(s, _)| s)
}

fn metric(inst: &QecqpInstance<'_>, state: &SqpState) -> Result<f64, SqpError> {
    Ok(model::accuracy_metric(inst.problem(), &state_triple(inst, state)?)?)
}

/// Iterates [`sqp_step`] until the accuracy metric reaches `cfg.eps` or
/// `cfg.max_iter` steps have been taken, then reports the best iterate.
pub fn solve(inst: &QecqpInstance<'_>, state0: &SqpState, cfg: &SqpConfig) -> Result<SolveReport, SqpError> {
    let started = Instant::now();
    let bound = DIVERGENCE_FACTOR * (1.0 + state0.x.values.norm());
    let mut state = state0.clone();
    let mut e = metric(inst, &state)?;
    let mut history = vec![e];
    let mut best = (e, state.clone());
    let mut iterations = 0;
    let mut max_reg = 0.0f64;
    while iterations < cfg.max_iter && !(cfg.eps > 0.0 && e <= cfg.eps) {
        let (next, reg) = newton_step(inst, &state, cfg.proximal)?;
        iterations += 1;
        max_reg = max_reg.max(reg);
        let norm = next.x.values.norm();
        if !norm.is_finite() || norm > bound || !next.mu.iter().all(|v| v.is_finite()) {
            return Err(SqpError::Diverged {
                iteration: iterations,
                norm,
            });
        }
        state = next;
        e = metric(inst, &state)?;
        history.push(e);
        if e < best.0 {
            best = (e, state.clone());
        }
    }
    let sqp_time = started.elapsed();

    let best_state = best.1;
    let p = inst.problem();
    let triple = state_triple(inst, &best_state)?;
    let indicators = Indicators::evaluate(p, &triple)?;
    let certificate_margin = triple.z.min_eigenvalue()?;
    let objective = p.c().dot(&triple.x);
    Ok(SolveReport {
        state: best_state,
        iterations,
        e_history: history,
        sqp_time,
        warm_start_time: None,
        indicators,
        certificate_margin,
        strictness: None,
        objective,
        max_regularization: max_reg,
    })
}

/// Dual certificate for a factor `F` and multipliers `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub certified: bool,
    /// `λ_min(C − 𝒜*(μ))`
    pub margin: f64,
    /// `‖(C − 𝒜*(μ)) F‖_F`
    pub stationarity: f64,
    /// `‖𝒜(F Fᵀ) − b‖`
    pub primal_residual: f64,
}

/// Certifies global optimality of `F Fᵀ` and `(C − 𝒜*(μ), μ)` for the primal
/// and dual problems: the dual slack must be PSD (within `tol`), the factor
/// stationary, and the primal constraints satisfied.
pub fn certify_optimality(
    p: &SdpProblem,
    f: &DMatrix<f64>,
    mu: &DVector<f64>,
    tol: f64,
) -> Result<Certificate, SqpError> {
    if f.nrows() != p.n() {
        return Err(ModelError::Dimension {
            what: "factor rows",
            expected: p.n(),
            found: f.nrows(),
        }
        .into());
    }
    let slack = p.dual_slack(mu)?;
    let margin = slack.min_eigenvalue()?;
    let stationarity = (slack.as_matrix() * f).norm();
    let (_, forms) = p.quadratic_forms(f);
    let primal_residual = (forms - p.b()).norm();
    let certified = margin >= -tol
        && stationarity <= tol * (1.0 + p.c().frobenius_norm())
        && primal_residual <= tol * (1.0 + p.b().norm());
    Ok(Certificate {
        certified,
        margin,
        stationarity,
        primal_residual,
    })
}

const STATIONARITY_TOL: f64 = 1e-6;
const NULL_SPACE_CUTOFF: f64 = 1e-10;

/// Minimum eigenvalue of the Lagrangian Hessian restricted to the null space
/// of the constraint Jacobian, and the number of its eigenvalues within
/// `±tol`. A positive minimum is a second-order sufficient condition, hence
/// strict local optimality.
pub fn strictness_probe(inst: &QecqpInstance<'_>, state: &SqpState, tol: f64) -> Result<Strictness, SqpError> {
    let ev = inst.evaluate(&state.x, &state.mu)?;
    let grad_l = &ev.grad_f - &ev.jac_g * &state.mu;
    let tolerance = STATIONARITY_TOL * (1.0 + ev.grad_f.norm() + (&ev.jac_g * &state.mu).norm());
    let residual = grad_l.norm();
    if residual.is_nan() || residual > tolerance {
        return Err(SqpError::NotStationary { residual, tolerance });
    }

    let jj = SymMatrix::new(&ev.jac_g * ev.jac_g.transpose());
    let eig = sym_eig(&jj)?;
    let cutoff = NULL_SPACE_CUTOFF * ev.jac_g.norm_squared();
    let null: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] <= cutoff).collect();
    if null.is_empty() {
        return Ok(Strictness {
            lambda_min_reduced: f64::INFINITY,
            nullity: 0,
            reduced_dim: 0,
        });
    }
    let basis = eig.vectors.select_columns(null.iter());
    let reduced = SymMatrix::new(basis.transpose() * ev.hess_l.as_matrix() * &basis);
    let values = sym_eig(&reduced)?.values;
    Ok(Strictness {
        lambda_min_reduced: values[0],
        nullity: values.iter().filter(|v| v.abs() <= tol).count(),
        reduced_dim: null.len(),
    })
}
