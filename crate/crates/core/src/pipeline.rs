//! End-to-end solve: interior-point warm start, rotation into the eigenbasis
//! of the warm-start matrix (triangular model only), factor extraction, SQP
//! refinement, and certification back in the original coordinates.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::factor::heuristic_rank;
use crate::linalg::SymMatrix;
use crate::model::{self, ModelError, PrimalDualTriple, SdpProblem};
use crate::qecqp::{build_qecqp, ModelKind, QecqpError};
use crate::sqp::{self, certify_optimality, Certificate, Indicators, SolveReport, SqpConfig, SqpError, Strictness};
use crate::warm_start::{extract_state, interior_point, ExtractError, IpmConfig, IpmError, IpmOutcome};

/// Warm starts whose feasibility criterion is not below this are flagged as
/// cold starts.
pub const WARM_START_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("warm start failed: {0}")]
    Ipm(#[from] IpmError),
    #[error("factor extraction failed: {0}")]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Qecqp(#[from] QecqpError),
    #[error("SQP failed: {0}")]
    Sqp(#[from] SqpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankChoice {
    /// Smallest `r` with `r(r+1)/2 ≥ m`, capped at `n`.
    Auto,
    Fixed(usize),
}

impl RankChoice {
    pub fn resolve(self, p: &SdpProblem) -> usize {
        match self {
            RankChoice::Auto => heuristic_rank(p.m()).min(p.n()),
            RankChoice::Fixed(r) => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub kind: ModelKind,
    pub rank: RankChoice,
    pub sqp: SqpConfig,
    pub ipm: IpmConfig,
    pub cert_tol: f64,
    /// Run the second-order probe with this eigenvalue tolerance.
    pub probe_strictness: Option<f64>,
}

impl SolveOptions {
    pub fn new(kind: ModelKind) -> Self {
        SolveOptions {
            kind,
            rank: RankChoice::Auto,
            sqp: SqpConfig::default(),
            ipm: IpmConfig::default(),
            cert_tol: 1e-8,
            probe_strictness: None,
        }
    }
}

/// Interior-point outcome together with its wall time, shareable between
/// several refinements of the same instance.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub outcome: IpmOutcome,
    pub time: Duration,
    /// Accuracy metric `E` of the interior-point triple.
    pub accuracy: f64,
}

pub fn warm_start(p: &SdpProblem, cfg: &IpmConfig) -> Result<WarmStart, PipelineError> {
    let started = Instant::now();
    let outcome = interior_point(p, cfg)?;
    let time = started.elapsed();
    let accuracy = model::accuracy_metric(p, &outcome.triple)?;
    Ok(WarmStart { outcome, time, accuracy })
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub kind: ModelKind,
    pub r: usize,
    pub warm_time: Duration,
    pub warm_criterion: f64,
    pub warm_accuracy: f64,
    pub warm_iterations: usize,
    /// The warm start missed [`WARM_START_THRESHOLD`]; the SQP phase ran anyway.
    pub cold_start: bool,
    /// SQP report in the coordinates the SQP ran in (rotated for the
    /// triangular model).
    pub sqp: SolveReport,
    /// Factor `F` with `X = F Fᵀ` in the original coordinates.
    pub factor: DMatrix<f64>,
    pub multipliers: DVector<f64>,
    /// Indicators of `(F Fᵀ, μ, C − 𝒜*(μ))` in the original coordinates.
    pub indicators: Indicators,
    pub certificate: Certificate,
    pub strictness: Option<Strictness>,
    pub objective: f64,
}

impl PipelineReport {
    pub fn sqp_time(&self) -> Duration {
        self.sqp.sqp_time
    }

    pub fn total_time(&self) -> Duration {
        self.warm_time + self.sqp.sqp_time
    }

    pub fn triple(&self, p: &SdpProblem) -> Result<PrimalDualTriple, ModelError> {
        Ok(PrimalDualTriple::new(
            SymMatrix::new(&self.factor * self.factor.transpose()),
            self.multipliers.clone(),
            p.dual_slack(&self.multipliers)?,
        ))
    }
}

/// Refines a warm start with the SQP method.
pub fn refine(p: &SdpProblem, warm: &WarmStart, opts: &SolveOptions) -> Result<PipelineReport, PipelineError> {
    let r = opts.rank.resolve(p);
    let started = Instant::now();
    let (work, rotation, triple) = match opts.kind {
        ModelKind::Tnsdp => {
            let (rp, u) = model::rotate_to_block_structure(p, &warm.outcome.triple.x)?;
            let t = warm.outcome.triple.congruence(&u);
            (rp, Some(u), t)
        }
        ModelKind::Nsdp => (p.clone(), None, warm.outcome.triple.clone()),
    };
    let inst = build_qecqp(&work, r, opts.kind)?;
    let state0 = extract_state(&work, &triple, r, opts.kind)?;
    let setup = started.elapsed();

    let mut report = sqp::solve(&inst, &state0, &opts.sqp)?;
    report.sqp_time += setup;
    report.warm_start_time = Some(warm.time);
    let strictness = match opts.probe_strictness {
        Some(tol) => sqp::strictness_probe(&inst, &report.state, tol).ok(),
        None => None,
    };
    report.strictness = strictness;

    let f_work = inst.unpack(&report.state.x)?;
    let factor = match &rotation {
        Some(u) => u * f_work,
        None => f_work,
    };
    let multipliers = report.state.mu.clone();
    let triple = PrimalDualTriple::new(
        SymMatrix::new(&factor * factor.transpose()),
        multipliers.clone(),
        p.dual_slack(&multipliers)?,
    );
    let indicators = Indicators::evaluate(p, &triple)?;
    let certificate = certify_optimality(p, &factor, &multipliers, opts.cert_tol)?;
    let objective = p.c().dot(&triple.x);
    Ok(PipelineReport {
        kind: opts.kind,
        r,
        warm_time: warm.time,
        warm_criterion: warm.outcome.criterion,
        warm_accuracy: warm.accuracy,
        warm_iterations: warm.outcome.iterations,
        cold_start: !warm.outcome.meets(WARM_START_THRESHOLD),
        sqp: report,
        factor,
        multipliers,
        indicators,
        certificate,
        strictness,
        objective,
    })
}

/// Warm start followed by [`refine`].
pub fn solve_sdp(p: &SdpProblem, opts: &SolveOptions) -> Result<PipelineReport, PipelineError> {
    let warm = warm_start(p, &opts.ipm)?;
    refine(p, &warm, opts)
}
