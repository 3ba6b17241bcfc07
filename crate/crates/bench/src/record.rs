//! Run records (CSV rows and the `record` block of solve reports) and the
//! versioned JSON documents written by `solve` and `certify`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use tnsdp_core::model::SdpProblem;
use tnsdp_core::pipeline::PipelineReport;
use tnsdp_core::qecqp::ModelKind;
use tnsdp_core::sqp::{Certificate, Strictness};

pub const SCHEMA_VERSION: u32 = 1;

/// Fixed CSV header, identical to the field order of [`RunRecord`].
pub const CSV_HEADER: &str =
    "problem_id,family,n,m,r,model,warm_ms,sqp_ms,total_ms,iters,E,infeas,gap,certified,strict_lambda_min,objective";

/// Non-finite values become the strings `inf`, `-inf`, `NaN` so JSON keeps
/// them; `None` is written as an empty field / `null`.
fn ser_opt_float<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(x) if x.is_finite() => s.serialize_some(x),
        Some(x) => s.serialize_some(&format!("{x}")),
    }
}

fn de_opt_float<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(x)) => Ok(Some(x)),
        Some(Raw::Text(t)) if t.is_empty() => Ok(None),
        Some(Raw::Text(t)) => t.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub model: ModelKind,
    pub warm_ms: f64,
    pub sqp_ms: f64,
    pub total_ms: f64,
    pub iters: usize,
    #[serde(rename = "E")]
    pub accuracy: f64,
    pub infeas: f64,
    pub gap: f64,
    pub certified: bool,
    #[serde(serialize_with = "ser_opt_float", deserialize_with = "de_opt_float")]
    pub strict_lambda_min: Option<f64>,
    pub objective: f64,
}

impl RunRecord {
    pub fn from_report(problem_id: &str, family: &str, p: &SdpProblem, rep: &PipelineReport) -> Self {
        let warm_ms = rep.warm_time.as_secs_f64() * 1e3;
        let sqp_ms = rep.sqp_time().as_secs_f64() * 1e3;
        RunRecord {
            problem_id: problem_id.to_owned(),
            family: family.to_owned(),
            n: p.n(),
            m: p.m(),
            r: rep.r,
            model: rep.kind,
            warm_ms,
            sqp_ms,
            total_ms: warm_ms + sqp_ms,
            iters: rep.sqp.iterations,
            accuracy: rep.indicators.accuracy,
            infeas: rep.indicators.infeasibility,
            gap: rep.indicators.duality_gap,
            certified: rep.certificate.certified,
            strict_lambda_min: rep.strictness.map(|s| s.lambda_min_reduced),
            objective: rep.objective,
        }
    }

    /// Row for a solve that errored out; indicators are NaN.
    pub fn failed(problem_id: &str, family: &str, p: &SdpProblem, r: usize, model: ModelKind, warm_ms: f64) -> Self {
        RunRecord {
            problem_id: problem_id.to_owned(),
            family: family.to_owned(),
            n: p.n(),
            m: p.m(),
            r,
            model,
            warm_ms,
            sqp_ms: 0.0,
            total_ms: warm_ms,
            iters: 0,
            accuracy: f64::NAN,
            infeas: f64::NAN,
            gap: f64::NAN,
            certified: false,
            strict_lambda_min: None,
            objective: f64::NAN,
        }
    }

    /// Copy with every timing column zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        RunRecord {
            warm_ms: 0.0,
            sqp_ms: 0.0,
            total_ms: 0.0,
            ..self.clone()
        }
    }
}

/// Factor and multipliers of a solve, enough to re-certify offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub model: ModelKind,
    pub n: usize,
    pub r: usize,
    /// Row-major `n×r` factor `F` with `X = F Fᵀ`.
    pub factor: Vec<Vec<f64>>,
    pub multipliers: Vec<f64>,
}

impl SolutionFile {
    pub fn new(model: ModelKind, factor: &DMatrix<f64>, multipliers: &DVector<f64>) -> Self {
        SolutionFile {
            model,
            n: factor.nrows(),
            r: factor.ncols(),
            factor: factor.row_iter().map(|row| row.iter().copied().collect()).collect(),
            multipliers: multipliers.iter().copied().collect(),
        }
    }

    /// Factor matrix, or `None` when the rows are ragged or disagree with `n×r`.
    pub fn factor_matrix(&self) -> Option<DMatrix<f64>> {
        if self.factor.len() != self.n || self.factor.iter().any(|row| row.len() != self.r) {
            return None;
        }
        Some(DMatrix::from_fn(self.n, self.r, |i, j| self.factor[i][j]))
    }

    pub fn multiplier_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.multipliers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartJson {
    pub iterations: usize,
    pub criterion: f64,
    pub accuracy: f64,
    pub cold_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqpJson {
    pub iterations: usize,
    pub e_history: Vec<f64>,
    pub max_regularization: f64,
    pub proximal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictnessJson {
    #[serde(serialize_with = "ser_opt_float", deserialize_with = "de_opt_float")]
    pub lambda_min_reduced: Option<f64>,
    pub nullity: usize,
    pub reduced_dim: usize,
}

impl From<Strictness> for StrictnessJson {
    fn from(s: Strictness) -> Self {
        StrictnessJson {
            lambda_min_reduced: Some(s.lambda_min_reduced),
            nullity: s.nullity,
            reduced_dim: s.reduced_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub certified: bool,
    pub margin: f64,
    pub stationarity: f64,
    pub primal_residual: f64,
}

impl From<Certificate> for CertificateJson {
    fn from(c: Certificate) -> Self {
        CertificateJson {
            certified: c.certified,
            margin: c.margin,
            stationarity: c.stationarity,
            primal_residual: c.primal_residual,
        }
    }
}

/// Norm-minimization quantities recovered from the multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormMinJson {
    pub norm: f64,
    pub t: f64,
    /// `z_k` as `[re, im]`.
    pub z: Vec<[f64; 2]>,
}

impl NormMinJson {
    /// Multipliers are ordered `t, x_1..x_k, y_1..y_k`.
    pub fn from_solution(objective: f64, mu: &DVector<f64>) -> Self {
        let k = (mu.len() - 1) / 2;
        NormMinJson {
            norm: -objective,
            t: mu[0],
            z: (0..k).map(|i| [mu[1 + i], mu[1 + k + i]]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReportJson {
    pub schema_version: u32,
    pub record: RunRecord,
    pub warm_start: WarmStartJson,
    pub sqp: SqpJson,
    pub certificate: CertificateJson,
    pub strictness: Option<StrictnessJson>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normmin: Option<NormMinJson>,
    pub solution: SolutionFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyJson {
    pub schema_version: u32,
    pub tol: f64,
    pub certified: bool,
    pub margin: f64,
    pub stationarity: f64,
    pub primal_residual: f64,
}
