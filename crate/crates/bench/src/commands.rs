//! Subcommands and their exit-code contract.
//!
//! `solve`: 0 when certified and `E ≤ eps` (certification alone when
//! `eps = 0`), 1 when either fails, 2 on unreadable input, 3 when the solver
//! errors out. `certify`: 0 pass, 1 fail, 2 on missing files or a dimension
//! mismatch. `gen` and `bench` exit 2 on invalid arguments.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tnsdp_core::model::SdpProblem;
use tnsdp_core::pipeline::{solve_sdp, RankChoice, SolveOptions};
use tnsdp_core::problems::{read_sdpa, write_sdpa, Family, GeneratorSpec, Sidecar};
use tnsdp_core::qecqp::ModelKind;
use tnsdp_core::sqp::{certify_optimality, SqpConfig};

use crate::record::{
    CertifyJson, NormMinJson, RunRecord, SolutionFile, SolveReportJson, SqpJson, WarmStartJson, SCHEMA_VERSION,
};
use crate::suites::{instances, run_all, Scale, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tnsdp", version, about = "Factorized SDP solver with interior-point warm start")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance as SDPA sparse file plus JSON sidecar.
    Gen(GenArgs),
    /// Solve an SDPA file and emit a JSON report.
    Solve(SolveArgs),
    /// Re-certify a stored solution against a problem file.
    Certify(CertifyArgs),
    /// Run a benchmark sweep and write one CSV row per instance and model.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Rand,
    Maxcut,
    Normmin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Nsdp,
    Tnsdp,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Nsdp => ModelKind::Nsdp,
            ModelArg::Tnsdp => ModelKind::Tnsdp,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Matrix order (rand, maxcut).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of constraints (rand) or of complex variables (normmin).
    #[arg(long)]
    pub m: Option<usize>,
    /// Rows of the norm-minimization matrices.
    #[arg(long)]
    pub p: Option<usize>,
    /// Columns of the norm-minimization matrices.
    #[arg(long)]
    pub q: Option<usize>,
    /// Edge density in (0, 1] (maxcut, default 0.5).
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn parse_rank(s: &str) -> Result<RankChoice, String> {
    if s == "auto" {
        return Ok(RankChoice::Auto);
    }
    match s.parse::<usize>() {
        Ok(0) => Err("rank must be positive".into()),
        Ok(k) => Ok(RankChoice::Fixed(k)),
        Err(_) => Err(format!("expected `auto` or a positive integer, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "tnsdp")]
    pub model: ModelArg,
    /// `auto` or a fixed factor width.
    #[arg(long, default_value = "auto", value_parser = parse_rank)]
    pub rank: RankChoice,
    /// Target accuracy; 0 runs every iteration.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Run the second-order probe (optional eigenvalue tolerance).
    #[arg(long, num_args = 0..=1, default_missing_value = "1e-6")]
    pub probe_strictness: Option<f64>,
    /// Proximal coefficient of the SQP step; 0 gives plain Newton steps.
    #[arg(long, default_value_t = 1.0)]
    pub proximal: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub cert_tol: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Solve report or bare solution JSON.
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: Scale,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Certify(a) => cmd_certify(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn emit(text: &str, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

/// Checks that exactly the flags relevant to the family are present.
pub fn gen_spec(a: &GenArgs) -> Result<GeneratorSpec, String> {
    let reject = |name: &str, present: bool| -> Result<(), String> {
        if present {
            Err(format!("--{name} does not apply to --family {:?}", a.family).to_lowercase())
        } else {
            Ok(())
        }
    };
    let need = |name: &str, v: Option<usize>| v.ok_or_else(|| format!("--{name} is required for this family"));
    match a.family {
        FamilyArg::Rand => {
            reject("p", a.p.is_some())?;
            reject("q", a.q.is_some())?;
            reject("density", a.density.is_some())?;
            Ok(GeneratorSpec::random(need("n", a.n)?, need("m", a.m)?, a.seed))
        }
        FamilyArg::Maxcut => {
            reject("m", a.m.is_some())?;
            reject("p", a.p.is_some())?;
            reject("q", a.q.is_some())?;
            let density = a.density.unwrap_or(0.5);
            if !(density > 0.0 && density <= 1.0) {
                return Err(format!("--density must lie in (0, 1], got {density}"));
            }
            Ok(GeneratorSpec::maxcut(need("n", a.n)?, density, a.seed))
        }
        FamilyArg::Normmin => {
            reject("n", a.n.is_some())?;
            reject("density", a.density.is_some())?;
            Ok(GeneratorSpec::normmin(need("p", a.p)?, need("q", a.q)?, need("m", a.m)?, a.seed))
        }
    }
}

fn cmd_gen(a: &GenArgs) -> i32 {
    let spec = match gen_spec(a) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let problem = match spec.generate() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    if let Err(e) = fs::create_dir_all(&a.out) {
        return fail(EXIT_USAGE, format!("{}: {e}", a.out.display()));
    }
    let stem = spec.stem();
    let dat = a.out.join(format!("{stem}.dat-s"));
    let json = a.out.join(format!("{stem}.json"));
    if let Err(e) = write_sdpa(&problem, &dat) {
        return fail(EXIT_USAGE, format!("{}: {e}", dat.display()));
    }
    let sidecar = serde_json::to_string_pretty(&spec.sidecar()).expect("sidecar serializes") + "\n";
    if let Err(e) = fs::write(&json, sidecar) {
        return fail(EXIT_USAGE, format!("{}: {e}", json.display()));
    }
    println!("{}", dat.display());
    println!("{}", json.display());
    EXIT_OK
}

fn read_sidecar(input: &Path) -> Option<Sidecar> {
    let text = fs::read_to_string(input.with_extension("json")).ok()?;
    serde_json::from_str(&text).ok()
}

/// Whether a solve meets the `solve` exit contract.
pub fn solve_passes(rec: &RunRecord, eps: f64) -> bool {
    rec.certified && (eps == 0.0 || rec.accuracy <= eps)
}

fn cmd_solve(a: &SolveArgs) -> i32 {
    let p = match read_sdpa(&a.input) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", a.input.display())),
    };
    let sidecar = read_sidecar(&a.input);
    let opts = SolveOptions {
        rank: a.rank,
        sqp: SqpConfig {
            eps: a.eps,
            max_iter: a.max_iter,
            proximal: a.proximal,
        },
        cert_tol: a.cert_tol,
        probe_strictness: a.probe_strictness,
        ..SolveOptions::new(a.model.into())
    };
    let rep = match solve_sdp(&p, &opts) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_SOLVER, e),
    };
    let id = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let family = sidecar.as_ref().map_or("sdpa", |s| s.family.as_str());
    let record = RunRecord::from_report(&id, family, &p, &rep);
    let normmin = match sidecar {
        Some(Sidecar {
            family: Family::NormMin, ..
        }) if p.m() % 2 == 1 => Some(NormMinJson::from_solution(rep.objective, &rep.multipliers)),
        _ => None,
    };
    let report = SolveReportJson {
        schema_version: SCHEMA_VERSION,
        warm_start: WarmStartJson {
            iterations: rep.warm_iterations,
            criterion: rep.warm_criterion,
            accuracy: rep.warm_accuracy,
            cold_start: rep.cold_start,
        },
        sqp: SqpJson {
            iterations: rep.sqp.iterations,
            e_history: rep.sqp.e_history.clone(),
            max_regularization: rep.sqp.max_regularization,
            proximal: a.proximal,
        },
        certificate: rep.certificate.into(),
        strictness: rep.strictness.map(Into::into),
        normmin,
        solution: SolutionFile::new(rep.kind, &rep.factor, &rep.multipliers),
        record,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Err(e) = emit(&text, a.out.as_deref()) {
        return fail(EXIT_SOLVER, format!("cannot write report: {e}"));
    }
    if solve_passes(&report.record, a.eps) {
        EXIT_OK
    } else {
        eprintln!(
            "not solved: E = {:e}, certified = {}, margin = {:e}",
            report.record.accuracy, report.certificate.certified, report.certificate.margin
        );
        EXIT_FAIL
    }
}

/// Reads either a full solve report or a bare [`SolutionFile`].
pub fn load_solution(text: &str) -> Result<SolutionFile, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let inner = match value.get("solution") {
        Some(s) => s.clone(),
        None => value,
    };
    serde_json::from_value(inner).map_err(|e| e.to_string())
}

fn check_dims(p: &SdpProblem, s: &SolutionFile) -> Result<nalgebra::DMatrix<f64>, String> {
    let f = s.factor_matrix().ok_or("factor rows do not match the declared n×r shape")?;
    if f.nrows() != p.n() {
        return Err(format!("factor has {} rows, problem order is {}", f.nrows(), p.n()));
    }
    if s.multipliers.len() != p.m() {
        return Err(format!("{} multipliers for {} constraints", s.multipliers.len(), p.m()));
    }
    Ok(f)
}

fn cmd_certify(a: &CertifyArgs) -> i32 {
    let p = match read_sdpa(&a.problem) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", a.problem.display())),
    };
    let sol = match fs::read_to_string(&a.solution).map_err(|e| e.to_string()).and_then(|t| load_solution(&t)) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", a.solution.display())),
    };
    let f = match check_dims(&p, &sol) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_USAGE, format!("solution does not fit the problem: {e}")),
    };
    let cert = match certify_optimality(&p, &f, &sol.multiplier_vector(), a.tol) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let out = CertifyJson {
        schema_version: SCHEMA_VERSION,
        tol: a.tol,
        certified: cert.certified,
        margin: cert.margin,
        stationarity: cert.stationarity,
        primal_residual: cert.primal_residual,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("certificate serializes"));
    if cert.certified {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

/// CSV text for a list of records, header included even when empty.
pub fn records_to_csv(rows: &[RunRecord]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(crate::record::CSV_HEADER.split(',')).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

fn cmd_bench(a: &BenchArgs) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let todo = instances(a.suite, a.scale, a.seed);
    let rows = pool.install(|| run_all(&todo));
    let failed = rows.iter().filter(|r| r.accuracy.is_nan()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} runs failed", rows.len());
    }
    match emit(&records_to_csv(&rows), a.out.as_deref()) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(EXIT_USAGE, format!("cannot write CSV: {e}")),
    }
}
