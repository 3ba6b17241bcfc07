use std::path::Path;
use std::process::{Command, Output};

use tnsdp_bench::record::{RunRecord, CSV_HEADER};

fn tnsdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tnsdp")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn gen(dir: &Path, args: &[&str]) -> String {
    let mut all = vec!["gen"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", dir.to_str().unwrap()]);
    let o = tnsdp(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap().lines().next().unwrap().to_owned()
}

#[test]
fn gen_writes_named_files_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = gen(a.path(), &["--family", "rand", "--n", "10", "--m", "30", "--seed", "1"]);
    let fb = gen(b.path(), &["--family", "rand", "--n", "10", "--m", "30", "--seed", "1"]);
    assert!(fa.ends_with("rand_n10_m30_s1.dat-s"));
    assert_eq!(std::fs::read(&fa).unwrap(), std::fs::read(&fb).unwrap());
    let side_a = std::fs::read(a.path().join("rand_n10_m30_s1.json")).unwrap();
    assert_eq!(side_a, std::fs::read(b.path().join("rand_n10_m30_s1.json")).unwrap());

    gen(a.path(), &["--family", "maxcut", "--n", "20", "--density", "0.5", "--seed", "7"]);
    assert!(a.path().join("maxcut_n20_s7.dat-s").exists());
    assert!(a.path().join("maxcut_n20_s7.json").exists());
}

#[test]
fn gen_rejects_foreign_flags() {
    assert_eq!(code(&tnsdp(&["gen", "--family", "normmin", "--n", "10"])), 2);
    assert_eq!(code(&tnsdp(&["gen", "--family", "rand", "--n", "5", "--m", "3", "--p", "2"])), 2);
    assert_eq!(code(&tnsdp(&["gen", "--family", "maxcut", "--n", "5", "--density", "1.5"])), 2);
    assert_eq!(code(&tnsdp(&["gen", "--family", "bogus"])), 2);
}

#[test]
fn solve_and_certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), &["--family", "maxcut", "--n", "12", "--seed", "2"]);
    let report = dir.path().join("report.json");
    let o = tnsdp(&["solve", &input, "--out", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    let rec: RunRecord = serde_json::from_value(json["record"].clone()).unwrap();
    assert!(rec.accuracy <= 1e-8 && rec.certified);
    let f = &json["solution"]["factor"];
    for row in f.as_array().unwrap() {
        let d: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap().powi(2)).sum();
        assert!((d - 1.0).abs() <= 1e-8);
    }

    let ok = tnsdp(&["certify", "--problem", &input, "--solution", report.to_str().unwrap()]);
    assert_eq!(code(&ok), 0);

    // Max-cut constraints are e_i e_iᵀ, so raising every μ_i by one shifts the slack by −I.
    let mut tampered = json["solution"].clone();
    for v in tampered["multipliers"].as_array_mut().unwrap() {
        *v = (v.as_f64().unwrap() + 1.0).into();
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, tampered.to_string()).unwrap();
    let o = tnsdp(&["certify", "--problem", &input, "--solution", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let cert: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(cert["margin"].as_f64().unwrap() < 0.0);

    let missing = dir.path().join("missing.json");
    assert_eq!(code(&tnsdp(&["certify", "--problem", &input, "--solution", missing.to_str().unwrap()])), 2);

    let other = gen(dir.path(), &["--family", "maxcut", "--n", "8", "--seed", "2"]);
    assert_eq!(code(&tnsdp(&["certify", "--problem", &other, "--solution", report.to_str().unwrap()])), 2);
}

#[test]
fn solve_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("garbage.dat-s");
    std::fs::write(&garbage, "1\n1\n2\n1\n1 1 2 1 1.0\n").unwrap();
    assert_eq!(code(&tnsdp(&["solve", garbage.to_str().unwrap()])), 2);
    assert_eq!(code(&tnsdp(&["solve", dir.path().join("none.dat-s").to_str().unwrap()])), 2);

    let input = gen(dir.path(), &["--family", "rand", "--n", "10", "--m", "30", "--seed", "1"]);
    let o = tnsdp(&["solve", &input, "--rank", "1"]);
    assert_ne!(code(&o), 0);
}

#[test]
fn models_agree_on_objective() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), &["--family", "rand", "--n", "8", "--m", "12", "--seed", "5"]);
    let mut objs = Vec::new();
    for model in ["nsdp", "tnsdp"] {
        let o = tnsdp(&["solve", &input, "--model", model]);
        assert_eq!(code(&o), 0, "{model}: {}", String::from_utf8_lossy(&o.stderr));
        let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        objs.push(json["record"]["objective"].as_f64().unwrap());
    }
    assert!((objs[0] - objs[1]).abs() <= 1e-6 * objs[0].abs().max(1.0));
}

fn read_rows(csv_text: &str) -> Vec<RunRecord> {
    csv::Reader::from_reader(csv_text.as_bytes())
        .deserialize()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn bench_csv_is_reproducible_modulo_timings() {
    let run = |jobs: &str| {
        let o = tnsdp(&["bench", "--suite", "tab1", "--scale", "desk", "--seed", "1", "--jobs", jobs]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let first = run("1");
    let second = run("3");
    assert_eq!(first.lines().next().unwrap(), CSV_HEADER);
    let (a, b) = (read_rows(&first), read_rows(&second));
    assert_eq!(a.len(), 20);
    let strip = |v: &[RunRecord]| v.iter().map(RunRecord::without_timings).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
    for pair in a.chunks(2) {
        assert_eq!(pair[0].problem_id, pair[1].problem_id);
        assert_eq!(pair[0].model.to_string(), "nsdp");
        assert_eq!(pair[1].model.to_string(), "tnsdp");
    }
    assert!(a.iter().all(|r| r.warm_ms >= 0.0 && r.total_ms >= r.sqp_ms));
}

#[test]
fn bench_rejects_unknown_suite() {
    assert_eq!(code(&tnsdp(&["bench", "--suite", "fig9"])), 2);
}
