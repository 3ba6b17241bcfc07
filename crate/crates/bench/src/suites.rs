//! Benchmark sweeps. Each instance gets one shared warm start and is then
//! refined with both models; rows come out in instance order, NSDP first.

use std::time::Duration;

use clap::ValueEnum;
use rayon::prelude::*;
use tnsdp_core::model::SdpProblem;
use tnsdp_core::pipeline::{refine, warm_start, SolveOptions};
use tnsdp_core::problems::GeneratorSpec;
use tnsdp_core::qecqp::ModelKind;
use tnsdp_core::sqp::SqpConfig;
use tnsdp_core::warm_start::IpmConfig;

use crate::record::RunRecord;

/// Eigenvalue tolerance of the strictness probe in sweeps.
pub const PROBE_TOL: f64 = 1e-6;

/// Max-cut edge density used by every sweep.
pub const MAXCUT_DENSITY: f64 = 0.5;

const SEED_STRIDE: u64 = 1_000_003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Fig1,
    Fig2,
    Fig3,
    Tab1,
    Tab2,
    Tab3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchInstance {
    pub spec: GeneratorSpec,
    pub sqp: SqpConfig,
}

/// Builds a spec from the swept size and a seed.
type SpecFn = fn(usize, u64) -> GeneratorSpec;

/// Seed of the `index`-th instance of a sweep started with `seed`.
pub fn instance_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(SEED_STRIDE).wrapping_add(index as u64)
}

fn sweep(values: impl Iterator<Item = usize>, reps: usize) -> Vec<usize> {
    values.flat_map(|v| std::iter::repeat_n(v, reps)).collect()
}

/// Instances of a suite in run order.
pub fn instances(suite: Suite, scale: Scale, seed: u64) -> Vec<BenchInstance> {
    let desk = scale == Scale::Desk;
    let reps = if desk { 3 } else { 5 };
    let fig = SqpConfig::default();
    let table = SqpConfig { eps: 0.0, ..fig };
    let (sizes, make, sqp): (Vec<usize>, SpecFn, SqpConfig) = match suite {
        Suite::Fig1 => (
            if desk { sweep((5..=30).step_by(5), reps) } else { sweep(5..=50, reps) },
            |m, s| GeneratorSpec::random(10, m, s),
            fig,
        ),
        Suite::Fig2 => (
            if desk { sweep((20..=60).step_by(10), reps) } else { sweep(20..=100, reps) },
            |n, s| GeneratorSpec::maxcut(n, MAXCUT_DENSITY, s),
            fig,
        ),
        Suite::Fig3 => (
            if desk { sweep((5..=20).step_by(5), reps) } else { sweep(5..=50, reps) },
            |p, s| GeneratorSpec::normmin(p, p, 10, s),
            fig,
        ),
        Suite::Tab1 => (vec![30; 10], |m, s| GeneratorSpec::random(10, m, s), table),
        Suite::Tab2 => (vec![50; 10], |n, s| GeneratorSpec::maxcut(n, MAXCUT_DENSITY, s), table),
        Suite::Tab3 => (
            vec![if desk { 10 } else { 50 }; 10],
            |p, s| GeneratorSpec::normmin(p, p, 10, s),
            table,
        ),
    };
    sizes
        .into_iter()
        .enumerate()
        .map(|(i, size)| BenchInstance {
            spec: make(size, instance_seed(seed, i)),
            sqp,
        })
        .collect()
}

fn options(kind: ModelKind, sqp: SqpConfig) -> SolveOptions {
    SolveOptions {
        sqp,
        probe_strictness: Some(PROBE_TOL),
        ..SolveOptions::new(kind)
    }
}

fn failed_rows(id: &str, family: &str, p: &SdpProblem, warm_ms: f64) -> Vec<RunRecord> {
    [ModelKind::Nsdp, ModelKind::Tnsdp]
        .into_iter()
        .map(|kind| {
            let r = options(kind, SqpConfig::default()).rank.resolve(p);
            RunRecord::failed(id, family, p, r, kind, warm_ms)
        })
        .collect()
}

/// Two rows (NSDP, TNSDP) for one instance. Generation or warm-start
/// failures give NaN rows for both models.
pub fn run_instance(inst: &BenchInstance) -> Vec<RunRecord> {
    let id = inst.spec.stem();
    let family = inst.spec.family.as_str();
    let p = match inst.spec.generate() {
        Ok(p) => p,
        Err(_) => return Vec::new(),
    };
    let warm = match warm_start(&p, &IpmConfig::default()) {
        Ok(w) => w,
        Err(_) => return failed_rows(&id, family, &p, 0.0),
    };
    let warm_ms = ms(warm.time);
    [ModelKind::Nsdp, ModelKind::Tnsdp]
        .into_iter()
        .map(|kind| {
            let opts = options(kind, inst.sqp);
            match refine(&p, &warm, &opts) {
                Ok(rep) => RunRecord::from_report(&id, family, &p, &rep),
                Err(_) => RunRecord::failed(&id, family, &p, opts.rank.resolve(&p), kind, warm_ms),
            }
        })
        .collect()
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs the instances on the current rayon pool; output order is the input
/// order regardless of completion order.
pub fn run_all(instances: &[BenchInstance]) -> Vec<RunRecord> {
    instances.par_iter().map(run_instance).collect::<Vec<_>>().into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tnsdp_core::problems::Dims;

    #[test]
    fn desk_sweeps_have_documented_sizes() {
        assert_eq!(instances(Suite::Fig1, Scale::Desk, 1).len(), 6 * 3);
        assert_eq!(instances(Suite::Fig2, Scale::Desk, 1).len(), 5 * 3);
        assert_eq!(instances(Suite::Fig3, Scale::Desk, 1).len(), 4 * 3);
        assert_eq!(instances(Suite::Fig1, Scale::Paper, 1).len(), 46 * 5);
        assert_eq!(instances(Suite::Fig2, Scale::Paper, 1).len(), 81 * 5);
        for s in [Suite::Tab1, Suite::Tab2, Suite::Tab3] {
            let all = instances(s, Scale::Desk, 1);
            assert_eq!(all.len(), 10);
            assert!(all.iter().all(|i| i.sqp.eps == 0.0));
        }
    }

    #[test]
    fn seeds_are_distinct_and_reproducible() {
        let a = instances(Suite::Tab1, Scale::Desk, 4);
        let b = instances(Suite::Tab1, Scale::Desk, 4);
        assert_eq!(a, b);
        let mut seeds: Vec<u64> = a.iter().map(|i| i.spec.seed).collect();
        seeds.dedup();
        assert_eq!(seeds.len(), 10);
        assert_eq!(a[3].spec.seed, 4 * 1_000_003 + 3);
    }

    #[test]
    fn fig1_sweeps_m_with_fixed_n() {
        let ms: Vec<usize> = instances(Suite::Fig1, Scale::Desk, 1)
            .iter()
            .map(|i| match i.spec.dims {
                Dims::Random { n, m } => {
                    assert_eq!(n, 10);
                    m
                }
                _ => panic!("fig1 is random SDPs"),
            })
            .collect();
        assert_eq!(&ms[..4], &[5, 5, 5, 10]);
        assert_eq!(*ms.last().unwrap(), 30);
    }

    #[test]
    fn instance_rows_are_ordered_by_model() {
        let inst = BenchInstance {
            spec: GeneratorSpec::random(5, 6, 2),
            sqp: SqpConfig::default(),
        };
        let rows = run_instance(&inst);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].model, ModelKind::Nsdp);
        assert_eq!(rows[1].model, ModelKind::Tnsdp);
        assert!(rows.iter().all(|r| r.problem_id == "rand_n5_m6_s2" && r.certified));
    }
}
