mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tnsdp_core::model::SdpProblem;
use tnsdp_core::problems::SeededRng;
use tnsdp_core::qecqp::{build_qecqp, pack, ModelKind, PackedVector, QecqpInstance};

use common::*;

const STEP: f64 = 1e-6;

fn random_problem(rng: &mut SeededRng, n: usize, m: usize) -> SdpProblem {
    let c = random_symmetric(rng, n);
    let a = (0..m).map(|_| random_symmetric(rng, n)).collect();
    let b = (0..m).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    SdpProblem::new(c, a, b).unwrap()
}

fn random_point(rng: &mut SeededRng, inst: &QecqpInstance<'_>) -> (PackedVector, DVector<f64>) {
    let x = PackedVector {
        values: DVector::from_fn(inst.dim(), |_, _| rng.uniform_in(-1.0, 1.0)),
        kind: inst.kind(),
    };
    let mu = DVector::from_fn(inst.m(), |_, _| rng.uniform_in(-1.0, 1.0));
    (x, mu)
}

fn shifted(x: &PackedVector, i: usize, h: f64) -> PackedVector {
    let mut y = x.clone();
    y.values[i] += h;
    y
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn derivatives_match_finite_differences(seed in any::<u64>(), n in 2usize..8, m in 1usize..6, tri in any::<bool>()) {
        let kind = if tri { ModelKind::Tnsdp } else { ModelKind::Nsdp };
        let mut rng = SeededRng::new(seed);
        let p = random_problem(&mut rng, n, m);
        let r = 1 + (seed as usize % n);
        let inst = build_qecqp(&p, r, kind).unwrap();
        let (x, mu) = random_point(&mut rng, &inst);
        let ev = inst.evaluate(&x, &mu).unwrap();
        let d = inst.dim();

        let mut grad = DVector::zeros(d);
        let mut jac = DMatrix::zeros(d, m);
        for i in 0..d {
            let (xp, xm) = (shifted(&x, i, STEP), shifted(&x, i, -STEP));
            grad[i] = (inst.objective(&xp).unwrap() - inst.objective(&xm).unwrap()) / (2.0 * STEP);
            let row = (inst.constraints(&xp).unwrap() - inst.constraints(&xm).unwrap()) / (2.0 * STEP);
            jac.set_row(i, &row.transpose());
        }
        prop_assert!(rel((&grad - &ev.grad_f).norm(), ev.grad_f.norm()) <= 1e-6);
        prop_assert!(rel((&jac - &ev.jac_g).norm(), ev.jac_g.norm()) <= 1e-6);

        let v = DVector::from_fn(d, |_, _| rng.uniform_in(-1.0, 1.0));
        let xp = PackedVector { values: &x.values + &v * STEP, kind };
        let xm = PackedVector { values: &x.values - &v * STEP, kind };
        let fd = (inst.lagrangian_gradient(&xp, &mu).unwrap() - inst.lagrangian_gradient(&xm, &mu).unwrap()) / (2.0 * STEP);
        let hv = ev.hess_l.as_matrix() * &v;
        prop_assert!(rel((&fd - &hv).norm(), hv.norm()) <= 1e-5);
    }

    #[test]
    fn models_agree_on_triangular_factors(seed in any::<u64>(), n in 2usize..9, m in 1usize..6) {
        let mut rng = SeededRng::new(seed);
        let p = random_problem(&mut rng, n, m);
        let r = 1 + (seed as usize % n);
        let s = random_lower(&mut rng, n, r);
        let full = build_qecqp(&p, r, ModelKind::Nsdp).unwrap();
        let tri = build_qecqp(&p, r, ModelKind::Tnsdp).unwrap();
        let xf = pack(&s, ModelKind::Nsdp).unwrap();
        let xt = pack(&s, ModelKind::Tnsdp).unwrap();
        let ff = full.objective(&xf).unwrap();
        let ft = tri.objective(&xt).unwrap();
        prop_assert!((ff - ft).abs() <= 1e-12 * (1.0 + ff.abs()));
        let gf = full.constraints(&xf).unwrap();
        let gt = tri.constraints(&xt).unwrap();
        prop_assert!((gf - gt).norm() <= 1e-12 * (1.0 + ff.abs()));
        prop_assert_eq!(tri.unpack(&xt).unwrap(), s);
    }

    #[test]
    fn stationarity_residual_is_restricted_dual_slack(seed in any::<u64>(), n in 2usize..8, m in 1usize..6, tri in any::<bool>()) {
        let kind = if tri { ModelKind::Tnsdp } else { ModelKind::Nsdp };
        let mut rng = SeededRng::new(seed);
        let p = random_problem(&mut rng, n, m);
        let r = 1 + (seed as usize % n);
        let inst = build_qecqp(&p, r, kind).unwrap();
        let (x, mu) = random_point(&mut rng, &inst);
        let ev = inst.evaluate(&x, &mu).unwrap();
        let lhs = &ev.grad_f - &ev.jac_g * &mu;
        let f = inst.unpack(&x).unwrap();
        let mut full = p.dual_slack(&mu).unwrap().as_matrix() * &f;
        if kind == ModelKind::Tnsdp {
            full.fill_upper_triangle(0.0, 1);
        }
        let rhs = pack(&full, kind).unwrap().values;
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn objective_is_half_the_sdp_objective(seed in any::<u64>(), n in 2usize..8, tri in any::<bool>()) {
        let kind = if tri { ModelKind::Tnsdp } else { ModelKind::Nsdp };
        let mut rng = SeededRng::new(seed);
        let p = random_problem(&mut rng, n, 2);
        let inst = build_qecqp(&p, n, kind).unwrap();
        let (x, _) = random_point(&mut rng, &inst);
        let f = inst.unpack(&x).unwrap();
        let sdp = p.c().dot(&tnsdp_core::linalg::SymMatrix::new(&f * f.transpose()));
        let ev = inst.evaluate(&x, &DVector::zeros(2)).unwrap();
        prop_assert!((2.0 * ev.f - sdp).abs() <= 1e-12 * (1.0 + sdp.abs()));
        // at μ = 0 the Lagrangian Hessian is H and f(x) = ½ xᵀ H x
        let quad = 0.5 * x.values.dot(&(ev.hess_l.as_matrix() * &x.values));
        prop_assert!((quad - ev.f).abs() <= 1e-12 * (1.0 + ev.f.abs()));
    }
}

#[test]
fn packed_dimension_ledger() {
    let mut rng = SeededRng::new(0);
    for n in 1..=50usize {
        let p = random_problem(&mut rng, n, 1);
        for r in 1..=n {
            let full = build_qecqp(&p, r, ModelKind::Nsdp).unwrap();
            let tri = build_qecqp(&p, r, ModelKind::Tnsdp).unwrap();
            assert_eq!(full.dim(), n * r);
            assert_eq!(tri.dim(), n * r - r * (r - 1) / 2);
            assert!(tri.dim() <= n * (n + 1) / 2);
            assert_eq!(tri.block_sizes().iter().sum::<usize>(), tri.dim());
            assert!(tri.offsets().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
