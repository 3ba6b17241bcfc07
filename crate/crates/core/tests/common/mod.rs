#![allow(dead_code)]

use nalgebra::DMatrix;
use tnsdp_core::linalg::SymMatrix;
use tnsdp_core::problems::SeededRng;

pub fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.uniform_in(-1.0, 1.0))
}

pub fn random_symmetric(rng: &mut SeededRng, n: usize) -> SymMatrix {
    let m = random_matrix(rng, n, n);
    SymMatrix::new(&m + m.transpose())
}

/// Lower-triangular `n×r` with diagonal bounded away from zero.
pub fn random_lower(rng: &mut SeededRng, n: usize, r: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, r, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => {
            let v = rng.uniform_in(0.5, 1.5);
            if rng.uniform() < 0.5 { -v } else { v }
        }
        std::cmp::Ordering::Greater => rng.uniform_in(-1.0, 1.0),
    })
}

/// `W Wᵀ` with `W` random `n×rank`.
pub fn random_psd(rng: &mut SeededRng, n: usize, rank: usize) -> SymMatrix {
    let w = random_matrix(rng, n, rank);
    SymMatrix::new(&w * w.transpose())
}

pub fn random_orthogonal(rng: &mut SeededRng, n: usize) -> DMatrix<f64> {
    let (q, _) = tnsdp_core::linalg::qr_decompose(&random_matrix(rng, n, n));
    q
}
