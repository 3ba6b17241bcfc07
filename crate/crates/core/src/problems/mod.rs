//! Seeded instance generators and SDPA sparse file I/O.
//!
//! All randomness comes from [`SeededRng`]: xoshiro256++ seeded through
//! SplitMix64 from a 64-bit seed, with uniform doubles taken from the top 53
//! bits of each output. Draw order is fixed per generator, so an identical
//! [`GeneratorSpec`] produces bit-identical problems on every platform.

mod sdpa;

use nalgebra::{DMatrix, DVector};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SymMatrix;
use crate::model::{PrimalDualTriple, SdpProblem};

pub use sdpa::{parse_sdpa, read_sdpa, to_sdpa_string, write_sdpa, SdpaError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generator dimensions: {0}")]
    InvalidDims(String),
}

/// Deterministic uniform source.
#[derive(Debug, Clone)]
pub struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    fn matrix(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
        // row-major draw order
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.uniform_in(lo, hi);
            }
        }
        m
    }

    fn symmetric(&mut self, n: usize, lo: f64, hi: f64) -> SymMatrix {
        // upper triangle, row-major
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.uniform_in(lo, hi);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix::new(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[serde(rename = "rand")]
    RandomSdp,
    #[serde(rename = "maxcut")]
    MaxCut,
    #[serde(rename = "normmin")]
    NormMin,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::RandomSdp => "rand",
            Family::MaxCut => "maxcut",
            Family::NormMin => "normmin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dims {
    Random { n: usize, m: usize },
    MaxCut { n: usize, density: f64 },
    NormMin { p: usize, q: usize, m: usize },
}

/// Everything needed to regenerate an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub dims: Dims,
    pub seed: u64,
}

/// Sidecar metadata written next to generated SDPA files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub family: Family,
    pub dims: Dims,
    pub seed: u64,
    pub format_version: u32,
}

impl GeneratorSpec {
    pub fn random(n: usize, m: usize, seed: u64) -> Self {
        GeneratorSpec {
            family: Family::RandomSdp,
            dims: Dims::Random { n, m },
            seed,
        }
    }

    pub fn maxcut(n: usize, density: f64, seed: u64) -> Self {
        GeneratorSpec {
            family: Family::MaxCut,
            dims: Dims::MaxCut { n, density },
            seed,
        }
    }

    pub fn normmin(p: usize, q: usize, m: usize, seed: u64) -> Self {
        GeneratorSpec {
            family: Family::NormMin,
            dims: Dims::NormMin { p, q, m },
            seed,
        }
    }

    /// File stem such as `maxcut_n20_s7`.
    pub fn stem(&self) -> String {
        match self.dims {
            Dims::Random { n, m } => format!("rand_n{n}_m{m}_s{}", self.seed),
            Dims::MaxCut { n, .. } => format!("maxcut_n{n}_s{}", self.seed),
            Dims::NormMin { p, q, m } => format!("normmin_p{p}_q{q}_m{m}_s{}", self.seed),
        }
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            family: self.family,
            dims: self.dims,
            seed: self.seed,
            format_version: 1,
        }
    }

    pub fn generate(&self) -> Result<SdpProblem, GenError> {
        match (self.family, self.dims) {
            (Family::RandomSdp, Dims::Random { n, m }) => gen_random_sdp(n, m, self.seed).map(|(p, _)| p),
            (Family::MaxCut, Dims::MaxCut { n, density }) => gen_maxcut(n, density, self.seed),
            (Family::NormMin, Dims::NormMin { p, q, m }) => gen_normmin(p, q, m, self.seed).map(|(p, _)| p),
            _ => Err(GenError::InvalidDims(format!(
                "dimensions {:?} do not match family {}",
                self.dims,
                self.family.as_str()
            ))),
        }
    }
}

/// Random standard-form SDP with a strictly feasible primal-dual pair.
///
/// Constraint matrices have entries uniform in `[−1, 1]`. With
/// `X₀ = WWᵀ + 0.1 I`, `Z₀ = VVᵀ + 0.1 I` and `y₀` uniform, the data are set to
/// `b = 𝒜(X₀)` and `C = 𝒜*(y₀) + Z₀`. The returned triple is feasible but not
/// complementary.
pub fn gen_random_sdp(n: usize, m: usize, seed: u64) -> Result<(SdpProblem, PrimalDualTriple), GenError> {
    if n < 2 || m < 1 {
        return Err(GenError::InvalidDims(format!("random SDP needs n ≥ 2 and m ≥ 1 (got n = {n}, m = {m})")));
    }
    let mut rng = SeededRng::new(seed);
    let a: Vec<SymMatrix> = (0..m).map(|_| rng.symmetric(n, -1.0, 1.0)).collect();
    let shift = SymMatrix::identity(n).scale(0.1);
    let w = rng.matrix(n, n, -1.0, 1.0);
    let x0 = SymMatrix::new(&w * w.transpose()).add(&shift);
    let y0 = DVector::from_iterator(m, (0..m).map(|_| rng.uniform_in(-1.0, 1.0)));
    let v = rng.matrix(n, n, -1.0, 1.0);
    let z0 = SymMatrix::new(&v * v.transpose()).add(&shift);

    let b: Vec<f64> = a.iter().map(|aj| aj.dot(&x0)).collect();
    let mut c = z0.clone();
    for (aj, &yj) in a.iter().zip(y0.iter()) {
        c.axpy(yj, aj);
    }
    let p = SdpProblem::new(c, a, b).expect("generator dimensions are consistent");
    Ok((p, PrimalDualTriple::new(x0, y0, z0)))
}

/// SDP with a planted strictly complementary solution of rank `rank`:
/// `X* = diag(D, 0)` and `Z* = diag(0, W)` with `D`, `W` shifted Gram
/// matrices, random constraints, `b = 𝒜(X*)` and `C = 𝒜*(y*) + Z*`.
///
/// For generic data the solution is unique when
/// `rank(rank+1)/2 ≤ m ≤ n(n+1)/2 − (n−rank)(n−rank+1)/2`.
pub fn gen_planted(n: usize, rank: usize, m: usize, seed: u64) -> Result<(SdpProblem, PrimalDualTriple), GenError> {
    if rank == 0 || rank >= n || m == 0 {
        return Err(GenError::InvalidDims(format!(
            "planted SDP needs 1 ≤ rank < n and m ≥ 1 (got n = {n}, rank = {rank}, m = {m})"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let a: Vec<SymMatrix> = (0..m).map(|_| rng.symmetric(n, -1.0, 1.0)).collect();
    let w = rng.matrix(rank, rank, -1.0, 1.0);
    let v = rng.matrix(n - rank, n - rank, -1.0, 1.0);
    let mut x = DMatrix::zeros(n, n);
    x.view_mut((0, 0), (rank, rank))
        .copy_from(&(&w * w.transpose() + DMatrix::identity(rank, rank) * 0.5));
    let mut z = DMatrix::zeros(n, n);
    z.view_mut((rank, rank), (n - rank, n - rank))
        .copy_from(&(&v * v.transpose() + DMatrix::identity(n - rank, n - rank) * 0.5));
    let (x, z) = (SymMatrix::new(x), SymMatrix::new(z));
    let y = DVector::from_iterator(m, (0..m).map(|_| rng.uniform_in(-1.0, 1.0)));

    let b: Vec<f64> = a.iter().map(|aj| aj.dot(&x)).collect();
    let mut c = z.clone();
    for (aj, &yj) in a.iter().zip(y.iter()) {
        c.axpy(yj, aj);
    }
    let p = SdpProblem::new(c, a, b).expect("generator dimensions are consistent");
    Ok((p, PrimalDualTriple::new(x, y, z)))
}

/// Max-cut relaxation `min ¼⟨B − Diag(Be), X⟩ s.t. X_jj = 1, X ⪰ 0` for a
/// weighted adjacency matrix `B`.
pub fn maxcut_from_adjacency(b: &SymMatrix) -> SdpProblem {
    let n = b.order();
    let degrees: Vec<f64> = (0..n).map(|i| b.as_matrix().row(i).sum()).collect();
    let c = b.sub(&SymMatrix::from_diagonal(&degrees)).scale(0.25);
    let a = (0..n).map(|j| SymMatrix::unit(n, j, j)).collect();
    SdpProblem::new(c, a, vec![1.0; n]).expect("max-cut data are consistent")
}

/// Random graph on `n` vertices: each edge `i < j` is present with
/// probability `density` and then weighted uniformly in `[0, 1)`.
pub fn gen_maxcut(n: usize, density: f64, seed: u64) -> Result<SdpProblem, GenError> {
    if n < 2 {
        return Err(GenError::InvalidDims(format!("max-cut needs n ≥ 2 (got {n})")));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(GenError::InvalidDims(format!("density {density} outside [0, 1]")));
    }
    let mut rng = SeededRng::new(seed);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let present = rng.uniform() < density;
            let weight = rng.uniform();
            if present {
                b[(i, j)] = weight;
                b[(j, i)] = weight;
            }
        }
    }
    Ok(maxcut_from_adjacency(&SymMatrix::new(b)))
}

/// Data of a norm-minimization instance `min_z ‖B₀ + Σ z_k B_k‖₂`, `z ∈ ℂᵐ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormMinData {
    /// `B₀, B₁, …, B_m`, each `p×q`.
    pub b: Vec<DMatrix<f64>>,
}

impl NormMinData {
    pub fn m(&self) -> usize {
        self.b.len() - 1
    }

    /// Optimal norm from the objective of the generated primal problem.
    pub fn norm_from_objective(&self, objective: f64) -> f64 {
        -objective
    }

    /// Bound `t` from the multipliers (first constraint).
    pub fn t_from_multipliers(&self, mu: &DVector<f64>) -> f64 {
        mu[0]
    }

    /// Minimizer `z_k = x_k + i y_k` as `(re, im)` pairs.
    pub fn z_from_multipliers(&self, mu: &DVector<f64>) -> Vec<(f64, f64)> {
        let m = self.m();
        (0..m).map(|k| (mu[1 + k], mu[1 + m + k])).collect()
    }
}

/// `[[0, B], [Bᵀ, 0]]`
fn dilation(b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = b.shape();
    let mut out = DMatrix::zeros(p + q, p + q);
    out.view_mut((0, p), (p, q)).copy_from(b);
    out.view_mut((p, 0), (q, p)).copy_from(&b.transpose());
    out
}

/// Real embedding of the Hermitian `P + iQ`: `[[P, −Q], [Q, P]]`.
fn real_embedding(re: &DMatrix<f64>, im: &DMatrix<f64>) -> SymMatrix {
    let n = re.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(re);
    out.view_mut((n, n), (n, n)).copy_from(re);
    out.view_mut((0, n), (n, n)).copy_from(&(-im));
    out.view_mut((n, 0), (n, n)).copy_from(im);
    SymMatrix::new(out)
}

/// Norm-minimization instance in primal standard form.
///
/// The LMI `Σ x_k D(B_k) + Σ y_k D(iB_k) − tI ⪯ −D(B₀)` over Hermitian
/// dilations `D(B) = [[0, B], [B*, 0]]` is real-embedded (order `2(p+q)`) and
/// read as a dual-form SDP in `ỹ = (t, x, y)` maximizing `−t`. Its primal is
///
/// ```txt
///     min ⟨−D(B₀), X⟩  s.t.  ⟨−I, X⟩ = −1,  ⟨D(B_k), X⟩ = 0,  ⟨D(iB_k), X⟩ = 0
/// ```
///
/// with constraint order `t, x_1..x_m, y_1..y_m`; the optimal norm is the
/// negated optimal objective.
pub fn gen_normmin(p: usize, q: usize, m: usize, seed: u64) -> Result<(SdpProblem, NormMinData), GenError> {
    if p == 0 || q == 0 {
        return Err(GenError::InvalidDims(format!("norm-min needs p, q ≥ 1 (got p = {p}, q = {q})")));
    }
    let mut rng = SeededRng::new(seed);
    let b: Vec<DMatrix<f64>> = (0..=m).map(|_| rng.matrix(p, q, 0.0, 1.0)).collect();
    let data = NormMinData { b };
    Ok((normmin_problem(&data), data))
}

/// Primal standard form of a norm-minimization instance (see [`gen_normmin`]).
pub fn normmin_problem(data: &NormMinData) -> SdpProblem {
    let (p, q) = data.b[0].shape();
    let order = p + q;
    let zero = DMatrix::zeros(order, order);
    let c = real_embedding(&dilation(&data.b[0]), &zero).scale(-1.0);
    let mut a = vec![SymMatrix::identity(2 * order).scale(-1.0)];
    for bk in &data.b[1..] {
        a.push(real_embedding(&dilation(bk), &zero));
    }
    for bk in &data.b[1..] {
        // D(iB) = i [[0, B], [−Bᵀ, 0]]
        let mut skew = DMatrix::zeros(order, order);
        skew.view_mut((0, p), (p, q)).copy_from(bk);
        skew.view_mut((p, 0), (q, p)).copy_from(&(-bk.transpose()));
        a.push(real_embedding(&zero, &skew));
    }
    let mut rhs = vec![0.0; a.len()];
    rhs[0] = -1.0;
    SdpProblem::new(c, a, rhs).expect("norm-min data are consistent")
}
