//! SDPA sparse (`.dat-s`) reader and writer.
//!
//! Multi-block input is densified into one block-diagonal matrix; negative
//! block sizes denote diagonal blocks. Entries are 1-based `matno blkno i j
//! value` with `i ≤ j`; matno 0 addresses `C` as stored (no sign change).
//! Repeated entries overwrite earlier ones. The writer always emits a single
//! block and the shortest decimal form that parses back to the same double.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::SymMatrix;
use crate::model::SdpProblem;

#[derive(Debug, Error)]
pub enum SdpaError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unexpected end of file: {0}")]
    Truncated(&'static str),
    #[error("invalid problem: {0}")]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> SdpaError {
    SdpaError::Parse {
        line,
        message: message.into(),
    }
}

fn is_comment(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('*') || t.starts_with('"')
}

fn header_tokens(line: &str) -> Vec<String> {
    line.replace([',', '(', ')', '{', '}'], " ")
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, SdpaError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

pub fn parse_sdpa(text: &str) -> Result<SdpProblem, SdpaError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !is_comment(l));

    let (ln, l) = lines.next().ok_or(SdpaError::Truncated("missing constraint count"))?;
    let tok = header_tokens(l);
    let m: usize = parse_num(tok.first().ok_or_else(|| parse_err(ln, "empty line"))?, ln, "m")?;

    let (ln, l) = lines.next().ok_or(SdpaError::Truncated("missing block count"))?;
    let tok = header_tokens(l);
    let nblocks: usize = parse_num(tok.first().ok_or_else(|| parse_err(ln, "empty line"))?, ln, "nblocks")?;
    if nblocks == 0 {
        return Err(parse_err(ln, "block count must be positive"));
    }

    let mut sizes: Vec<i64> = Vec::with_capacity(nblocks);
    while sizes.len() < nblocks {
        let (ln, l) = lines.next().ok_or(SdpaError::Truncated("missing block sizes"))?;
        for t in header_tokens(l) {
            if sizes.len() == nblocks {
                return Err(parse_err(ln, "too many block sizes"));
            }
            let s: i64 = parse_num(&t, ln, "block size")?;
            if s == 0 {
                return Err(parse_err(ln, "block size must be nonzero"));
            }
            sizes.push(s);
        }
    }

    let mut b: Vec<f64> = Vec::with_capacity(m);
    while b.len() < m {
        let (ln, l) = lines.next().ok_or(SdpaError::Truncated("missing right-hand side"))?;
        for t in header_tokens(l) {
            if b.len() == m {
                return Err(parse_err(ln, "too many right-hand side values"));
            }
            b.push(parse_num(&t, ln, "b value")?);
        }
    }

    let mut offsets = Vec::with_capacity(nblocks);
    let mut n = 0usize;
    for &s in &sizes {
        offsets.push(n);
        n += s.unsigned_abs() as usize;
    }
    let mut mats = vec![DMatrix::<f64>::zeros(n, n); m + 1];

    for (ln, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 5 {
            return Err(parse_err(ln, format!("expected 5 fields, found {}", f.len())));
        }
        let matno: usize = parse_num(f[0], ln, "matrix number")?;
        let blk: usize = parse_num(f[1], ln, "block number")?;
        let i: usize = parse_num(f[2], ln, "row index")?;
        let j: usize = parse_num(f[3], ln, "column index")?;
        let v: f64 = parse_num(f[4], ln, "value")?;
        if matno > m {
            return Err(parse_err(ln, format!("matrix number {matno} exceeds m = {m}")));
        }
        if blk == 0 || blk > nblocks {
            return Err(parse_err(ln, format!("block {blk} out of range 1..={nblocks}")));
        }
        let size = sizes[blk - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > size || j > size {
            return Err(parse_err(ln, format!("index ({i}, {j}) outside block of size {size}")));
        }
        if i > j {
            return Err(parse_err(ln, format!("entry ({i}, {j}) below the diagonal")));
        }
        if sizes[blk - 1] < 0 && i != j {
            return Err(parse_err(ln, format!("off-diagonal entry ({i}, {j}) in diagonal block")));
        }
        let (r, c) = (offsets[blk - 1] + i - 1, offsets[blk - 1] + j - 1);
        mats[matno][(r, c)] = v;
        mats[matno][(c, r)] = v;
    }

    let mut it = mats.into_iter().map(SymMatrix::new);
    let c = it.next().expect("C is always present");
    Ok(SdpProblem::new(c, it.collect(), b)?)
}

pub fn to_sdpa_string(p: &SdpProblem) -> String {
    let n = p.n();
    let mut out = String::new();
    let _ = writeln!(out, "{}", p.m());
    let _ = writeln!(out, "1");
    let _ = writeln!(out, "{n}");
    let b: Vec<String> = p.b().iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(out, "{}", b.join(" "));
    for (k, mat) in std::iter::once(p.c()).chain(p.a().iter()).enumerate() {
        for i in 0..n {
            for j in i..n {
                let v = mat.get(i, j);
                if v != 0.0 {
                    let _ = writeln!(out, "{k} 1 {} {} {v:e}", i + 1, j + 1);
                }
            }
        }
    }
    out
}

pub fn read_sdpa(path: impl AsRef<Path>) -> Result<SdpProblem, SdpaError> {
    parse_sdpa(&std::fs::read_to_string(path)?)
}

pub fn write_sdpa(p: &SdpProblem, path: impl AsRef<Path>) -> Result<(), SdpaError> {
    std::fs::write(path, to_sdpa_string(p))?;
    Ok(())
}
