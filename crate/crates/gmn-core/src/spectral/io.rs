//! `.gmnspec` text format for spectral caches.
//!
//! Header `GMNSPEC v1 n=<n> d=<d> norm=<tag> skipzero=<0|1>`, one line of
//! eigenvalues, then n rows of P. 17 significant digits throughout. The pad
//! count is recovered from trailing all-zero columns; solver provenance and
//! residuals are not persisted.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Normalization, SolverTag, SpectralCache, SpectralError};
use crate::scalar::Scalar;

pub fn write_cache<T: Scalar>(cache: &SpectralCache<T>, path: &Path) -> Result<(), SpectralError> {
    fs::write(path, format_cache(cache))?;
    Ok(())
}

pub fn read_cache<T: Scalar>(path: &Path) -> Result<SpectralCache<T>, SpectralError> {
    let text = fs::read_to_string(path)?;
    parse_cache(&text)
}

pub(crate) fn format_cache<T: Scalar>(cache: &SpectralCache<T>) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "GMNSPEC v1 n={} d={} norm={} skipzero={}",
        cache.n,
        cache.d,
        cache.normalization.as_str(),
        u8::from(cache.skip_zero)
    )
    .unwrap();
    push_row(&mut out, &cache.eigenvalues);
    for u in 0..cache.n {
        push_row(&mut out, cache.row(u));
    }
    out
}

fn push_row<T: Scalar>(out: &mut String, row: &[T]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{:.16e}", v.as_f64()).unwrap();
    }
    out.push('\n');
}

pub(crate) fn parse_cache<T: Scalar>(text: &str) -> Result<SpectralCache<T>, SpectralError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("GMNSPEC") {
        return Err(err(1, "missing GMNSPEC magic"));
    }
    let version = fields.next().unwrap_or("");
    if version != "v1" {
        return Err(SpectralError::VersionMismatch { found: version.to_string() });
    }
    let mut n = None;
    let mut d = None;
    let mut norm = None;
    let mut skip_zero = None;
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(1, &format!("malformed header field '{field}'")))?;
        match key {
            "n" => n = Some(value.parse().map_err(|_| err(1, "bad n"))?),
            "d" => d = Some(value.parse().map_err(|_| err(1, "bad d"))?),
            "norm" => {
                norm = Some(
                    Normalization::parse(value)
                        .ok_or_else(|| err(1, &format!("unknown norm '{value}'")))?,
                )
            }
            "skipzero" => {
                skip_zero = Some(match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(err(1, "skipzero must be 0 or 1")),
                })
            }
            other => return Err(err(1, &format!("unknown header key '{other}'"))),
        }
    }
    let n: usize = n.ok_or_else(|| err(1, "header missing n"))?;
    let d: usize = d.ok_or_else(|| err(1, "header missing d"))?;
    let norm = norm.ok_or_else(|| err(1, "header missing norm"))?;
    let skip_zero = skip_zero.ok_or_else(|| err(1, "header missing skipzero"))?;

    let (idx, line) = lines.next().ok_or_else(|| err(0, "missing eigenvalue line"))?;
    let eigenvalues = parse_row::<T>(line, idx + 1, d)?;
    let mut vectors = Vec::with_capacity(n * d);
    for _ in 0..n {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| err(0, "file truncated inside eigenvector rows"))?;
        vectors.extend(parse_row::<T>(line, idx + 1, d)?);
    }

    // Trailing all-zero columns with zero eigenvalue are padding.
    let mut pad_count = 0;
    for j in (0..d).rev() {
        let zero_col = (0..n).all(|u| vectors[u * d + j] == T::zero());
        if zero_col && eigenvalues[j] == T::zero() {
            pad_count += 1;
        } else {
            break;
        }
    }
    Ok(SpectralCache {
        n,
        d,
        eigenvalues,
        vectors,
        normalization: norm,
        skip_zero,
        solver: SolverTag::File,
        residual: None,
        pad_count,
    })
}

fn parse_row<T: Scalar>(line: &str, lineno: usize, expected: usize) -> Result<Vec<T>, SpectralError> {
    let mut row = Vec::with_capacity(expected);
    for tok in line.split_whitespace() {
        let v: f64 = tok
            .parse()
            .map_err(|_| err(lineno, &format!("bad float '{tok}'")))?;
        row.push(T::from_f64(v));
    }
    if row.len() != expected {
        return Err(err(lineno, &format!("expected {expected} values, got {}", row.len())));
    }
    Ok(row)
}

fn err(line: usize, msg: &str) -> SpectralError {
    SpectralError::ParseError { line, msg: msg.to_string() }
}
