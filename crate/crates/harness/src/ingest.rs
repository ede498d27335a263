//! Distribution file ingestion.
//!
//! Grammar (UTF-8, LF line endings, `#` starts a comment):
//!
//! ```text
//! space <size>
//! unsafe <space-separated indices>
//! model <id> <size probabilities as decimals>
//! model <id> ...
//! ```
//!
//! Rows must sum to 1 within 1e-6 and are renormalized exactly on load.

use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use rcs_core::scalar::{sum, Scalar};
use rcs_core::{Dist64, ExactDist, FiniteDistribution, OutputSpace, INGEST_TOL};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error at line {line} (model {id}): {message}")]
    Validation {
        line: usize,
        id: String,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct Ingested<T> {
    pub space: OutputSpace,
    pub models: Vec<FiniteDistribution<T>>,
    pub ids: Vec<String>,
}

pub fn ingest_distributions(path: impl AsRef<Path>) -> Result<Ingested<f64>, IngestError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|source| IngestError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })?;
    parse_distributions(&text)
}

/// Parses with `f64` probabilities (simulation path).
pub fn parse_distributions(text: &str) -> Result<Ingested<f64>, IngestError> {
    parse_with(text, |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
}

/// Parses with exact rational probabilities (enumeration path).
pub fn parse_distributions_exact(text: &str) -> Result<Ingested<BigRational>, IngestError> {
    let _: &ExactDist; // alias kept in sync with this return type
    parse_with(text, parse_decimal_rational)
}

/// Exact rational value of a plain decimal literal like `0.25` or `1`.
pub fn parse_decimal_rational(s: &str) -> Option<BigRational> {
    if s.is_empty() || s.contains(['e', 'E', '+', '-']) {
        return None;
    }
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(BigRational::new(numer, denom))
}

fn parse_with<T: Scalar>(
    text: &str,
    parse_prob: impl Fn(&str) -> Option<T>,
) -> Result<Ingested<T>, IngestError> {
    let parse_err = |line: usize, message: String| IngestError::Parse { line, message };

    // LF-only is part of the grammar; `str::lines` would silently accept
    // CRLF, so scan the raw text first.
    if let Some(pos) = text.find('\r') {
        let line = text[..pos].matches('\n').count() + 1;
        return Err(parse_err(
            line,
            "carriage return found; LF line endings required".into(),
        ));
    }

    // Logical lines: comment-stripped, non-blank, with original numbering.
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = stripped.trim();
        if !trimmed.is_empty() {
            lines.push((line_no, trimmed));
        }
    }

    let mut iter = lines.into_iter();

    let (space_line, space_text) = iter
        .next()
        .ok_or_else(|| parse_err(0, "empty file".into()))?;
    let mut tokens = space_text.split_whitespace();
    if tokens.next() != Some("space") {
        return Err(parse_err(space_line, "expected `space <size>`".into()));
    }
    let size: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .filter(|s| *s > 0)
        .ok_or_else(|| parse_err(space_line, "invalid space size".into()))?;
    if tokens.next().is_some() {
        return Err(parse_err(space_line, "trailing tokens after size".into()));
    }

    let (unsafe_line, unsafe_text) = iter
        .next()
        .ok_or_else(|| parse_err(space_line, "missing `unsafe` line".into()))?;
    let mut tokens = unsafe_text.split_whitespace();
    if tokens.next() != Some("unsafe") {
        return Err(parse_err(unsafe_line, "expected `unsafe <indices>`".into()));
    }
    let mut unsafe_indices = Vec::new();
    for tok in tokens {
        let idx: usize = tok
            .parse()
            .map_err(|_| parse_err(unsafe_line, format!("bad index {tok:?}")))?;
        unsafe_indices.push(idx);
    }
    let space = OutputSpace::new(size, unsafe_indices)
        .map_err(|e| parse_err(unsafe_line, format!("bad partition: {e}")))?;

    let mut models = Vec::new();
    let mut ids = Vec::new();
    for (line_no, line) in iter {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("model") {
            return Err(parse_err(
                line_no,
                format!("expected `model <id> <probs>`, got {line:?}"),
            ));
        }
        let id = tokens
            .next()
            .ok_or_else(|| parse_err(line_no, "missing model id".into()))?
            .to_string();
        let mut probs: Vec<T> = Vec::with_capacity(size);
        for tok in tokens {
            let p = parse_prob(tok)
                .ok_or_else(|| parse_err(line_no, format!("bad probability {tok:?}")))?;
            probs.push(p);
        }
        if probs.len() != size {
            return Err(parse_err(
                line_no,
                format!("expected {size} probabilities, got {}", probs.len()),
            ));
        }
        let validation = |message: String| IngestError::Validation {
            line: line_no,
            id: id.clone(),
            message,
        };
        if let Some(bad) = probs.iter().position(|p| *p < T::zero()) {
            return Err(validation(format!("negative probability at index {bad}")));
        }
        let total = sum(&probs);
        if total.is_zero() {
            return Err(validation("row has zero total mass".into()));
        }
        if total.abs_diff(&T::one()) > T::from_float(INGEST_TOL) {
            return Err(validation(format!(
                "probabilities sum to {}, expected 1 within {INGEST_TOL}",
                total.as_f64()
            )));
        }
        let normalized: Vec<T> = probs.into_iter().map(|p| p / total.clone()).collect();
        let dist = FiniteDistribution::new(normalized)
            .map_err(|e| validation(e.to_string()))?;
        models.push(dist);
        ids.push(id);
    }
    if models.is_empty() {
        return Err(parse_err(unsafe_line, "no model rows".into()));
    }
    Ok(Ingested { space, models, ids })
}

/// Renders a space and models back into the file grammar; used by tools
/// that need to hand a parsed instance to another subcommand.
pub fn to_file_format(space: &OutputSpace, models: &[Dist64], ids: &[String]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "space {}", space.size()).unwrap();
    let unsafe_list: Vec<String> = space.unsafe_set().iter().map(|i| i.to_string()).collect();
    writeln!(out, "unsafe {}", unsafe_list.join(" ")).unwrap();
    for (id, m) in ids.iter().zip(models) {
        let row: Vec<String> = m.probs().iter().map(|p| format!("{p}")).collect();
        writeln!(out, "model {} {}", id, row.join(" ")).unwrap();
    }
    out
}
