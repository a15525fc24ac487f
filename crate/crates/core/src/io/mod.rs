//! Plain-text file formats (gaze streams, calibration bundles, event logs,
//! session scripts, CSV tables) and binary PPM/PGM images.
//!
//! Reals are written with Rust's shortest round-trip formatting so that
//! `parse(serialize(x)) == x` bit for bit.

mod bundle;
mod events;
mod pnm;
mod stream;
mod tables;

pub use bundle::{format_bundle, parse_bundle, BundleFile, RegressionSection};
pub use events::{format_events, format_script, parse_events, parse_script, EventRecord};
pub use pnm::{read_pnm, write_pnm};
pub use stream::{format_stream, parse_stream};
pub use tables::{
    format_error_table, format_estimates, format_metrics, parse_error_table, parse_estimates,
    EstimateRow,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("missing or unsupported header (expected `{0}`)")]
    Header(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("truncated image data: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
}

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

pub(crate) fn invalid(line: usize, e: impl std::fmt::Display) -> FormatError {
    parse_err(line, e.to_string())
}

pub(crate) fn real(tok: &str, line: usize) -> Result<f64, FormatError> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("`{tok}` is not a number")))
}

/// Non-empty, non-comment lines with 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn expect_header(text: &str, header: &'static str) -> Result<(), FormatError> {
    match text.lines().next() {
        Some(first) if first.trim() == header => Ok(()),
        _ => Err(FormatError::Header(header)),
    }
}
