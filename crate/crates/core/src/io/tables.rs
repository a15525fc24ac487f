use std::fmt::Write;

use super::{parse_err, real, FormatError};
use crate::eval::{ErrorBin, ErrorTable, SessionMetrics};

const ESTIMATES_HEADER: &str = "t,depth,method,source,fallback,truth";

/// One row of an estimates CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub t: f64,
    pub depth: f64,
    pub method: String,
    pub source: String,
    pub fallback: bool,
    pub truth: Option<f64>,
}

pub fn format_estimates(rows: &[EstimateRow]) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for r in rows {
        write!(out, "{},{},{},{},{},", r.t, r.depth, r.method, r.source, r.fallback as u8).unwrap();
        match r.truth {
            Some(d) => writeln!(out, "{d}").unwrap(),
            None => out.push_str("-\n"),
        }
    }
    out
}

pub fn parse_estimates(text: &str) -> Result<Vec<EstimateRow>, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == ESTIMATES_HEADER => {}
        _ => return Err(FormatError::Header(ESTIMATES_HEADER)),
    }
    let mut rows = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 6 {
            return Err(parse_err(line, "expected 6 comma-separated fields"));
        }
        rows.push(EstimateRow {
            t: real(f[0], line)?,
            depth: real(f[1], line)?,
            method: f[2].to_string(),
            source: f[3].to_string(),
            fallback: match f[4] {
                "0" => false,
                "1" => true,
                _ => return Err(parse_err(line, "fallback must be 0 or 1")),
            },
            truth: if f[5] == "-" { None } else { Some(real(f[5], line)?) },
        });
    }
    Ok(rows)
}

pub fn format_error_table(t: &ErrorTable) -> String {
    let mut out = String::from("lo,hi,mean,std,n\n");
    for b in &t.bins {
        writeln!(out, "{},{},{},{},{}", b.lo, b.hi, b.mean, b.std, b.n).unwrap();
    }
    out
}

pub fn parse_error_table(text: &str) -> Result<ErrorTable, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "lo,hi,mean,std,n" => {}
        _ => return Err(FormatError::Header("lo,hi,mean,std,n")),
    }
    let mut bins = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        if l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.trim().split(',').collect();
        if f.len() != 5 {
            return Err(parse_err(line, "expected 5 fields"));
        }
        bins.push(ErrorBin {
            lo: real(f[0], line)?,
            hi: real(f[1], line)?,
            mean: real(f[2], line)?,
            std: real(f[3], line)?,
            n: f[4].parse().map_err(|_| parse_err(line, "bad count"))?,
        });
    }
    Ok(ErrorTable { bins })
}

/// Per-command rows followed by a `total` row.
pub fn format_metrics(m: &SessionMetrics) -> String {
    let mut out = String::from("issue_time,command,completion,mistakes\n");
    for o in &m.outcomes {
        write!(out, "{},{},", o.issue_time, o.command).unwrap();
        match o.completion {
            Some(c) => write!(out, "{c}").unwrap(),
            None => out.push('-'),
        }
        writeln!(out, ",{}", o.mistakes).unwrap();
    }
    writeln!(out, "# successes,{}", m.successes).unwrap();
    writeln!(out, "# mistakes,{}", m.mistakes).unwrap();
    out
}
