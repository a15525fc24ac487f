use std::fmt::Write;

use super::{data_lines, expect_header, invalid, parse_err, real, FormatError};
use crate::geometry::Vec3;
use crate::simulation::{GazeSample, GazeStream, PupilSamplePair};

pub const STREAM_HEADER: &str = "# vergekit-stream v1";
const COLUMNS: usize = 15;

/// One line per sample: `t plx ply plz prx pry prz uxl uyl uxr uyr fx fy fz d`.
/// Missing truth is written as `-`.
pub fn format_stream(stream: &GazeStream) -> String {
    let mut out = String::new();
    out.push_str(STREAM_HEADER);
    out.push('\n');
    out.push_str("# units: t s; pupils m (head frame); pixels px; fixation m; depth m\n");
    out.push_str("# t p_left.x p_left.y p_left.z p_right.x p_right.y p_right.z px_left.u px_left.v px_right.u px_right.v fix.x fix.y fix.z depth\n");
    for s in stream.samples() {
        let p = &s.pair;
        write!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {}",
            p.timestamp,
            p.p_left.x,
            p.p_left.y,
            p.p_left.z,
            p.p_right.x,
            p.p_right.y,
            p.p_right.z,
            p.px_left[0],
            p.px_left[1],
            p.px_right[0],
            p.px_right[1]
        )
        .unwrap();
        match s.truth_fixation {
            Some(f) => write!(out, " {} {} {}", f.x, f.y, f.z).unwrap(),
            None => out.push_str(" - - -"),
        }
        match s.truth_depth {
            Some(d) => write!(out, " {d}").unwrap(),
            None => out.push_str(" -"),
        }
        out.push('\n');
    }
    out
}

pub fn parse_stream(text: &str) -> Result<GazeStream, FormatError> {
    expect_header(text, STREAM_HEADER)?;
    let mut samples = Vec::new();
    for (line, l) in data_lines(text) {
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() != COLUMNS {
            return Err(parse_err(line, format!("expected {COLUMNS} columns, found {}", tok.len())));
        }
        let v = |i: usize| real(tok[i], line);
        let opt = |i: usize| if tok[i] == "-" { Ok(None) } else { real(tok[i], line).map(Some) };
        let pair = PupilSamplePair {
            timestamp: v(0)?,
            p_left: Vec3::new(v(1)?, v(2)?, v(3)?),
            p_right: Vec3::new(v(4)?, v(5)?, v(6)?),
            px_left: [v(7)?, v(8)?],
            px_right: [v(9)?, v(10)?],
        };
        let fix = match (opt(11)?, opt(12)?, opt(13)?) {
            (Some(x), Some(y), Some(z)) => Some(Vec3::new(x, y, z)),
            (None, None, None) => None,
            _ => return Err(parse_err(line, "fixation must be fully present or fully missing")),
        };
        samples.push(GazeSample {
            pair,
            truth_fixation: fix,
            truth_depth: opt(14)?,
        });
    }
    GazeStream::new(samples).map_err(|e| invalid(0, e))
}
