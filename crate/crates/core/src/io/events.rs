use std::fmt::Write;

use super::{data_lines, expect_header, invalid, parse_err, real, FormatError};
use crate::control::{EventKind, TimedEvent, WindowDepth};
use crate::eval::{Command, SessionScript};
use crate::geometry::Vec3;

pub const EVENTS_HEADER: &str = "# vergekit-events v1";
pub const SCRIPT_HEADER: &str = "# vergekit-script v1";

/// Parsed event-log line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventRecord {
    Event {
        t: f64,
        kind: EventKind,
        phi: f64,
        gamma: WindowDepth,
        pose: Option<Vec3>,
        layer: Option<usize>,
    },
    Stimulus {
        t: f64,
        position: Vec3,
        edge: f64,
        alpha: f64,
    },
}

impl EventRecord {
    pub fn event(&self) -> Option<(f64, EventKind)> {
        match *self {
            EventRecord::Event { t, kind, .. } => Some((t, kind)),
            EventRecord::Stimulus { .. } => None,
        }
    }
}

/// Writes transitions (and, with `all`, every no-change step) plus any
/// stimulus records.
pub fn format_events(log: &[TimedEvent], all: bool) -> String {
    let mut out = String::new();
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    out.push_str("# event t kind phi gamma pose.x pose.y pose.z layer\n");
    out.push_str("# stimulus t x y z edge alpha\n");
    for rec in log {
        let e = &rec.event;
        if all || e.kind != EventKind::NoChange {
            write!(out, "event {} {} {}", rec.t, e.kind.as_str(), rec.phi).unwrap();
            match e.gamma {
                WindowDepth::Open(g) => write!(out, " {g}").unwrap(),
                WindowDepth::Closed => out.push_str(" closed"),
            }
            match e.window_pose {
                Some(p) => write!(out, " {} {} {}", p.x, p.y, p.z).unwrap(),
                None => out.push_str(" - - -"),
            }
            match e.layer {
                Some(l) => writeln!(out, " {l}").unwrap(),
                None => out.push_str(" -\n"),
            }
        }
        if let Some(s) = rec.stimulus {
            writeln!(
                out,
                "stimulus {} {} {} {} {} {}",
                rec.t, s.position.x, s.position.y, s.position.z, s.edge, s.alpha
            )
            .unwrap();
        }
    }
    out
}

pub fn parse_events(text: &str) -> Result<Vec<EventRecord>, FormatError> {
    expect_header(text, EVENTS_HEADER)?;
    let mut out = Vec::new();
    for (line, l) in data_lines(text) {
        let tok: Vec<&str> = l.split_whitespace().collect();
        let rec = match tok[0] {
            "event" if tok.len() == 9 => {
                let kind: EventKind = tok[2].parse().map_err(|e: String| parse_err(line, e))?;
                let gamma = if tok[4] == "closed" {
                    WindowDepth::Closed
                } else {
                    WindowDepth::Open(real(tok[4], line)?)
                };
                let pose = if tok[5] == "-" {
                    None
                } else {
                    Some(Vec3::new(real(tok[5], line)?, real(tok[6], line)?, real(tok[7], line)?))
                };
                let layer = if tok[8] == "-" {
                    None
                } else {
                    Some(tok[8].parse().map_err(|_| parse_err(line, "bad layer index"))?)
                };
                EventRecord::Event {
                    t: real(tok[1], line)?,
                    kind,
                    phi: real(tok[3], line)?,
                    gamma,
                    pose,
                    layer,
                }
            }
            "stimulus" if tok.len() == 7 => EventRecord::Stimulus {
                t: real(tok[1], line)?,
                position: Vec3::new(real(tok[2], line)?, real(tok[3], line)?, real(tok[4], line)?),
                edge: real(tok[5], line)?,
                alpha: real(tok[6], line)?,
            },
            _ => return Err(parse_err(line, "malformed event record")),
        };
        out.push(rec);
    }
    Ok(out)
}

pub fn format_script(s: &SessionScript) -> String {
    let mut out = String::new();
    out.push_str(SCRIPT_HEADER);
    out.push('\n');
    writeln!(out, "timeout {}", s.timeout).unwrap();
    writeln!(out, "waiting {}", s.waiting_duration).unwrap();
    for (t, c) in &s.commands {
        writeln!(out, "command {t} {c}").unwrap();
    }
    out
}

pub fn parse_script(text: &str) -> Result<SessionScript, FormatError> {
    expect_header(text, SCRIPT_HEADER)?;
    let mut commands = Vec::new();
    let mut timeout = 10.0;
    let mut waiting = 5.0;
    for (line, l) in data_lines(text) {
        let tok: Vec<&str> = l.split_whitespace().collect();
        match (tok[0], tok.len()) {
            ("timeout", 2) => timeout = real(tok[1], line)?,
            ("waiting", 2) => waiting = real(tok[1], line)?,
            ("command", 3) => {
                let c: Command = tok[2].parse().map_err(|e: String| parse_err(line, e))?;
                commands.push((real(tok[1], line)?, c));
            }
            _ => return Err(parse_err(line, "malformed script record")),
        }
    }
    let s = SessionScript {
        commands,
        timeout,
        waiting_duration: waiting,
    };
    s.validate().map_err(|e| invalid(0, e))?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{run_control, ControlConfig, ControlInput, ControlMode};
    use crate::geometry::Ray;

    fn log(mode: ControlMode) -> Vec<TimedEvent> {
        let c = ControlConfig {
            mode,
            ..ControlConfig::new(1.0, 0.3).unwrap()
        };
        let gaze = Ray::new(Vec3::zeros(), Vec3::new(0.1, 0.0, 1.0)).unwrap();
        let inputs: Vec<_> = (0..300)
            .map(|i| {
                let t = i as f64 / 30.0;
                ControlInput {
                    t,
                    depth: if (3.0..6.0).contains(&t) { 1.6 } else { 1.0 },
                    gaze,
                    eye_mid: Vec3::zeros(),
                }
            })
            .collect();
        run_control(&inputs, &c).unwrap()
    }

    #[test]
    fn events_round_trip_and_filter() {
        let l = log(ControlMode::StimulusGuided);
        let recs = parse_events(&format_events(&l, false)).unwrap();
        let events: Vec<_> = recs.iter().filter_map(|r| r.event()).collect();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].1, EventKind::Opened);
        assert!(recs.iter().any(|r| matches!(r, EventRecord::Stimulus { .. })));
        let all = parse_events(&format_events(&l, true)).unwrap();
        assert_eq!(all.iter().filter(|r| r.event().is_some()).count(), 300);
        for (r, e) in all.iter().filter_map(|r| match r {
            EventRecord::Event { t, gamma, pose, .. } => Some((t, gamma, pose)),
            _ => None,
        }).zip(&l) {
            assert_eq!((*r.0, *r.1, *r.2), (e.t, e.event.gamma, e.event.window_pose));
        }
    }

    #[test]
    fn self_control_logs_no_stimulus() {
        let recs = parse_events(&format_events(&log(ControlMode::SelfControl), true)).unwrap();
        assert!(recs.iter().all(|r| !matches!(r, EventRecord::Stimulus { .. })));
    }

    #[test]
    fn script_round_trip() {
        let s = SessionScript::alternating(2.0, 15.5, 3).unwrap();
        assert_eq!(parse_script(&format_script(&s)).unwrap(), s);
        assert!(parse_script(&format!("{SCRIPT_HEADER}\ncommand 1 fly\n")).is_err());
        assert!(parse_script(&format!("{SCRIPT_HEADER}\ncommand 2 see_wall\ncommand 1 see_wall\n")).is_err());
    }
}
