//! Text formats for batch event logs, continuous flows and λ reports.
//!
//! Event log: one `time,mass,from,to` record per line, an optional header
//! line, `#` comments and blank lines ignored.
//!
//! Flow file: each flow starts with a `flow <from> <to>` line followed by one
//! `time,rate` sample per line (commas or whitespace).
//!
//! λ report: CSV with a `t,lambda` header, preceded by `#` comment lines.

use super::{ContinuousFlow, FlowEvent};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError { line, message: message.into() }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect()
}

fn number(line: usize, name: &str, raw: &str) -> Result<f64, FormatError> {
    raw.parse::<f64>()
        .map_err(|_| err(line, format!("{name}: cannot parse '{raw}' as a number")))
}

fn index(line: usize, name: &str, raw: &str) -> Result<u32, FormatError> {
    raw.parse::<u32>()
        .map_err(|_| err(line, format!("{name}: cannot parse '{raw}' as a compartment identifier")))
}

pub fn parse_event_log(text: &str) -> Result<Vec<FlowEvent>, FormatError> {
    let mut events = Vec::new();
    for (n, (line, raw)) in content_lines(text).enumerate() {
        if n == 0 && raw.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        let f = fields(raw);
        if f.len() != 4 {
            return Err(err(line, format!("expected 4 fields (time, mass, from, to), found {}", f.len())));
        }
        let event = FlowEvent::new(
            number(line, "time", f[0])?,
            number(line, "mass", f[1])?,
            index(line, "from", f[2])?,
            index(line, "to", f[3])?,
        )
        .map_err(|e| err(line, e.to_string()))?;
        events.push(event);
    }
    Ok(events)
}

pub fn write_event_log(events: &[FlowEvent]) -> String {
    let mut out = String::from("time,mass,from,to\n");
    for e in events {
        let _ = writeln!(out, "{},{},{},{}", e.time, e.mass, e.from, e.to);
    }
    out
}

pub fn parse_flow_file(text: &str) -> Result<Vec<ContinuousFlow>, FormatError> {
    struct Pending {
        line: usize,
        from: u32,
        to: u32,
        samples: Vec<(f64, f64)>,
    }
    fn finish(p: Pending) -> Result<ContinuousFlow, FormatError> {
        ContinuousFlow::new(p.from, p.to, p.samples).map_err(|e| err(p.line, e.to_string()))
    }

    let mut flows = Vec::new();
    let mut current: Option<Pending> = None;
    for (line, raw) in content_lines(text) {
        let f = fields(raw);
        if f.first() == Some(&"flow") {
            if f.len() != 3 {
                return Err(err(line, "flow header must be 'flow <from> <to>'"));
            }
            if let Some(p) = current.take() {
                flows.push(finish(p)?);
            }
            current = Some(Pending {
                line,
                from: index(line, "from", f[1])?,
                to: index(line, "to", f[2])?,
                samples: Vec::new(),
            });
            continue;
        }
        let Some(p) = current.as_mut() else {
            return Err(err(line, "sample before any 'flow <from> <to>' header"));
        };
        if f.len() != 2 {
            return Err(err(line, format!("expected 2 fields (time, rate), found {}", f.len())));
        }
        p.samples.push((number(line, "time", f[0])?, number(line, "rate", f[1])?));
    }
    if let Some(p) = current.take() {
        flows.push(finish(p)?);
    }
    Ok(flows)
}

pub fn write_flow_file(flows: &[ContinuousFlow]) -> String {
    let mut out = String::new();
    for f in flows {
        let _ = writeln!(out, "flow {} {}", f.from, f.to);
        for (t, r) in f.samples() {
            let _ = writeln!(out, "{t},{r}");
        }
    }
    out
}

/// Reads one column of a trajectory CSV (as written by the environments'
/// trajectory export) as a continuous flow, using `time_column` for the
/// sample times.
pub fn parse_trajectory_flow(
    text: &str,
    time_column: &str,
    rate_column: &str,
    from: u32,
    to: u32,
) -> Result<ContinuousFlow, FormatError> {
    let mut lines = content_lines(text);
    let Some((header_line, header)) = lines.next() else {
        return Err(err(1, "empty trajectory file"));
    };
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let position = |name: &str| {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| err(header_line, format!("no column named '{name}'")))
    };
    let (t_col, r_col) = (position(time_column)?, position(rate_column)?);

    let mut samples = Vec::new();
    let mut last_line = header_line;
    for (line, raw) in lines {
        let f: Vec<&str> = raw.split(',').map(str::trim).collect();
        if f.len() != names.len() {
            return Err(err(line, format!("expected {} fields, found {}", names.len(), f.len())));
        }
        samples.push((number(line, time_column, f[t_col])?, number(line, rate_column, f[r_col])?));
        last_line = line;
    }
    ContinuousFlow::new(from, to, samples).map_err(|e| err(last_line, e.to_string()))
}

pub fn write_lambda_csv(comments: &[String], rows: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for c in comments {
        for l in c.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    out.push_str("t,lambda\n");
    for (t, l) in rows {
        let _ = writeln!(out, "{t},{l}");
    }
    out
}
