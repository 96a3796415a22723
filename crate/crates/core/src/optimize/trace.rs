//! Objective-versus-time records of a fit, exportable as CSV.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// Exact objective.
    Exact,
    /// Sampled estimate of the objective.
    Estimated,
    /// Estimate of an epoch that was rolled back.
    BadEpoch,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Exact => "exact",
            TraceKind::Estimated => "estimated",
            TraceKind::BadEpoch => "bad-epoch",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(TraceKind::Exact),
            "estimated" => Ok(TraceKind::Estimated),
            "bad-epoch" => Ok(TraceKind::BadEpoch),
            other => Err(format!("unknown trace kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Iteration (L-BFGS-B) or epoch (Adam).
    pub index: usize,
    pub wall_seconds: f64,
    pub objective: f64,
    pub kind: TraceKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: &str = "epoch_or_iter,wall_seconds,objective,kind";

impl FitTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; timestamps never go backwards.
    pub fn push(&mut self, index: usize, wall_seconds: f64, objective: f64, kind: TraceKind) {
        let last = self.records.last().map_or(0.0, |r| r.wall_seconds);
        self.records.push(TraceRecord {
            index,
            wall_seconds: wall_seconds.max(last),
            objective,
            kind,
        });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Records of one kind.
    pub fn of_kind(&self, kind: TraceKind) -> impl Iterator<Item = &TraceRecord> + '_ {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{},{:e},{:e},{}", r.index, r.wall_seconds, r.objective, r.kind)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, path: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut trace = FitTrace::new();
        let mut lines = r.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == TRACE_HEADER => {}
            Some((_, Ok(h))) => return Err(parse_err(1, format!("expected header {TRACE_HEADER:?}, found {h:?}"))),
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => return Err(parse_err(1, "empty trace file".into())),
        }
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(parse_err(lineno, format!("expected 4 fields, found {}", fields.len())));
            }
            let index = fields[0]
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad index: {e}")))?;
            let wall_seconds = fields[1]
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad time: {e}")))?;
            let objective = fields[2]
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad objective: {e}")))?;
            let kind = fields[3].parse().map_err(|e| parse_err(lineno, e))?;
            trace.records.push(TraceRecord {
                index,
                wall_seconds,
                objective,
                kind,
            });
        }
        Ok(trace)
    }
}
