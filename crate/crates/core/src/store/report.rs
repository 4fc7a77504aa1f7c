//! Tabular reports as CSV or JSON.

use std::io::Write;
use std::str::FromStr;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};

use super::{Result, StoreError};
use crate::stats::{self, BenfordModel, StatsState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportKind {
    /// Digit counts of the final state against `N·P(d)`.
    Counts,
    /// Waiting-time histograms of the final state against the geometric law.
    Waits,
    /// Overlapping tuple frequencies of the final state.
    Tuples,
    /// Tuple TVD at each snapshot.
    Tvd,
    /// The counts report at each snapshot.
    Zscore,
}

impl FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "counts" => ReportKind::Counts,
            "waits" => ReportKind::Waits,
            "tuples" => ReportKind::Tuples,
            "tvd" => ReportKind::Tvd,
            "zscore" | "zscore-trajectory" => ReportKind::Zscore,
            _ => return Err(format!("unknown report {s:?}")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    /// Fixed, six digits after the point.
    Real(f64),
    /// Scientific, six digits after the point.
    Sci(f64),
    Text(String),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.6}"),
            Cell::Sci(v) => format!("{v:.6e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Real(v) | Cell::Sci(v) if v.is_finite() => {
                serde_json::Number::from_str(&self.text())
                    .map_err(serde::ser::Error::custom)?
                    .serialize(s)
            }
            Cell::Real(_) | Cell::Sci(_) => s.serialize_none(),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

struct Row<'a>(&'a [&'static str], &'a [Cell]);

impl Serialize for Row<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl Serialize for Report {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.rows.len()))?;
        for r in &self.rows {
            seq.serialize_element(&Row(&self.columns, r))?;
        }
        seq.end()
    }
}

fn stats_err(e: stats::StatsError) -> StoreError {
    StoreError::Report(e.to_string())
}

/// Builds a report from snapshots of one stream taken at increasing
/// lengths; single-state reports use the last snapshot. `digit` restricts
/// per-digit reports to one digit.
pub fn build_report(
    kind: ReportKind,
    snapshots: &[StatsState],
    model: &BenfordModel,
    digit: Option<u32>,
) -> Result<Report> {
    let last = snapshots
        .last()
        .ok_or_else(|| StoreError::Report("no statistics to report".into()))?;
    if snapshots.iter().any(|s| s.base() != model.base()) {
        return Err(StoreError::Report(
            "model and statistics bases differ".into(),
        ));
    }
    let base = model.base();
    if let Some(d) = digit {
        if d == 0 || d >= base {
            return Err(StoreError::Report(format!("digit {d} outside 1..{base}")));
        }
    }
    let digits: Vec<u32> = match digit {
        Some(d) => vec![d],
        None => (1..base).collect(),
    };
    let mut rows = Vec::new();
    let columns = match kind {
        ReportKind::Counts | ReportKind::Zscore => {
            let states = if kind == ReportKind::Counts {
                std::slice::from_ref(last)
            } else {
                snapshots
            };
            for s in states {
                for &d in &digits {
                    rows.push(vec![
                        Cell::Int(s.len()),
                        Cell::Int(d as u64),
                        Cell::Int(s.count(d)),
                        Cell::Real(model.expected_count(s.len(), d)),
                        Cell::Real(stats::benford_error(s, d, model)),
                        Cell::Real(stats::z_score(s, d, model)),
                    ]);
                }
            }
            vec!["n", "digit", "observed", "predicted", "error", "z_score"]
        }
        ReportKind::Waits => {
            for &d in &digits {
                let h = last.waits(d);
                let total = h.total();
                for (gap, c) in h.iter() {
                    rows.push(vec![
                        Cell::Int(d as u64),
                        Cell::Int(gap),
                        Cell::Int(c),
                        Cell::Real(c as f64 / total as f64),
                        Cell::Real(model.waiting_pmf(d, gap)),
                    ]);
                }
            }
            vec!["digit", "gap", "count", "observed", "predicted"]
        }
        ReportKind::Tuples => {
            let total = last.tuple_total();
            let predicted = model.tuple_distribution(last.order());
            for (code, &c) in last.tuple_counts().iter().enumerate() {
                let t = last.tuple_digits(code);
                if digit.is_some_and(|d| t[0] as u32 != d) {
                    continue;
                }
                let label: Vec<String> = t.iter().map(|x| x.to_string()).collect();
                let observed = if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                };
                rows.push(vec![
                    Cell::Int(last.len()),
                    Cell::Text(label.join("-")),
                    Cell::Int(c),
                    Cell::Real(observed),
                    Cell::Real(predicted[code]),
                ]);
            }
            vec!["n", "tuple", "count", "observed", "predicted"]
        }
        ReportKind::Tvd => {
            for s in snapshots {
                rows.push(vec![
                    Cell::Int(s.len()),
                    Cell::Int(s.order() as u64),
                    Cell::Real(stats::tuple_tvd(s, model).map_err(stats_err)?),
                ]);
            }
            vec!["n", "k", "tvd"]
        }
    };
    Ok(Report { columns, rows })
}

/// Writes `report` with a header row (CSV) or as an array of objects (JSON).
/// Real numbers carry six digits after the decimal point.
pub fn emit_report<W: Write>(report: &Report, format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            let io = |e: csv::Error| StoreError::Report(e.to_string());
            w.write_record(&report.columns).map_err(io)?;
            for r in &report.rows {
                w.write_record(r.iter().map(Cell::text)).map_err(io)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, report)
                .map_err(|e| StoreError::Report(e.to_string()))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
