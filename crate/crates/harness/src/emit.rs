//! Plot-ready output of run reports.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use react_core::engine::EngineTrace;

use crate::error::{HarnessError, Result};
use crate::runs::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown format `{other}` (expected csv or jsonl)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        })
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    step: usize,
    response_index: u32,
    target_asset: &'a str,
    cost: f64,
    benefit: f64,
    impact: f64,
    selection_time_ms: f64,
}

#[derive(Serialize)]
struct JsonlRow<'a> {
    scenario: &'a str,
    mode: &'a str,
    algorithm: &'a str,
    seed: u64,
    #[serde(flatten)]
    selection: &'a crate::runs::SelectionRecord,
}

/// Writes one CSV row per selection with a header line.
pub fn write_csv(report: &RunReport, out: impl Write) -> io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for s in &report.selections {
        writer
            .serialize(CsvRow {
                step: s.step,
                response_index: s.response_index,
                target_asset: s.target_asset.as_str(),
                cost: s.cost,
                benefit: s.benefit,
                impact: s.impact,
                selection_time_ms: s.selection_time_ms,
            })
            .map_err(io::Error::other)?;
    }
    if report.selections.is_empty() {
        writer
            .write_record([
                "step",
                "response_index",
                "target_asset",
                "cost",
                "benefit",
                "impact",
                "selection_time_ms",
            ])
            .map_err(io::Error::other)?;
    }
    writer.flush()
}

/// Writes one JSON object per selection, tagged with the run settings.
pub fn write_jsonl(report: &RunReport, mut out: impl Write) -> io::Result<()> {
    let mode = report.mode.as_str();
    let algorithm = report.algorithm.as_str();
    for selection in &report.selections {
        let row = JsonlRow {
            scenario: &report.scenario,
            mode,
            algorithm,
            seed: report.seed,
            selection,
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Writes one JSON object per outer-loop iteration across all traces.
pub fn write_trace(traces: &[EngineTrace], mut out: impl Write) -> io::Result<()> {
    for trace in traces {
        for record in &trace.iterations {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()
}

pub fn write_series(report: &RunReport, format: Format, out: impl Write) -> io::Result<()> {
    match format {
        Format::Csv => write_csv(report, out),
        Format::Jsonl => write_jsonl(report, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| HarnessError::Write {
            path: path.to_owned(),
            source,
        })
}

/// Writes the selection series of `report` to `path`.
pub fn emit_series(report: &RunReport, format: Format, path: &Path) -> Result<()> {
    write_series(report, format, create(path)?).map_err(|source| HarnessError::Write {
        path: path.to_owned(),
        source,
    })
}

/// Writes the engine traces of `report` to `path` as JSON lines.
pub fn emit_trace(report: &RunReport, path: &Path) -> Result<()> {
    write_trace(&report.traces, create(path)?).map_err(|source| HarnessError::Write {
        path: path.to_owned(),
        source,
    })
}
