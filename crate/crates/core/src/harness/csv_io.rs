//! Long-format CSV input (`id,timestamp,value`) and export.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{ForecastSamples, TimeSeries};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// `None` uses every value before the futures.
    #[serde(default)]
    pub context_length: Option<usize>,
    pub prediction_length: usize,
    /// Whether the last `prediction_length` rows of each id are ground truth.
    #[serde(default = "yes")]
    pub has_future: bool,
    #[serde(default)]
    pub fail_fast: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestDiagnostic {
    pub id: String,
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub series: Vec<TimeSeries<f64>>,
    /// Problems that caused a series to be dropped (empty with `fail_fast`).
    pub diagnostics: Vec<IngestDiagnostic>,
}

struct Pending {
    id: String,
    first_line: u64,
    rows: Vec<(u64, String, String)>,
}

fn timestamp_order(a: &str, b: &str, numeric: bool) -> Ordering {
    if numeric {
        a.parse::<i64>().expect("checked numeric").cmp(&b.parse::<i64>().expect("checked numeric"))
    } else {
        a.cmp(b)
    }
}

fn finish(p: Pending, opts: &IngestOptions) -> std::result::Result<TimeSeries<f64>, IngestDiagnostic> {
    let diag = |line: u64, message: String| IngestDiagnostic { id: p.id.clone(), line, message };
    let mut values = Vec::with_capacity(p.rows.len());
    for (line, _, v) in &p.rows {
        match v.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => values.push(x),
            _ => return Err(diag(*line, format!("non-numeric value `{v}`"))),
        }
    }
    let numeric = p.rows.iter().all(|(_, t, _)| t.trim().parse::<i64>().is_ok());
    for w in p.rows.windows(2) {
        if timestamp_order(w[0].1.trim(), w[1].1.trim(), numeric) != Ordering::Less {
            return Err(diag(w[1].0, format!("timestamp `{}` does not follow `{}`", w[1].1, w[0].1)));
        }
    }
    let built = if opts.has_future {
        TimeSeries::with_future(p.id.clone(), values, opts.context_length, opts.prediction_length)
    } else {
        let ctx = opts.context_length.unwrap_or(values.len());
        if ctx > values.len() {
            return Err(diag(p.first_line, format!("too short: {} values for context {ctx}", values.len())));
        }
        let start = values.len() - ctx;
        TimeSeries::without_future(p.id.clone(), values[start..].to_vec(), opts.prediction_length)
    };
    built.map_err(|e| diag(p.first_line, format!("too short or invalid: {e}")))
}

/// Reads one series per id. Rows of an id must be contiguous and strictly
/// increasing in timestamp (integer order when every timestamp is an
/// integer, lexicographic otherwise).
pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["id", "timestamp", "value"] {
        return Err(ingest_error(path, 1, "", format!("header must be `id,timestamp,value`, got `{}`", names.join(","))));
    }
    let mut out = Ingested { series: Vec::new(), diagnostics: Vec::new() };
    let mut seen = BTreeSet::new();
    let mut broken = BTreeSet::new();
    let mut current: Option<Pending> = None;
    let flush = |p: Pending, out: &mut Ingested| -> Result<()> {
        match finish(p, opts) {
            Ok(s) => out.series.push(s),
            Err(d) if opts.fail_fast => return Err(ingest_error(path, d.line, &d.id, d.message)),
            Err(d) => out.diagnostics.push(d),
        }
        Ok(())
    };
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(ingest_error(path, line, rec.get(0).unwrap_or(""), format!("expected 3 fields, got {}", rec.len())));
        }
        let id = &rec[0];
        if current.as_ref().is_none_or(|p| p.id != id) {
            if let Some(p) = current.take() {
                flush(p, &mut out)?;
            }
            if !seen.insert(id.to_string()) {
                let d = IngestDiagnostic { id: id.to_string(), line, message: "rows for this id are not contiguous".into() };
                if opts.fail_fast {
                    return Err(ingest_error(path, d.line, &d.id, d.message));
                }
                out.diagnostics.push(d);
                broken.insert(id.to_string());
            }
            current = Some(Pending { id: id.to_string(), first_line: line, rows: Vec::new() });
        }
        current.as_mut().expect("set above").rows.push((line, rec[1].to_string(), rec[2].to_string()));
    }
    if let Some(p) = current.take() {
        flush(p, &mut out)?;
    }
    out.series.retain(|s| !broken.contains(&s.id));
    Ok(out)
}

fn ingest_error(path: &Path, line: u64, id: &str, message: String) -> Error {
    Error::Ingest { path: PathBuf::from(path), line, id: id.to_string(), message }
}

/// Writes `id,timestamp,value` rows with integer timestamps `0, 1, …`.
pub fn export_csv(path: &Path, series: &[TimeSeries<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "timestamp", "value"])?;
    for s in series {
        for (t, v) in s.values().iter().enumerate() {
            w.write_record([s.id.as_str(), &t.to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes sample paths as `id,path,horizon,value`, horizons counted from the
/// end of the input (offset included).
pub fn export_samples_csv(path: &Path, id: &str, samples: &ForecastSamples<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "path", "horizon", "value"])?;
    for (j, p) in samples.paths().enumerate() {
        for (t, v) in p.iter().enumerate() {
            let h = samples.horizon_offset + t + 1;
            w.write_record([id, &j.to_string(), &h.to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
