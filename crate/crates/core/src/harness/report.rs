//! Run reports: per-seed raw values, mean/std tables, paired tests and
//! provenance, emitted as JSON plus plot-ready CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod};
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: String,
    pub grid_value: f64,
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub std: f64,
    /// One value per seed, in [`Provenance::seeds`] order.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: String,
    pub baseline: String,
    pub grid_value: f64,
    pub p_value: f64,
    pub statistic: f64,
    pub n: usize,
    pub test: WilcoxonMethod,
    pub warning: Option<String>,
    /// Seeds where `method` is at most `baseline`.
    pub method_not_worse: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub method: String,
    pub seed: u64,
    pub series: usize,
    /// Mean and max over series of the per-series headline (max over horizons).
    pub mean_bound: f64,
    pub max_bound: f64,
    pub mean_stderr: f64,
    pub heuristic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub crate_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub pipeline: String,
    /// What the grid values are (`eta` or `log10_1p_rho`).
    pub grid_name: String,
    pub grid: Vec<f64>,
    pub methods: Vec<String>,
    pub cells: Vec<Cell>,
    pub comparisons: Vec<Comparison>,
    pub certificates: Vec<CertificateSummary>,
    pub provenance: Provenance,
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 { (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, std)
}

impl RunReport {
    /// Builds the tables from `raw[method][grid][seed]`. Methods after the
    /// first are compared against the first at every grid value when at least
    /// five seeds are available.
    pub fn assemble(
        pipeline: &str,
        grid_name: &str,
        grid: &[f64],
        methods: &[&str],
        raw: &[Vec<Vec<f64>>],
        certificates: Vec<CertificateSummary>,
        provenance: Provenance,
    ) -> Result<Self> {
        if raw.len() != methods.len() || raw.iter().any(|m| m.len() != grid.len()) {
            return Err(invalid("raw values do not match the method and grid dimensions"));
        }
        let n_seeds = provenance.seeds.len();
        let mut cells = Vec::new();
        for (mi, m) in methods.iter().enumerate() {
            for (gi, &g) in grid.iter().enumerate() {
                let values = raw[mi][gi].clone();
                if values.len() != n_seeds {
                    return Err(invalid("one raw value per seed is required"));
                }
                let (mean, std) = mean_std(&values);
                cells.push(Cell { method: m.to_string(), grid_value: g, mean, std, values });
            }
        }
        let mut comparisons = Vec::new();
        if n_seeds >= 5 {
            for (mi, m) in methods.iter().enumerate().skip(1) {
                for (gi, &g) in grid.iter().enumerate() {
                    let (a, b) = (&raw[mi][gi], &raw[0][gi]);
                    let w = wilcoxon_signed_rank(a, b)?;
                    comparisons.push(Comparison {
                        method: m.to_string(),
                        baseline: methods[0].to_string(),
                        grid_value: g,
                        p_value: w.p_value,
                        statistic: w.statistic,
                        n: w.n,
                        test: w.method,
                        warning: w.warning,
                        method_not_worse: a.iter().zip(b).filter(|(x, y)| x <= y).count(),
                    });
                }
            }
        }
        Ok(RunReport {
            pipeline: pipeline.into(),
            grid_name: grid_name.into(),
            grid: grid.to_vec(),
            methods: methods.iter().map(|m| m.to_string()).collect(),
            cells,
            comparisons,
            certificates,
            provenance,
        })
    }

    pub fn cell(&self, method: &str, grid_value: f64) -> Option<&Cell> {
        self.cells.iter().find(|c| c.method == method && c.grid_value == grid_value)
    }

    /// Per-seed values of `method` along the grid.
    pub fn curve(&self, method: &str, seed_index: usize) -> Vec<f64> {
        self.grid.iter().filter_map(|&g| self.cell(method, g).map(|c| c.values[seed_index])).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", self.grid_name.as_str(), "mean", "std", "n_seeds"])?;
        for c in &self.cells {
            w.write_record([c.method.clone(), c.grid_value.to_string(), c.mean.to_string(), c.std.to_string(), c.values.len().to_string()])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| invalid(e.to_string()))?).expect("utf8"))
    }

    pub fn raw_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", self.grid_name.as_str(), "seed", "value"])?;
        for c in &self.cells {
            for (s, v) in self.provenance.seeds.iter().zip(&c.values) {
                w.write_record([c.method.clone(), c.grid_value.to_string(), s.to_string(), v.to_string()])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| invalid(e.to_string()))?).expect("utf8"))
    }

    /// Writes `<stem>.json`, `<stem>_summary.csv` and `<stem>_raw.csv`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json())?;
        std::fs::write(dir.join(format!("{stem}_summary.csv")), self.summary_csv()?)?;
        std::fs::write(dir.join(format!("{stem}_raw.csv")), self.raw_csv()?)?;
        Ok(())
    }

    /// Human-readable table of means and standard deviations.
    pub fn render_table(&self) -> String {
        let mut out = format!("{} ({})\n{:>10}", self.pipeline, self.provenance.config_hash.get(..12).unwrap_or(""), self.grid_name);
        for m in &self.methods {
            out.push_str(&format!(" {m:>18}"));
        }
        out.push('\n');
        for &g in &self.grid {
            out.push_str(&format!("{g:>10.3}"));
            for m in &self.methods {
                match self.cell(m, g) {
                    Some(c) => out.push_str(&format!(" {:>9.4} ± {:<6.4}", c.mean, c.std)),
                    None => out.push_str(&format!(" {:>18}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}
