//! Long-format CSV tables and their metadata sidecars.
//!
//! Every number is written with Rust's shortest round-trip formatting, so a
//! parsed file reproduces the in-memory values exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::diag::GaussianityReport;
use super::{ExperimentConfig, Summary, SweepResult, TrialOutcome};
use crate::coupling::CouplingConfig;
use crate::error::{Error, Result};
use crate::se::SeTrajectory;

pub const SWEEP_HEADER: [&str; 12] = [
    "L", "W", "N", "M", "delta", "overall_rate", "zeta", "best", "statistic", "trial", "section", "value",
];
pub const SE_HEADER: [&str; 10] = ["L", "W", "N", "M", "delta", "overall_rate", "t", "section", "statistic", "value"];
pub const DIAG_HEADER: [&str; 10] = ["L", "W", "N", "M", "delta", "zeta", "t", "section", "statistic", "value"];

/// One parsed row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub sections: usize,
    #[serde(rename = "W")]
    pub width: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub delta: f64,
    pub overall_rate: f64,
    pub zeta: f64,
    pub best: u8,
    pub statistic: String,
    pub trial: Option<usize>,
    pub section: Option<usize>,
    pub value: f64,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// All rows of a sweep table, in emission order.
pub fn sweep_rows(results: &[SweepResult]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for res in results {
        for p in &res.points {
            let row = |zeta: f64, best: bool, statistic: &str, trial: Option<usize>, section: Option<usize>, value: f64| SweepRow {
                sections: res.sections,
                width: res.width,
                n: res.n,
                m: p.m,
                delta: p.delta,
                overall_rate: p.overall_rate,
                zeta,
                best: best as u8,
                statistic: statistic.to_string(),
                trial,
                section,
                value,
            };
            for (k, z) in p.per_zeta.iter().enumerate() {
                let best = p.best == Some(k);
                for (trial, o) in z.outcomes.iter().enumerate() {
                    match o {
                        TrialOutcome::Completed(_) => {
                            rows.push(row(z.zeta, best, "largest_mse", Some(trial), None, o.largest().unwrap()))
                        }
                        TrialOutcome::Failed { iteration, .. } => {
                            rows.push(row(z.zeta, best, "failed_at", Some(trial), None, *iteration as f64))
                        }
                    }
                }
                if let Some(s) = z.summary() {
                    rows.push(row(z.zeta, best, "largest_mse_mean", None, None, s.mean));
                    rows.push(row(z.zeta, best, "largest_mse_median", None, None, s.median));
                    rows.push(row(z.zeta, best, "largest_mse_q10", None, None, s.q10));
                    rows.push(row(z.zeta, best, "largest_mse_q90", None, None, s.q90));
                }
                rows.push(row(z.zeta, best, "trials_completed", None, None, (z.outcomes.len() - z.failed()) as f64));
                rows.push(row(z.zeta, best, "trials_failed", None, None, z.failed() as f64));
                for (l, m) in z.section_mean().iter().enumerate() {
                    rows.push(row(z.zeta, best, "section_mse_mean", None, Some(l), *m));
                }
            }
            rows.push(row(1.0, false, "se_largest_mse", None, None, p.se_largest));
        }
    }
    rows
}

fn write_rows<W: Write>(out: W, rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.sections.to_string(),
            r.width.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.delta.to_string(),
            r.overall_rate.to_string(),
            r.zeta.to_string(),
            r.best.to_string(),
            r.statistic.clone(),
            opt(r.trial),
            opt(r.section),
            r.value.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Sweep table as a string.
pub fn sweep_csv(results: &[SweepResult]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, &sweep_rows(results), Path::new("<memory>"))?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Write the sweep table to `path`.
pub fn emit_csv(results: &[SweepResult], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_rows(file, &sweep_rows(results), path)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

/// `(L, W, N, M, zeta bits)`.
pub type PointKey = (usize, usize, usize, usize, u64);

/// Recompute the largest-MSE summaries from the per-trial rows of a table.
pub fn recompute_summaries(rows: &[SweepRow]) -> BTreeMap<PointKey, Summary> {
    let mut per_point: BTreeMap<PointKey, Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.statistic == "largest_mse") {
        per_point
            .entry((r.sections, r.width, r.n, r.m, r.zeta.to_bits()))
            .or_default()
            .push((r.trial.unwrap_or(0), r.value));
    }
    per_point
        .into_iter()
        .filter_map(|(k, mut v)| {
            v.sort_by_key(|(t, _)| *t);
            let values: Vec<f64> = v.into_iter().map(|(_, x)| x).collect();
            Summary::of(&values).map(|s| (k, s))
        })
        .collect()
}

/// Sidecar path: `out.csv` → `out.csv.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// `(L, W)` of every setting in the table.
    pub settings: Vec<(usize, usize)>,
    pub wall_clock_secs: f64,
}

impl Metadata {
    pub fn new(command: &str, config: &ExperimentConfig, settings: Vec<(usize, usize)>, wall_clock_secs: f64) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
            settings,
            wall_clock_secs,
        }
    }
}

pub fn write_metadata(meta: &Metadata, csv_path: &Path) -> Result<PathBuf> {
    let path = sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(path)
}

fn write_table<W: Write>(out: W, header: &[&str], rows: Vec<Vec<String>>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// State-evolution table: `v̄_B` per column and `v̄_{A→B}` per row section at every step.
pub fn write_se_csv<W: Write>(out: W, runs: &[(f64, CouplingConfig, SeTrajectory)], path: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for (delta, c, traj) in runs {
        let prefix = [
            c.sections().to_string(),
            c.width().to_string(),
            c.n().to_string(),
            c.m().to_string(),
            delta.to_string(),
            c.overall_rate().to_string(),
        ];
        let mut push = |t: usize, section: Option<usize>, stat: &str, value: f64| {
            let mut r = prefix.to_vec();
            r.extend([t.to_string(), opt(section), stat.to_string(), value.to_string()]);
            rows.push(r);
        };
        for s in &traj.states {
            for (l, v) in s.v_b.iter().enumerate() {
                push(s.t, Some(l), "v_b", *v);
            }
            if s.t > 0 {
                for (l, v) in s.v_ab.iter().enumerate() {
                    push(s.t, Some(l), "v_ab", *v);
                }
            }
        }
        let last = traj.last();
        push(last.t, None, "largest_v_b", last.largest_v_b());
        if let Some(t) = traj.converged_at {
            push(t, None, "converged_at", t as f64);
        }
    }
    write_table(out, &SE_HEADER, rows, path)
}

/// Diagnostic table: one row per checkpoint, row section and statistic.
pub fn write_diag_csv<W: Write>(out: W, report: &GaussianityReport, path: &Path) -> Result<()> {
    let prefix = [
        report.sections.to_string(),
        report.width.to_string(),
        report.n.to_string(),
        report.m.to_string(),
        report.delta.to_string(),
        report.zeta.to_string(),
    ];
    let mut rows = Vec::new();
    for d in &report.rows {
        for (stat, v) in [
            ("excess_kurtosis", d.excess_kurtosis),
            ("skewness", d.skewness),
            ("correlation", d.correlation),
            ("empirical_var", d.empirical_var),
            ("predicted_var", d.predicted_var),
            ("relative_var_gap", d.relative_var_gap()),
        ] {
            let mut r = prefix.to_vec();
            r.extend([d.t.to_string(), d.section.to_string(), stat.to_string(), v.to_string()]);
            rows.push(r);
        }
    }
    for (stat, v) in [("trials_completed", report.trials), ("trials_failed", report.failed)] {
        let mut r = prefix.to_vec();
        r.extend([String::new(), String::new(), stat.to_string(), v.to_string()]);
        rows.push(r);
    }
    write_table(out, &DIAG_HEADER, rows, path)
}

/// Create `path` for writing, or fall back to standard output when `None`.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(File::create(p).map_err(io_err(p))?)),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_are_header_only() {
        let text = sweep_csv(&[]).unwrap();
        assert_eq!(text, SWEEP_HEADER.join(",") + "\n");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("a/b.csv")), PathBuf::from("a/b.csv.meta.json"));
    }
}
