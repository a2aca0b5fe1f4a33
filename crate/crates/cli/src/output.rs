//! Report files: pretty JSON plus plot-ready CSV.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::experiments::{GeneralizeReport, ReactReport, ViapointReport};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// `generalize_<b>.json` and `generalize_<b>.csv`, one CSV row per case and
/// method.
pub fn write_generalize(dir: &Path, report: &GeneralizeReport) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let stem = format!("generalize_{}", report.benchmark);
    let json = dir.join(format!("{stem}.json"));
    write_json(&json, report)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv_writer(&csv_path)?;
    w.write_record(["index", "perturbations", "method", "success", "actions", "replans", "expansions", "planning_seconds"])?;
    for c in &report.cases {
        w.write_record([
            c.index.to_string(),
            c.perturbations.to_string(),
            c.method.to_string(),
            c.success.to_string(),
            c.actions.to_string(),
            c.replans.to_string(),
            opt(c.expansions),
            opt(c.planning_seconds),
        ])?;
    }
    w.flush()?;
    Ok(vec![json, csv_path])
}

/// `react_<b>_<level>.json` and `.csv`.
pub fn write_react(dir: &Path, report: &ReactReport) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let stem = format!("react_{}_{}", report.benchmark, report.level.to_string().to_lowercase());
    let json = dir.join(format!("{stem}.json"));
    write_json(&json, report)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv_writer(&csv_path)?;
    w.write_record(["index", "method", "success", "sim_seconds", "actions", "replans", "logic_in_hits"])?;
    for c in &report.cases {
        w.write_record([
            c.index.to_string(),
            c.method.to_string(),
            c.success.to_string(),
            c.sim_seconds.to_string(),
            c.actions.to_string(),
            c.replans.to_string(),
            c.logic_in_hits.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(vec![json, csv_path])
}

/// `viapoint_<goal>.json` and `viapoint_<goal>.csv` with the demonstrated,
/// LQT-CP and DMP paths side by side (DMP runs longer; the other columns are
/// left empty past their end).
pub fn write_viapoint(dir: &Path, report: &ViapointReport) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let stem = format!("viapoint_{}", report.goal.as_str());
    let json = dir.join(format!("{stem}.json"));
    write_json(&json, report)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv_writer(&csv_path)?;
    w.write_record(["step", "t", "demo_x", "demo_y", "lqt_x", "lqt_y", "dmp_x", "dmp_y"])?;
    let paths = [&report.demonstration, &report.lqt.path, &report.dmp.path];
    let rows = paths.iter().map(|p| p.positions.len()).max().unwrap_or(0);
    for k in 0..rows {
        let mut record = vec![k.to_string(), (k as f64 * report.lqt.path.dt).to_string()];
        for p in paths {
            match p.positions.get(k) {
                Some(q) => record.extend([q[0].to_string(), q[1].to_string()]),
                None => record.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(vec![json, csv_path])
}
