//! CSV tables, run manifest and plotting script.
//!
//! Floats are written as `{:.16e}` (17 significant digits) so that equal
//! runs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use jaam_core::linalg::norm;
use jaam_core::PathRecord;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::harness::{BackstopRow, ErrorTable, TimingTable};

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, HarnessError> {
    Ok(csv::Writer::from_path(path)?)
}

/// `errors.csv`: one row per `h_max` and scheme.
pub fn write_errors(table: &ErrorTable, path: &Path) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    w.write_record([
        "h_max",
        "h_mean",
        "scheme",
        "rms_error",
        "stderr",
        "mean_steps",
        "mean_jumps",
        "backstop_frequency",
        "truncated_backstop_frequency",
    ])?;
    for row in &table.rows {
        for r in &row.results {
            w.write_record([
                float(row.h_max),
                float(row.h_mean),
                r.scheme.id().to_string(),
                float(r.rms_error),
                float(r.stderr),
                float(r.mean_steps),
                float(row.mean_jumps),
                float(row.backstop_frequency),
                float(row.truncated_backstop_frequency),
            ])?;
        }
    }
    w.flush()
        .map_err(|e| HarnessError::io(path.display().to_string(), e))
}

/// `slopes.csv`: least-squares fit of `log2 rms_error` on `log2 h_mean`.
pub fn write_slopes(table: &ErrorTable, path: &Path) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    w.write_record(["scheme", "slope", "intercept", "residual"])?;
    for s in &table.slopes {
        w.write_record([
            s.scheme.id().to_string(),
            float(s.fit.slope),
            float(s.fit.intercept),
            float(s.fit.residual),
        ])?;
    }
    w.flush()
        .map_err(|e| HarnessError::io(path.display().to_string(), e))
}

/// `timing.csv`: one `cpu_<scheme>` and one `steps_<scheme>` column per scheme.
pub fn write_timing(table: &TimingTable, path: &Path) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    let schemes: Vec<_> = table
        .rows
        .first()
        .map(|r| r.results.iter().map(|s| s.scheme).collect())
        .unwrap_or_default();
    let mut header = vec!["h_max".to_string(), "h_mean".to_string()];
    header.extend(schemes.iter().map(|s| format!("cpu_{s}")));
    header.extend(schemes.iter().map(|s| format!("steps_{s}")));
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![float(row.h_max), float(row.h_mean)];
        rec.extend(row.results.iter().map(|r| float(r.cpu_seconds)));
        rec.extend(row.results.iter().map(|r| float(r.mean_steps)));
        w.write_record(&rec)?;
    }
    w.flush()
        .map_err(|e| HarnessError::io(path.display().to_string(), e))
}

/// `backstop.csv`.
pub fn write_backstop(rows: &[BackstopRow], path: &Path) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    w.write_record([
        "rho",
        "h_max",
        "frequency",
        "norm_triggered_frequency",
        "truncated_frequency",
        "jump_term",
        "mean_steps",
    ])?;
    for r in rows {
        w.write_record([
            float(r.rho),
            float(r.h_max),
            float(r.frequency),
            float(r.norm_triggered_frequency),
            float(r.truncated_frequency),
            float(r.jump_term),
            float(r.mean_steps),
        ])?;
    }
    w.flush()
        .map_err(|e| HarnessError::io(path.display().to_string(), e))
}

/// Per-step trace: node time, step, post-jump norm and flags.
pub fn write_trace(record: &PathRecord, path: &Path) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    w.write_record(["t", "h", "norm", "used_backstop", "jump_applied"])?;
    for n in &record.nodes {
        w.write_record([
            float(n.t_next),
            float(n.h_used),
            float(norm(&n.state_after_jump)),
            u8::from(n.used_backstop).to_string(),
            u8::from(n.jump_applied).to_string(),
        ])?;
    }
    w.flush()
        .map_err(|e| HarnessError::io(path.display().to_string(), e))
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub workers: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub output_dir: PathBuf,
    pub outputs: Vec<String>,
    pub reference_ratio: Option<f64>,
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path.display().to_string(), e))
}

pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot errors.csv / timing.csv written by `jaam` in this directory."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__)) if len(sys.argv) < 2 else sys.argv[1]


def read(name):
    path = os.path.join(here, name)
    if not os.path.exists(path):
        return None
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


errors = read("errors.csv")
if errors:
    fig, ax = plt.subplots()
    for scheme in dict.fromkeys(r["scheme"] for r in errors):
        rows = [r for r in errors if r["scheme"] == scheme]
        h = [float(r["h_mean"]) for r in rows]
        e = [float(r["rms_error"]) for r in rows]
        s = [float(r["stderr"]) for r in rows]
        ax.errorbar(h, e, yerr=s, marker="o", capsize=2, label=scheme)
    h = sorted({float(r["h_mean"]) for r in errors})
    e0 = min(float(r["rms_error"]) for r in errors)
    ax.loglog(h, [e0 * x / h[0] for x in h], "k--", label="slope 1")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log", base=2)
    ax.set_xlabel("h_mean")
    ax.set_ylabel("RMS endpoint error")
    ax.legend()
    fig.savefig(os.path.join(here, "errors.png"), dpi=150)

timing = read("timing.csv")
if timing:
    fig, ax = plt.subplots()
    for key in [k for k in timing[0] if k.startswith("cpu_")]:
        ax.loglog([float(r["h_mean"]) for r in timing], [float(r[key]) for r in timing], marker="o", label=key[4:])
    ax.set_xlabel("h_mean")
    ax.set_ylabel("mean seconds per path")
    ax.legend()
    fig.savefig(os.path.join(here, "timing.png"), dpi=150)

backstop = read("backstop.csv")
if backstop:
    fig, ax = plt.subplots()
    for h in dict.fromkeys(r["h_max"] for r in backstop):
        rows = [r for r in backstop if r["h_max"] == h]
        ax.semilogx([float(r["rho"]) for r in rows], [float(r["frequency"]) for r in rows], marker="o", label=f"h_max={float(h):g}")
    ax.set_xlabel("rho")
    ax.set_ylabel("backstop frequency")
    ax.legend()
    fig.savefig(os.path.join(here, "backstop.png"), dpi=150)
"#;

pub fn write_plot_script(dir: &Path) -> Result<PathBuf, HarnessError> {
    let path = dir.join("plot.py");
    fs::write(&path, PLOT_SCRIPT).map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    Ok(path)
}
