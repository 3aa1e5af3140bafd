//! Result tables, config snapshots and the plotting script.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::sweep::{RealizationRecord, SwarmTraceRecord};
use crate::error::{Error, Result};
use crate::placement::SchemeId;

pub const CSV_HEADER: &str = "scheme,m_uavs,p_t_dbm,mean_rate_bps_hz,std_rate_bps_hz,n_realizations,seed";
pub const RESULTS_FILE: &str = "results.csv";
pub const SNAPSHOT_FILE: &str = "config_snapshot.toml";
pub const PLOT_FILE: &str = "plot_results.py";
pub const TRACE_FILE: &str = "trace_realizations.csv";
pub const SWARM_TRACE_FILE: &str = "trace_swarm.csv";

/// One `(scheme, M, P_T)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: SchemeId,
    pub m_uavs: usize,
    pub p_t_dbm: f64,
    pub mean_rate_bps_hz: f64,
    pub std_rate_bps_hz: f64,
    pub n_realizations: usize,
    pub seed: u64,
    /// Not written to the CSV, which must be reproducible byte for byte.
    pub wall_time_s: f64,
}

impl ResultRow {
    /// CSV line without the newline. `{}` on `f64` prints the shortest
    /// representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.scheme, self.m_uavs, self.p_t_dbm, self.mean_rate_bps_hz, self.std_rate_bps_hz, self.n_realizations, self.seed
        )
    }

    fn same_values(&self, other: &ResultRow) -> bool {
        ResultRow {
            wall_time_s: 0.0,
            ..self.clone()
        } == ResultRow {
            wall_time_s: 0.0,
            ..other.clone()
        }
    }
}

fn parse_field<T: std::str::FromStr>(line_no: usize, name: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::InvalidInput(format!("line {line_no}: bad {name} `{s}`")))
}

/// Parse a results table written by [`emit_outputs`] or [`CsvWriter`].
pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::InvalidInput("missing or unexpected results.csv header".into())),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let n = i + 2;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::InvalidInput(format!("line {n}: expected 7 fields, found {}", f.len())));
            }
            Ok(ResultRow {
                scheme: f[0].parse()?,
                m_uavs: parse_field(n, "m_uavs", f[1])?,
                p_t_dbm: parse_field(n, "p_t_dbm", f[2])?,
                mean_rate_bps_hz: parse_field(n, "mean_rate_bps_hz", f[3])?,
                std_rate_bps_hz: parse_field(n, "std_rate_bps_hz", f[4])?,
                n_realizations: parse_field(n, "n_realizations", f[5])?,
                seed: parse_field(n, "seed", f[6])?,
                wall_time_s: 0.0,
            })
        })
        .collect()
}

/// Appends rows to `results.csv`, flushing each complete line.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(RESULTS_FILE);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = CsvWriter {
            out: BufWriter::new(file),
            path,
        };
        w.write_line(CSV_HEADER)?;
        Ok(w)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        let mut buf = String::with_capacity(line.len() + 1);
        buf.push_str(line);
        buf.push('\n');
        self.out
            .write_all(buf.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn append(&mut self, row: &ResultRow) -> Result<()> {
        self.write_line(&row.to_csv())
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

/// Write `results.csv`, the config snapshot and the plot script into `dir`.
pub fn emit_outputs(rows: &[ResultRow], cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no result rows to write".into()));
    }
    let csv = results_csv(rows);
    let parsed = parse_results_csv(&csv)?;
    if parsed.len() != rows.len() || parsed.iter().zip(rows).any(|(a, b)| !a.same_values(b)) {
        return Err(Error::InvalidInput("results do not survive a CSV round trip".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let results = dir.join(RESULTS_FILE);
    let snapshot = dir.join(SNAPSHOT_FILE);
    let plot = dir.join(PLOT_FILE);
    write_atomic(&results, &csv)?;
    write_atomic(&snapshot, &cfg.to_toml())?;
    write_atomic(&plot, PLOT_SCRIPT)?;
    Ok(vec![results, snapshot, plot])
}

pub fn write_plot_script(dir: &Path) -> Result<PathBuf> {
    let plot = dir.join(PLOT_FILE);
    write_atomic(&plot, PLOT_SCRIPT)?;
    Ok(plot)
}

pub fn write_snapshot(cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let snapshot = dir.join(SNAPSHOT_FILE);
    write_atomic(&snapshot, &cfg.to_toml())?;
    Ok(snapshot)
}

/// Per-realization rates and swarm progress, one CSV each.
pub fn write_traces(realizations: &[RealizationRecord], swarm: &[SwarmTraceRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut s = String::from("scheme,m_uavs,p_t_dbm,drop,realization,rate_bps_hz\n");
    for r in realizations {
        s.push_str(&format!("{},{},{},{},{},{}\n", r.scheme, r.m_uavs, r.p_t_dbm, r.drop, r.realization, r.rate_bps_hz));
    }
    let a = dir.join(TRACE_FILE);
    write_atomic(&a, &s)?;

    let mut s = String::from("scheme,m_uavs,p_t_dbm,drop,iteration,global_best_bps_hz,uav_xy_m\n");
    for t in swarm {
        let xy: Vec<String> = t.record.best_uav_ground.iter().map(|p| format!("{} {}", p[0], p[1])).collect();
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.scheme,
            t.m_uavs,
            t.p_t_dbm,
            t.drop,
            t.record.iteration,
            t.record.global_best,
            xy.join(";")
        ));
    }
    let b = dir.join(SWARM_TRACE_FILE);
    write_atomic(&b, &s)?;
    Ok(vec![a, b])
}

/// Parse the per-realization trace back into `(scheme, m, p_t, rate)` tuples.
pub fn parse_realization_trace(text: &str) -> Result<Vec<(SchemeId, usize, f64, f64)>> {
    text.lines()
        .skip(1)
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::InvalidInput(format!("trace line {}: expected 6 fields", i + 2)));
            }
            Ok((
                f[0].parse()?,
                parse_field(i + 2, "m_uavs", f[1])?,
                parse_field(i + 2, "p_t_dbm", f[2])?,
                parse_field(i + 2, "rate_bps_hz", f[5])?,
            ))
        })
        .collect()
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot mean total rate against BS transmit power, one curve per scheme and UAV count.

Usage: python3 plot_results.py [results.csv] [output.png]
Surface grids (surface_m*.csv) next to the results are drawn as heat maps.
"""
import csv
import glob
import os
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
src = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "results.csv")
dst = sys.argv[2] if len(sys.argv) > 2 else os.path.join(here, "rates.png")

curves = defaultdict(list)
with open(src, newline="") as f:
    for row in csv.DictReader(f):
        key = (row["scheme"], int(row["m_uavs"]))
        curves[key].append(
            (float(row["p_t_dbm"]), float(row["mean_rate_bps_hz"]), float(row["std_rate_bps_hz"]))
        )

fig, ax = plt.subplots(figsize=(7, 4.5))
for (scheme, m), pts in sorted(curves.items()):
    pts.sort()
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{scheme}, M={m}")
ax.set_xlabel("P_T (dBm)")
ax.set_ylabel("R_T (bps/Hz)")
ax.grid(True, alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(dst, dpi=150)

for path in sorted(glob.glob(os.path.join(os.path.dirname(src), "surface_m*.csv"))):
    xs, ys, zs = [], [], []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            xs.append(float(row["x_m"]))
            ys.append(float(row["y_m"]))
            zs.append(float(row["r2_bps_hz"]))
    fig, ax = plt.subplots(figsize=(5, 4))
    sc = ax.tricontourf(xs, ys, zs, levels=20)
    fig.colorbar(sc, ax=ax, label="R_2 (bps/Hz)")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    fig.tight_layout()
    fig.savefig(os.path.splitext(path)[0] + ".png", dpi=150)
"#;
