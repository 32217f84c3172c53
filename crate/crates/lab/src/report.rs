//! Sweep artifacts: `sweep.csv`, `trials.csv`, `summary.json` and two SVG
//! log-log plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specclust_core::kernel::KernelConstants;
use specclust_core::{math, Error};

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::io;
use crate::sweep::{SweepOutput, SweepRecord, TrialFailure, TrialSummary};

pub fn records_to_csv(records: &[SweepRecord]) -> LabResult<String> {
    if records.is_empty() {
        return Err(LabError::Core(Error::InvalidArgument("no records to emit".into())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_records(text: &str) -> LabResult<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(LabError::from)).collect()
}

fn median_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| math::median(&v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub n: usize,
    pub k_index: usize,
    pub trials: usize,
    pub rescaled: Option<f64>,
    pub reference: f64,
    pub rel_error: Option<f64>,
    pub subspace_tl2: Option<f64>,
    pub cluster_w2_total: Option<f64>,
}

/// Medians over seeds for every `(n, k_index)`, in ascending order.
pub fn medians(records: &[SweepRecord]) -> Vec<MedianRow> {
    let mut by: BTreeMap<(usize, usize), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        by.entry((r.n, r.k_index)).or_default().push(r);
    }
    by.into_iter()
        .map(|((n, k_index), rows)| MedianRow {
            n,
            k_index,
            trials: rows.len(),
            rescaled: median_of(rows.iter().map(|r| Some(r.rescaled))),
            reference: rows[0].reference,
            rel_error: median_of(rows.iter().map(|r| r.rel_error)),
            subspace_tl2: median_of(rows.iter().map(|r| r.subspace_tl2)),
            cluster_w2_total: median_of(rows.iter().map(|r| r.cluster_w2_total)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMedian {
    pub n: usize,
    pub projection_error: Option<f64>,
    pub sup_displacement: Option<f64>,
    pub disconnected: usize,
}

pub fn trial_medians(trials: &[TrialSummary]) -> Vec<TrialMedian> {
    let mut by: BTreeMap<usize, Vec<&TrialSummary>> = BTreeMap::new();
    for t in trials {
        by.entry(t.n).or_default().push(t);
    }
    by.into_iter()
        .map(|(n, rows)| TrialMedian {
            n,
            projection_error: median_of(rows.iter().map(|t| t.projection_error)),
            sup_displacement: median_of(rows.iter().map(|t| t.sup_displacement)),
            disconnected: rows.iter().filter(|t| t.components > 1).count(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsEcho {
    pub dim: usize,
    pub sigma: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub kernel_constants: ConstantsEcho,
    pub targets: Vec<f64>,
    pub cluster_nonunique: bool,
    pub medians: Vec<MedianRow>,
    pub trial_medians: Vec<TrialMedian>,
    pub failures: Vec<TrialFailure>,
}

pub fn summarize(config: &ExperimentConfig, constants: &KernelConstants, out: &SweepOutput) -> Summary {
    Summary {
        config: config.clone(),
        kernel_constants: ConstantsEcho { dim: constants.dim, sigma: constants.sigma, beta: constants.beta },
        targets: out.targets.clone(),
        cluster_nonunique: out.cluster_nonunique,
        medians: medians(&out.records),
        trial_medians: trial_medians(&out.trials),
        failures: out.failures.clone(),
    }
}

/// Log-log polyline plot, one series per label. Non-positive values are
/// skipped.
pub fn loglog_svg(title: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    let pts: Vec<(f64, f64)> =
        series.iter().flat_map(|s| s.1.iter().copied()).filter(|&(x, y)| x > 0.0 && y > 0.0).collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    if pts.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, W / 2.0, H / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)) }
    };
    let (x0, x1) = span(&lx);
    let (y0, y1) = span(&ly);
    let sx = |x: f64| M + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * M);
    let _ = writeln!(
        svg,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    for e in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(10f64.powi(e));
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{e}</text>"#, H - M + 16.0);
    }
    for e in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(10f64.powi(e));
        let _ = writeln!(svg, r#"<text x="{}" y="{y:.1}" text-anchor="end">1e{e}</text>"#, M - 6.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#, W / 2.0, H - 16.0);
    let _ = writeln!(svg, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#, H / 2.0, H / 2.0, escape(ylabel));
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    for (i, (label, data)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = data
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        if coords.is_empty() {
            continue;
        }
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        for c in &coords {
            let (x, y) = c.split_once(',').unwrap();
            let _ = writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let ly = M + 16.0 + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, W - M - 8.0, escape(label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn series_by_k(rows: &[MedianRow], pick: impl Fn(&MedianRow) -> Option<f64>) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut by: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        if let Some(v) = pick(r) {
            by.entry(r.k_index).or_default().push((r.n as f64, v));
        }
    }
    by.into_iter().map(|(k, v)| (format!("k = {k}"), v)).collect()
}

/// Writes all sweep artifacts into `dir` and returns their paths.
pub fn emit_report(
    dir: &Path,
    config: &ExperimentConfig,
    constants: &KernelConstants,
    out: &SweepOutput,
) -> LabResult<Vec<PathBuf>> {
    let csv = records_to_csv(&out.records)?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("sweep.csv");
    std::fs::write(&path, csv)?;
    written.push(path);
    let path = dir.join("trials.csv");
    io::write_rows(&path, &out.trials)?;
    written.push(path);
    let summary = summarize(config, constants, out);
    let path = dir.join("summary.json");
    io::write_json(&path, &summary)?;
    written.push(path);
    let rel = loglog_svg("median relative eigenvalue error", "rel_error", &series_by_k(&summary.medians, |r| r.rel_error));
    let path = dir.join("rel_error.svg");
    std::fs::write(&path, rel)?;
    written.push(path);
    let tl2 = loglog_svg("median eigenvector TL2 distance", "subspace_tl2", &series_by_k(&summary.medians, |r| r.subspace_tl2));
    let path = dir.join("subspace_tl2.svg");
    std::fs::write(&path, tl2)?;
    written.push(path);
    Ok(written)
}
