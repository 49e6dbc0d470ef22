pub mod evaluate;
pub mod invert;
pub mod report;
pub mod simulate;
pub mod train;

use std::fmt;
use std::path::Path;

use anyhow::Result;
use serde_json::json;

use penbias_core::dataset::PixelSample;
use penbias_core::evaluation::{elevation_binned_errors, error_histogram, ReportRow};
use penbias_core::{comparison_report, compute_metrics, Error, MetricsReport};

use crate::io;
use crate::DistributionArgs;

/// Invalid invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    let usage = e.chain().any(|c| {
        c.is::<UsageError>()
            || matches!(
                c.downcast_ref::<Error>(),
                Some(Error::Config(_) | Error::Kind(_))
            )
    });
    if usage {
        2
    } else {
        1
    }
}

pub fn print_metrics(label: &str, m: &MetricsReport) {
    let mape = m
        .mape_percent
        .map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"));
    println!(
        "{label}: n={} ME={:.4} MAE={:.4} MAPE={mape} RMSE={:.4} R2={:.4} mu={:.4} sigma={:.4}",
        m.n, m.me, m.mae, m.rmse, m.r2, m.mu, m.sigma
    );
}

/// One labelled set of bias predictions to be written as an evaluation
/// output directory.
pub struct Evaluation<'a> {
    pub approach: String,
    pub scenario: String,
    pub samples: &'a [PixelSample],
    pub predicted: &'a [f64],
}

/// Writes `metrics.csv`, the error histogram and elevation bins of the last
/// entry, and `meta.json` into `dir`.
pub fn write_evaluation_dir(
    dir: &Path,
    evaluations: &[Evaluation<'_>],
    bins: &DistributionArgs,
    mut meta: serde_json::Value,
) -> Result<Vec<MetricsReport>> {
    io::ensure_dir(dir)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for ev in evaluations {
        let reference: Vec<f64> = ev.samples.iter().map(PixelSample::p_ref).collect();
        let metrics = compute_metrics(ev.predicted, &reference)?;
        print_metrics(&format!("{} [{}]", ev.approach, ev.scenario), &metrics);
        reports.push(metrics);
        rows.push(ReportRow {
            approach: ev.approach.clone(),
            scenario: ev.scenario.clone(),
            metrics,
        });
    }
    comparison_report(rows)?.write_csv(dir.join(io::METRICS_FILE))?;

    let last = evaluations.last().expect("at least one evaluation");
    let errors: Vec<f64> = last
        .samples
        .iter()
        .zip(last.predicted)
        .map(|(s, p)| s.p_ref() - p)
        .collect();
    let h_ref: Vec<f64> = last.samples.iter().map(|s| s.h_ref).collect();
    io::write_histogram(
        &dir.join(io::HISTOGRAM_FILE),
        &error_histogram(&errors, bins.hist_bin_width)?,
    )?;
    io::write_elevation_bins(
        &dir.join(io::ELEVATION_FILE),
        &elevation_binned_errors(&h_ref, &errors, bins.bin_width)?,
    )?;

    meta["bin_width"] = json!(bins.bin_width);
    meta["hist_bin_width"] = json!(bins.hist_bin_width);
    meta["tool_version"] = json!(env!("CARGO_PKG_VERSION"));
    io::write_json(&dir.join(io::META_FILE), &meta)?;
    Ok(reports)
}

pub fn check_bin_widths(bins: &DistributionArgs) -> Result<()> {
    for (name, v) in [
        ("--bin-width", bins.bin_width),
        ("--hist-bin-width", bins.hist_bin_width),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(UsageError(format!("{name} must be > 0, got {v}")).into());
        }
    }
    Ok(())
}
