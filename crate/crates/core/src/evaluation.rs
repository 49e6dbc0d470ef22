//! Accuracy metrics, DEM error distributions and comparison tables.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::format_f64;
use crate::error::{Error, Result};

/// References with smaller magnitude are left out of the MAPE.
pub const MAPE_EXCLUSION: f64 = 1e-6;
pub const DEFAULT_ELEVATION_BIN: f64 = 200.0;
pub const REPORT_HEADER: [&str; 10] = [
    "approach", "scenario", "me", "mae", "mape", "rmse", "r2", "mu", "sigma", "n",
];
/// Written in place of an undefined MAPE.
pub const UNDEFINED: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub me: f64,
    pub mae: f64,
    /// `None` when every reference is below the exclusion threshold.
    pub mape_percent: Option<f64>,
    pub rmse: f64,
    pub r2: f64,
    /// Mean DEM error after correction.
    pub mu: f64,
    /// Population standard deviation of the DEM error after correction.
    pub sigma: f64,
    pub n: usize,
    pub n_mape_excluded: usize,
}

fn check_lengths(a: usize, b: usize, min: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("length mismatch: {a} vs {b}")));
    }
    if a < min {
        return Err(Error::Empty(format!("need at least {min} values, got {a}")));
    }
    Ok(())
}

/// ME, MAE, MAPE, RMSE and R² of `predicted` against `reference` biases.
///
/// `mu` and `sigma` describe the corrected DEM error
/// `(h_insar − predicted) − h_ref = reference − predicted`.
/// With a constant reference, R² is 1 for a perfect fit and −∞ otherwise.
pub fn compute_metrics(predicted: &[f64], reference: &[f64]) -> Result<MetricsReport> {
    check_lengths(predicted.len(), reference.len(), 1)?;
    let n = predicted.len() as f64;
    let mut me = 0.0;
    let mut mae = 0.0;
    let mut sse = 0.0;
    let mut ape = 0.0;
    let mut n_excluded = 0;
    for (&p, &y) in predicted.iter().zip(reference) {
        let d = p - y;
        me += d;
        mae += d.abs();
        sse += d * d;
        if y.abs() < MAPE_EXCLUSION {
            n_excluded += 1;
        } else {
            ape += (d / y).abs();
        }
    }
    let n_mape = predicted.len() - n_excluded;
    let y_mean = reference.iter().sum::<f64>() / n;
    let sst: f64 = reference.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let r2 = if sst > 0.0 {
        1.0 - sse / sst
    } else if sse == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    let errors: Vec<f64> = predicted
        .iter()
        .zip(reference)
        .map(|(p, y)| y - p)
        .collect();
    let (mu, sigma) = mean_std(&errors);
    Ok(MetricsReport {
        me: me / n,
        mae: mae / n,
        mape_percent: (n_mape > 0).then(|| 100.0 * ape / n_mape as f64),
        rmse: (sse / n).sqrt(),
        r2,
        mu,
        sigma,
        n: predicted.len(),
        n_mape_excluded: n_excluded,
    })
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|e| (e - mu) * (e - mu)).sum::<f64>() / n;
    (mu, var.sqrt())
}

/// Mean and population standard deviation of `h_corrected − h_ref`.
pub fn dem_error_stats(h_corrected: &[f64], h_ref: &[f64]) -> Result<(f64, f64)> {
    check_lengths(h_corrected.len(), h_ref.len(), 2)?;
    let e: Vec<f64> = h_corrected.iter().zip(h_ref).map(|(h, r)| h - r).collect();
    Ok(mean_std(&e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElevationBin {
    pub center: f64,
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
}

/// Error statistics per reference-elevation bin. Bins start at the lowest
/// elevation; empty bins are omitted.
pub fn elevation_binned_errors(
    h_ref: &[f64],
    errors: &[f64],
    bin_width: f64,
) -> Result<Vec<ElevationBin>> {
    check_lengths(h_ref.len(), errors.len(), 1)?;
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Domain(format!(
            "bin width must be > 0, got {bin_width}"
        )));
    }
    let lo = h_ref.iter().copied().fold(f64::INFINITY, f64::min);
    let mut bins: HashMap<u64, Vec<f64>> = HashMap::new();
    for (h, e) in h_ref.iter().zip(errors) {
        bins.entry(((h - lo) / bin_width).floor() as u64)
            .or_default()
            .push(*e);
    }
    let mut keys: Vec<u64> = bins.keys().copied().collect();
    keys.sort_unstable();
    Ok(keys
        .into_iter()
        .map(|k| {
            let e = &bins[&k];
            let (mu, sigma) = mean_std(e);
            ElevationBin {
                center: lo + (k as f64 + 0.5) * bin_width,
                mu,
                sigma,
                n: e.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Contiguous histogram on the grid `k·bin_width`, covering all values.
pub fn error_histogram(values: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if values.is_empty() {
        return Err(Error::Empty("histogram of no values".into()));
    }
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Domain(format!(
            "bin width must be > 0, got {bin_width}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("histogram values must be finite".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k0 = (lo / bin_width).floor();
    let n_bins = ((hi / bin_width).floor() - k0) as usize + 1;
    let mut counts = vec![0usize; n_bins];
    for v in values {
        let k = (((v / bin_width).floor() - k0) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            left: (k0 + k as f64) * bin_width,
            right: (k0 + k as f64 + 1.0) * bin_width,
            count,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub approach: String,
    pub scenario: String,
    pub metrics: MetricsReport,
}

/// Approach × scenario table of metrics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), format_f64)
}

/// Builds a report, suffixing repeated (approach, scenario) pairs with ` #2`,
/// ` #3`, ... in input order.
pub fn comparison_report(rows: Vec<ReportRow>) -> Result<ComparisonReport> {
    if rows.is_empty() {
        return Err(Error::Empty(
            "comparison report needs at least one row".into(),
        ));
    }
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let rows = rows
        .into_iter()
        .map(|mut r| {
            let c = seen
                .entry((r.approach.clone(), r.scenario.clone()))
                .or_insert(0);
            *c += 1;
            if *c > 1 {
                r.approach = format!("{} #{}", r.approach, c);
            }
            r
        })
        .collect();
    Ok(ComparisonReport { rows })
}

impl ComparisonReport {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(REPORT_HEADER)
            .map_err(|e| Error::csv(path, e))?;
        for r in &self.rows {
            let m = &r.metrics;
            w.write_record([
                r.approach.clone(),
                r.scenario.clone(),
                format_f64(m.me),
                format_f64(m.mae),
                opt(m.mape_percent),
                format_f64(m.rmse),
                format_f64(m.r2),
                format_f64(m.mu),
                format_f64(m.sigma),
                m.n.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a report CSV. The MAPE exclusion count is not stored and reads
    /// back as zero.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let header = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
        if header.iter().ne(REPORT_HEADER.iter().copied()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header `{}`", REPORT_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let err = |field: &str| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("field `{field}` is not a number"),
            };
            let num = |i: usize| rec[i].parse::<f64>().map_err(|_| err(REPORT_HEADER[i]));
            rows.push(ReportRow {
                approach: rec[0].to_string(),
                scenario: rec[1].to_string(),
                metrics: MetricsReport {
                    me: num(2)?,
                    mae: num(3)?,
                    mape_percent: if &rec[4] == UNDEFINED {
                        None
                    } else {
                        Some(num(4)?)
                    },
                    rmse: num(5)?,
                    r2: num(6)?,
                    mu: num(7)?,
                    sigma: num(8)?,
                    n: rec[9].parse().map_err(|_| err("n"))?,
                    n_mape_excluded: 0,
                },
            });
        }
        Ok(Self { rows })
    }

    /// Fixed-width text rendering with two decimals.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let m = &r.metrics;
                vec![
                    r.approach.clone(),
                    r.scenario.clone(),
                    format!("{:.2}", m.me),
                    format!("{:.2}", m.mae),
                    m.mape_percent
                        .map_or_else(|| UNDEFINED.into(), |v| format!("{v:.2}")),
                    format!("{:.2}", m.rmse),
                    format!("{:.2}", m.r2),
                    format!("{:.2}", m.mu),
                    format!("{:.2}", m.sigma),
                    m.n.to_string(),
                ]
            })
            .collect();
        let titles = [
            "Approach", "Scenario", "ME", "MAE", "MAPE", "RMSE", "R2", "mu", "sigma", "n",
        ];
        let widths: Vec<usize> = (0..titles.len())
            .map(|c| {
                cells
                    .iter()
                    .map(|r| r[c].len())
                    .chain([titles[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let mut line = |row: &[String]| {
            let parts: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    if c < 2 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&titles.map(String::from));
        line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
        for row in &cells {
            line(row);
        }
        out
    }
}
