//! File helpers shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::Value;

use penbias_core::dataset::{format_f64, load_samples_with, PixelSample};
use penbias_core::evaluation::{ElevationBin, HistogramBin};

pub const META_FILE: &str = "meta.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const HISTOGRAM_FILE: &str = "error_histogram.csv";
pub const ELEVATION_FILE: &str = "elevation_bins.csv";
pub const TRUTH_SUFFIX: &str = "_truth.csv";

/// Sample files behind `path`: the file itself, or every `*.csv` in a
/// directory except ground-truth sidecars, sorted by name.
pub fn sample_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).with_context(|| format!("listing {}", path.display()))? {
        let p = entry?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.ends_with(".csv") && !name.ends_with(TRUTH_SUFFIX) {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no sample files in {}", path.display());
    }
    Ok(files)
}

pub struct Loaded {
    pub samples: Vec<PixelSample>,
    pub files: Vec<PathBuf>,
    pub n_clamped: usize,
}

pub fn load(path: &Path, clamp_coherence: bool) -> Result<Loaded> {
    let files = sample_files(path)?;
    let mut samples = Vec::new();
    let mut n_clamped = 0;
    for f in &files {
        let l = load_samples_with(f, clamp_coherence)?;
        n_clamped += l.clamped_lines.len();
        samples.extend(l.samples);
    }
    if samples.is_empty() {
        bail!("{} contains no samples", path.display());
    }
    Ok(Loaded {
        samples,
        files,
        n_clamped,
    })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_histogram(path: &Path, bins: &[HistogramBin]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["bin_left", "bin_right", "count"])?;
    for b in bins {
        w.write_record([format_f64(b.left), format_f64(b.right), b.count.to_string()])?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
}

pub fn write_elevation_bins(path: &Path, bins: &[ElevationBin]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["bin_center", "mu", "sigma", "n"])?;
    for b in bins {
        w.write_record([
            format_f64(b.center),
            format_f64(b.mu),
            format_f64(b.sigma),
            b.n.to_string(),
        ])?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn display_paths(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}
