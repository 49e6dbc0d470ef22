use anyhow::{Context, Result};

use penbias_core::{comparison_report, ComparisonReport};

use super::UsageError;
use crate::{io, ReportArgs};

type BinWidths = (Option<f64>, Option<f64>);

fn bin_widths(dir: &std::path::Path) -> Result<BinWidths> {
    let meta = io::read_json(&dir.join(io::META_FILE))?;
    Ok((meta["bin_width"].as_f64(), meta["hist_bin_width"].as_f64()))
}

pub fn run(args: &ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    let mut widths: Option<(BinWidths, &std::path::Path)> = None;
    for dir in &args.inputs {
        let w = bin_widths(dir)?;
        match widths {
            Some((first, first_dir)) if first != w => {
                return Err(UsageError(format!(
                    "mixed bin widths: {} uses {:?} but {} uses {:?}",
                    first_dir.display(),
                    first,
                    dir.display(),
                    w
                ))
                .into());
            }
            None => widths = Some((w, dir)),
            _ => {}
        }
        let path = dir.join(io::METRICS_FILE);
        let part = ComparisonReport::read_csv(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        rows.extend(part.rows);
    }
    let report = comparison_report(rows)?;
    report.write_csv(&args.out_csv)?;
    let text = report.to_text();
    if let Some(p) = &args.out_text {
        std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    print!("{text}");
    Ok(())
}
