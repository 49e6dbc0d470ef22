use anyhow::{bail, Context, Result};
use serde_json::json;

use penbias_core::dataset::{format_f64, gather, pixel_indices};
use penbias_core::{scenario_split, ModelFile, Scenario};

use super::{check_bin_widths, write_evaluation_dir, Evaluation, UsageError};
use crate::{io, EvaluateArgs, SubsetArg};

pub const PREDICTIONS_FILE: &str = "predictions.csv";

pub fn run(args: &EvaluateArgs) -> Result<()> {
    check_bin_widths(&args.bins)?;
    let file = ModelFile::load(&args.model)?;
    let model = file.to_model()?;
    let split_record = file.training_config.split.clone();
    let clamp = split_record.as_ref().is_some_and(|s| s.clamp_coherence);
    let loaded = io::load(&args.samples, clamp)?;
    let samples = &loaded.samples;

    let (indices, scenario_label) = match args.subset {
        SubsetArg::All => (
            (0..samples.len()).collect::<Vec<_>>(),
            split_record.as_ref().map_or_else(
                || "-".to_string(),
                |s| format!("{} (all samples)", s.scenario.kind.label()),
            ),
        ),
        SubsetArg::Test | SubsetArg::Excluded => {
            let Some(rec) = &split_record else {
                return Err(UsageError(format!(
                    "{} records no training split; only --subset all is possible",
                    args.model.display()
                ))
                .into());
            };
            let split = scenario_split(samples, &rec.scenario, rec.train_fraction, rec.split_seed)?;
            let idx = if args.subset == SubsetArg::Test {
                split.test
            } else {
                if rec.scenario.kind == Scenario::All {
                    return Err(UsageError("the `all` scenario excludes no scenes".into()).into());
                }
                split.excluded
            };
            let label = if args.subset == SubsetArg::Excluded {
                format!("{} (excluded)", rec.scenario.kind.label())
            } else {
                rec.scenario.kind.label().to_string()
            };
            (idx, label)
        }
    };
    if indices.is_empty() {
        bail!("the selected subset contains no samples");
    }

    let subset = gather(samples, &indices);
    let predicted = model.predict_biases(&subset)?;
    let all_pixel_idx = pixel_indices(samples);

    io::ensure_dir(&args.out_dir)?;
    let path = args.out_dir.join(PREDICTIONS_FILE);
    let mut w = io::writer(&path)?;
    w.write_record([
        "scene_id",
        "pixel_index",
        "bias_pred",
        "p_ref",
        "h_corrected",
        "h_ref",
    ])?;
    for ((s, &i), p) in subset.iter().zip(&indices).zip(&predicted) {
        w.write_record([
            s.scene_id.clone(),
            all_pixel_idx[i].to_string(),
            format_f64(*p),
            format_f64(s.p_ref()),
            format_f64(s.h_insar - p),
            format_f64(s.h_ref),
        ])?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;

    let label = args
        .label
        .clone()
        .unwrap_or_else(|| model.kind.label().to_string());
    let subset_name = match args.subset {
        SubsetArg::Test => "test",
        SubsetArg::Excluded => "excluded",
        SubsetArg::All => "all",
    };
    let meta = json!({
        "command": "evaluate",
        "model": args.model.display().to_string(),
        "model_kind": model.kind,
        "samples": io::display_paths(&loaded.files),
        "subset": subset_name,
        "n": subset.len(),
        "training_config": file.training_config,
        "seed": file.seed,
    });
    write_evaluation_dir(
        &args.out_dir,
        &[Evaluation {
            approach: label,
            scenario: scenario_label,
            samples: &subset,
            predicted: &predicted,
        }],
        &args.bins,
        meta,
    )?;
    Ok(())
}
