use anyhow::{Context, Result};
use serde_json::json;

use penbias_core::dataset::{format_f64, pixel_indices};
use penbias_core::uv_bias_batch;

use super::{check_bin_widths, print_metrics, write_evaluation_dir, Evaluation};
use crate::{io, InvertUvArgs};

pub fn run(args: &InvertUvArgs) -> Result<()> {
    check_bin_widths(&args.bins)?;
    let loaded = io::load(&args.samples, args.clamp_coherence)?;
    let samples = &loaded.samples;
    let gammas: Vec<f64> = samples.iter().map(|s| s.gamma_mag).collect();
    let kzs: Vec<f64> = samples.iter().map(|s| s.kz).collect();
    let uv = uv_bias_batch(&gammas, &kzs)?;

    let mut w = io::writer(&args.output)?;
    w.write_record(["scene_id", "pixel_index", "bias_uv"])?;
    for ((s, idx), b) in samples.iter().zip(pixel_indices(samples)).zip(&uv.biases) {
        w.write_record([s.scene_id.clone(), idx.to_string(), format_f64(*b)])?;
    }
    w.flush()
        .with_context(|| format!("writing {}", args.output.display()))?;

    match &args.metrics_dir {
        Some(dir) => {
            let zeros = vec![0.0; samples.len()];
            let meta = json!({
                "command": "invert-uv",
                "samples": io::display_paths(&loaded.files),
                "clamp_coherence": args.clamp_coherence,
                "clamped_rows": loaded.n_clamped,
                "n": samples.len(),
            });
            write_evaluation_dir(
                dir,
                &[
                    Evaluation {
                        approach: "Uncorrected".into(),
                        scenario: "-".into(),
                        samples,
                        predicted: &zeros,
                    },
                    Evaluation {
                        approach: "Physical (UV)".into(),
                        scenario: "-".into(),
                        samples,
                        predicted: &uv.biases,
                    },
                ],
                &args.bins,
                meta,
            )?;
        }
        None => {
            let reference: Vec<f64> = samples.iter().map(|s| s.p_ref()).collect();
            print_metrics(
                "Physical (UV)",
                &penbias_core::compute_metrics(&uv.biases, &reference)?,
            );
        }
    }
    if uv.n_clamped > 0 {
        println!("clamped {} coherence magnitudes above 1", uv.n_clamped);
    }
    Ok(())
}
