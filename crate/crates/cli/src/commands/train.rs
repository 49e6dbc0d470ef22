use anyhow::{Context, Result};

use penbias_core::dataset::gather;
use penbias_core::{
    compute_metrics, hold_out_validation, scenario_split, train, ModelFile, ModelKind, PixelSample,
    Scenario, ScenarioSpec, SplitRecord, TrainConfig, TrainingRecord,
};

use super::{print_metrics, UsageError};
use crate::{io, KindArg, ScenarioArg, TrainArgs};

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::HybridExp => ModelKind::HybridExp,
            KindArg::HybridWeibull => ModelKind::HybridWeibull,
            KindArg::Mlp => ModelKind::PureMlp,
        }
    }
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::All => Scenario::All,
            ScenarioArg::Interpolation => Scenario::Interpolation,
            ScenarioArg::Extrapolation => Scenario::Extrapolation,
        }
    }
}

pub fn run(args: &TrainArgs) -> Result<()> {
    if args.interp_lo > args.interp_hi {
        return Err(UsageError("--interp-lo must not exceed --interp-hi".into()).into());
    }
    let kind = ModelKind::from(args.kind);
    let spec = ScenarioSpec::with_thresholds(
        args.scenario.into(),
        (args.interp_lo, args.interp_hi),
        args.extrap_above,
    );
    let config = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        max_epochs: args.epochs,
        patience: args.patience,
        hidden_layers: args.hidden.clone(),
        ..TrainConfig::default()
    };
    config.validate()?;

    let loaded = io::load(&args.samples, args.clamp_coherence)?;
    let samples = &loaded.samples;
    let split = scenario_split(samples, &spec, args.train_fraction, args.seed)?;
    let (fit_idx, val_idx) =
        hold_out_validation(samples, &split.train, args.validation_fraction, args.seed)?;
    let fit_set = gather(samples, &fit_idx);
    let val_set = gather(samples, &val_idx);
    println!(
        "{kind} [{}]: {} training, {} validation, {} test, {} excluded samples",
        spec.kind,
        fit_set.len(),
        val_set.len(),
        split.test.len(),
        split.excluded.len()
    );

    let run = train(kind, &fit_set, &val_set, &config, args.seed)?;
    println!(
        "stopped after {} epochs; best epoch {}",
        run.history.len(),
        run.best_epoch
    );
    for (name, set) in [("train", &fit_set), ("validation", &val_set)] {
        if set.is_empty() {
            continue;
        }
        let predicted = run.model.predict_biases(set)?;
        let reference: Vec<f64> = set.iter().map(PixelSample::p_ref).collect();
        print_metrics(name, &compute_metrics(&predicted, &reference)?);
    }

    let mut record = TrainingRecord::from_run(&config, &run, fit_set.len(), val_set.len());
    record.split = Some(SplitRecord {
        scenario: spec,
        train_fraction: args.train_fraction,
        validation_fraction: args.validation_fraction,
        split_seed: args.seed,
        clamp_coherence: args.clamp_coherence,
    });
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        io::ensure_dir(parent)?;
    }
    ModelFile::new(&run.model, record, args.seed)
        .save(&args.output)
        .with_context(|| format!("saving model to {}", args.output.display()))?;
    println!("wrote {}", args.output.display());
    Ok(())
}
