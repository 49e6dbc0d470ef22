use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use penbias_core::{FeatureStats, ModelKind, PredictionModel, TrainConfig};

fn loss_and_grad(c: &mut Criterion) {
    let batch = penbias_bench::scene(256, 50.0);
    let flat: Vec<f64> = batch.iter().flat_map(|s| s.features()).collect();
    let rows = Array2::from_shape_vec((batch.len(), 5), flat).unwrap();
    let stats = FeatureStats::fit(rows.view()).unwrap();
    let mut group = c.benchmark_group("loss_and_grad_256");
    group.sample_size(20);
    for kind in ModelKind::ALL {
        let model = PredictionModel::init(kind, &TrainConfig::default(), stats.clone(), 7).unwrap();
        group.bench_function(kind.to_string(), |b| {
            b.iter(|| model.loss_and_grad(black_box(&batch)))
        });
    }
    group.finish();
}

fn prediction(c: &mut Criterion) {
    let samples = penbias_bench::scene(4096, 50.0);
    let model = PredictionModel::init(
        ModelKind::HybridExp,
        &TrainConfig::default(),
        FeatureStats::identity(5),
        3,
    )
    .unwrap();
    c.bench_function("hybrid-exp predict 4096", |b| {
        b.iter(|| model.predict_biases(black_box(&samples)))
    });
}

criterion_group!(benches, loss_and_grad, prediction);
criterion_main!(benches);
