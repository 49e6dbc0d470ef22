//! Trainable bias estimators.
//!
//! Hybrid models predict scattering-profile parameters with a squashed MLP
//! and turn them into a bias through the forward model. The pure MLP
//! regresses the bias directly.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{PixelSample, ScenarioSpec};
use crate::error::{Error, Result};
use crate::forward::{
    exponential_bias, exponential_bias_derivative, weibull_gamma, ForwardOptions,
};
use crate::neural::{
    adam_step, Activation, AdamState, FeatureStats, Gradients, NetworkParams, OutputActivation,
};
use crate::profiles::{ParamRange, ProfileKind};

pub const N_FEATURES: usize = 5;
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "gamma_mag",
    "phase_vol",
    "kz",
    "incidence",
    "backscatter_db",
];
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Relative step of the Weibull finite-difference stencil.
pub const WEIBULL_FD_STEP: f64 = 1e-4;

const PREDICT_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    HybridExp,
    HybridWeibull,
    PureMlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::HybridExp,
        ModelKind::HybridWeibull,
        ModelKind::PureMlp,
    ];

    pub fn profile(self) -> Option<ProfileKind> {
        match self {
            ModelKind::HybridExp => Some(ProfileKind::Exponential),
            ModelKind::HybridWeibull => Some(ProfileKind::Weibull),
            ModelKind::PureMlp => None,
        }
    }

    pub fn output_dim(self) -> usize {
        self.profile().map_or(1, ProfileKind::n_params)
    }

    pub fn output_activation(self) -> OutputActivation {
        match self {
            ModelKind::PureMlp => OutputActivation::Linear,
            _ => OutputActivation::UnitIntervalSquash,
        }
    }

    pub fn default_ranges(self) -> Vec<ParamRange> {
        self.profile()
            .map_or_else(Vec::new, ProfileKind::default_ranges)
    }

    /// Human-readable name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::HybridExp => "Hybrid (Exp)",
            ModelKind::HybridWeibull => "Hybrid (Weibull)",
            ModelKind::PureMlp => "Pure MLP",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::HybridExp => "hybrid-exp",
            ModelKind::HybridWeibull => "hybrid-weibull",
            ModelKind::PureMlp => "mlp",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "hybrid-exp" | "hybrid-exponential" => Ok(ModelKind::HybridExp),
            "hybrid-weibull" => Ok(ModelKind::HybridWeibull),
            "mlp" | "pure-mlp" => Ok(ModelKind::PureMlp),
            other => Err(Error::Kind(format!(
                "unknown model kind `{other}` (expected hybrid-exp, hybrid-weibull or mlp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 1024,
            max_epochs: 200,
            patience: 20,
            hidden_layers: vec![64, 64],
            activation: Activation::Tanh,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch size and epoch count must be >= 1".into(),
            ));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty".into()));
        }
        Ok(())
    }

    pub fn layer_sizes(&self, kind: ModelKind) -> Vec<usize> {
        let mut sizes = vec![N_FEATURES];
        sizes.extend(&self.hidden_layers);
        sizes.push(kind.output_dim());
        sizes
    }
}

/// Network inputs and targets for a set of samples.
#[derive(Debug, Clone)]
struct Batch {
    features: Array2<f64>,
    kz: Vec<f64>,
    target: Vec<f64>,
}

impl Batch {
    fn from_samples<'a>(samples: impl ExactSizeIterator<Item = &'a PixelSample>) -> Self {
        let n = samples.len();
        let mut features = Array2::zeros((n, N_FEATURES));
        let mut kz = Vec::with_capacity(n);
        let mut target = Vec::with_capacity(n);
        for (mut row, s) in features.rows_mut().into_iter().zip(samples) {
            row.assign(&ndarray::ArrayView1::from(&s.features()));
            kz.push(s.kz);
            target.push(s.p_ref());
        }
        Self {
            features,
            kz,
            target,
        }
    }

    fn select(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), idx),
            kz: idx.iter().map(|&i| self.kz[i]).collect(),
            target: idx.iter().map(|&i| self.target[i]).collect(),
        }
    }

    fn len(&self) -> usize {
        self.kz.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionModel {
    pub kind: ModelKind,
    pub network: NetworkParams,
    pub feature_stats: FeatureStats,
    /// Output parameter ranges; empty for the pure MLP.
    pub param_ranges: Vec<ParamRange>,
    pub forward_options: ForwardOptions,
}

impl PredictionModel {
    pub fn new(
        kind: ModelKind,
        network: NetworkParams,
        feature_stats: FeatureStats,
        param_ranges: Vec<ParamRange>,
    ) -> Result<Self> {
        network.validate()?;
        if network.input_dim() != N_FEATURES || feature_stats.dim() != N_FEATURES {
            return Err(Error::Dimension(format!(
                "model needs {N_FEATURES} inputs, network has {} and statistics {}",
                network.input_dim(),
                feature_stats.dim()
            )));
        }
        if network.output_dim() != kind.output_dim() {
            return Err(Error::Dimension(format!(
                "{kind} needs {} outputs, network has {}",
                kind.output_dim(),
                network.output_dim()
            )));
        }
        if network.output_activation != kind.output_activation() {
            return Err(Error::Dimension(format!(
                "{kind} needs output activation {:?}",
                kind.output_activation()
            )));
        }
        let expected = match kind.profile() {
            Some(p) => p.n_params(),
            None => 0,
        };
        if param_ranges.len() != expected {
            return Err(Error::Dimension(format!(
                "{kind} needs {expected} parameter ranges, got {}",
                param_ranges.len()
            )));
        }
        if kind == ModelKind::HybridWeibull {
            let legal = ProfileKind::Weibull.default_ranges();
            for (r, l) in param_ranges.iter().zip(&legal) {
                if !(l.contains(r.lo) && l.contains(r.hi)) {
                    return Err(Error::Domain(format!(
                        "Weibull range [{}, {}] outside [{}, {}]",
                        r.lo, r.hi, l.lo, l.hi
                    )));
                }
            }
        }
        Ok(Self {
            kind,
            network,
            feature_stats,
            param_ranges,
            forward_options: ForwardOptions::default(),
        })
    }

    /// Freshly initialized model with the kind's default parameter ranges.
    pub fn init(
        kind: ModelKind,
        config: &TrainConfig,
        feature_stats: FeatureStats,
        seed: u64,
    ) -> Result<Self> {
        let network = NetworkParams::init(&config.layer_sizes(kind), seed)?
            .with_activation(config.activation)
            .with_output_activation(kind.output_activation());
        Self::new(kind, network, feature_stats, kind.default_ranges())
    }

    fn require_hybrid(&self) -> Result<()> {
        match self.kind {
            ModelKind::PureMlp => Err(Error::Kind("the pure MLP has no profile parameters".into())),
            _ => Ok(()),
        }
    }

    /// Maps squashed network outputs onto the parameter ranges.
    pub fn params_from_output(&self, output: &[f64]) -> Result<Vec<f64>> {
        self.require_hybrid()?;
        if output.len() != self.param_ranges.len() {
            return Err(Error::Dimension(format!(
                "{} outputs vs {} parameter ranges",
                output.len(),
                self.param_ranges.len()
            )));
        }
        Ok(output
            .iter()
            .zip(&self.param_ranges)
            .map(|(y, r)| r.clamp(r.from_unit(*y)))
            .collect())
    }

    pub fn predict_params(&self, sample: &PixelSample) -> Result<Vec<f64>> {
        self.require_hybrid()?;
        let x = self.feature_stats.standardize(&sample.features())?;
        self.params_from_output(&self.network.forward_one(&x)?)
    }

    /// Bias (m) implied by profile parameters at `kz`, with `z0 = 0`.
    pub fn physical_bias(&self, params: &[f64], kz: f64) -> Result<f64> {
        match self.kind {
            ModelKind::HybridExp => Ok(exponential_bias(params[0], kz)),
            ModelKind::HybridWeibull => {
                weibull_bias(params[0], params[1], kz, &self.forward_options)
            }
            ModelKind::PureMlp => Err(Error::Kind("the pure MLP has no physical layer".into())),
        }
    }

    /// Bias and its gradient with respect to the profile parameters.
    pub fn physical_bias_and_grad(&self, params: &[f64], kz: f64) -> Result<(f64, Vec<f64>)> {
        match self.kind {
            ModelKind::HybridExp => Ok((
                exponential_bias(params[0], kz),
                vec![exponential_bias_derivative(params[0], kz)],
            )),
            ModelKind::HybridWeibull => {
                let opts = &self.forward_options;
                let (l, k) = (params[0], params[1]);
                let bias = weibull_bias(l, k, kz, opts)?;
                let hl = WEIBULL_FD_STEP * self.param_ranges[0].width();
                let hk = WEIBULL_FD_STEP * self.param_ranges[1].width();
                let dl = if hl > 0.0 {
                    (weibull_bias(l + hl, k, kz, opts)? - weibull_bias(l - hl, k, kz, opts)?)
                        / (2.0 * hl)
                } else {
                    0.0
                };
                let dk = if hk > 0.0 {
                    (weibull_bias(l, k + hk, kz, opts)? - weibull_bias(l, k - hk, kz, opts)?)
                        / (2.0 * hk)
                } else {
                    0.0
                };
                Ok((bias, vec![dl, dk]))
            }
            ModelKind::PureMlp => Err(Error::Kind("the pure MLP has no physical layer".into())),
        }
    }

    pub fn predict_bias(&self, sample: &PixelSample) -> Result<f64> {
        check_sample(sample)?;
        let x = self.feature_stats.standardize(&sample.features())?;
        let out = self.network.forward_one(&x)?;
        match self.kind {
            ModelKind::PureMlp => Ok(out[0]),
            _ => self.physical_bias(&self.params_from_output(&out)?, sample.kz),
        }
    }

    pub fn predict_biases(&self, samples: &[PixelSample]) -> Result<Vec<f64>> {
        samples.iter().try_for_each(check_sample)?;
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(PREDICT_CHUNK) {
            let batch = Batch::from_samples(chunk.iter());
            out.extend(self.predict_batch(&batch)?);
        }
        Ok(out)
    }

    fn predict_batch(&self, batch: &Batch) -> Result<Vec<f64>> {
        let x = self.feature_stats.standardize_rows(batch.features.view())?;
        self.predict_standardized(x.view(), &batch.kz)
    }

    fn predict_standardized(&self, x: ArrayView2<'_, f64>, kz: &[f64]) -> Result<Vec<f64>> {
        let cache = self.network.forward(x)?;
        let y = cache.output();
        match self.kind {
            ModelKind::PureMlp => Ok(y.column(0).to_vec()),
            _ => y
                .rows()
                .into_iter()
                .zip(kz)
                .map(|(row, &kz)| self.physical_bias(&self.params_from_output(&row.to_vec())?, kz))
                .collect(),
        }
    }

    /// Mean squared error against `h_insar − h_ref` and its gradient with
    /// respect to every network parameter.
    pub fn loss_and_grad(&self, batch: &[PixelSample]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::Empty("loss over an empty batch".into()));
        }
        batch.iter().try_for_each(check_sample)?;
        let b = Batch::from_samples(batch.iter());
        let x = self.feature_stats.standardize_rows(b.features.view())?;
        self.loss_and_grad_standardized(x.view(), &b.kz, &b.target)
    }

    fn loss_and_grad_standardized(
        &self,
        x: ArrayView2<'_, f64>,
        kz: &[f64],
        target: &[f64],
    ) -> Result<(f64, Gradients)> {
        let n = kz.len() as f64;
        let cache = self.network.forward(x)?;
        let y = cache.output();
        let mut d_out = Array2::zeros(y.raw_dim());
        let mut loss = 0.0;
        for (i, row) in y.rows().into_iter().enumerate() {
            match self.kind {
                ModelKind::PureMlp => {
                    let r = row[0] - target[i];
                    loss += r * r;
                    d_out[[i, 0]] = 2.0 * r / n;
                }
                _ => {
                    let params = self.params_from_output(&row.to_vec())?;
                    let (bias, grad) = self.physical_bias_and_grad(&params, kz[i])?;
                    let r = bias - target[i];
                    loss += r * r;
                    for (j, (g, range)) in grad.iter().zip(&self.param_ranges).enumerate() {
                        d_out[[i, j]] = 2.0 * r / n * g * range.width();
                    }
                }
            }
        }
        let (grads, _) = self.network.backward(&cache, d_out.view())?;
        Ok((loss / n, grads))
    }
}

fn weibull_bias(lambda_w: f64, k_w: f64, kz: f64, opts: &ForwardOptions) -> Result<f64> {
    let g = weibull_gamma(lambda_w, k_w, kz, opts)?;
    Ok(g.arg() / kz)
}

fn check_sample(s: &PixelSample) -> Result<()> {
    if !s.features().iter().all(|v| v.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite features in scene `{}`",
            s.scene_id
        )));
    }
    if s.kz <= 0.0 {
        return Err(Error::Domain(format!("kz must be > 0, got {}", s.kz)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    /// Lowest validation loss seen up to and including this epoch.
    pub best_validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: PredictionModel,
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) whose weights were kept.
    pub best_epoch: usize,
}

/// Fits a model with mini-batch Adam and early stopping on validation MSE.
///
/// Feature statistics come from the training samples. When `validation` is
/// empty the training loss drives early stopping instead.
pub fn train(
    kind: ModelKind,
    train: &[PixelSample],
    validation: &[PixelSample],
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("no training samples".into()));
    }
    train.iter().chain(validation).try_for_each(check_sample)?;

    let train_batch = Batch::from_samples(train.iter());
    let stats = FeatureStats::fit(train_batch.features.view())?;
    let mut model = PredictionModel::init(kind, config, stats, seed)?;
    let x_train = model
        .feature_stats
        .standardize_rows(train_batch.features.view())?;
    let val_batch = Batch::from_samples(validation.iter());
    let x_val = model
        .feature_stats
        .standardize_rows(val_batch.features.view())?;

    let mut adam = AdamState::new(&model.network);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_f1ce);
    let mut order: Vec<usize> = (0..train_batch.len()).collect();
    let mut best = (f64::INFINITY, model.network.clone(), 0usize);
    let mut history = Vec::new();
    let mut stale = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let mb = train_batch.select(idx);
            let x = x_train.select(Axis(0), idx);
            let (loss, grads) = model.loss_and_grad_standardized(x.view(), &mb.kz, &mb.target)?;
            if !loss.is_finite() || grads.to_flat().iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: format!("loss {loss}"),
                });
            }
            adam_step(&mut model.network, &grads, &mut adam, config.learning_rate);
            if !model.network.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: "network weights became non-finite".into(),
                });
            }
            sum += loss * idx.len() as f64;
        }
        let train_loss = sum / train_batch.len() as f64;
        let validation_loss = if val_batch.len() > 0 {
            mse(
                &model.predict_standardized(x_val.view(), &val_batch.kz)?,
                &val_batch.target,
            )
        } else {
            train_loss
        };
        if !validation_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: 0,
                detail: format!("validation loss {validation_loss}"),
            });
        }
        if validation_loss < best.0 {
            best = (validation_loss, model.network.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            validation_loss,
            best_validation_loss: best.0,
        });
        log::debug!(
            "{kind} epoch {epoch}: train {train_loss:.6e} validation {validation_loss:.6e}"
        );
        if stale >= config.patience {
            break;
        }
    }
    model.network = best.1;
    Ok(TrainedModel {
        model,
        history,
        best_epoch: best.2,
    })
}

fn mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64
}

/// How the training data was selected, kept so evaluation can rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub scenario: ScenarioSpec,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub split_seed: u64,
    pub clamp_coherence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: TrainConfig,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub train_samples: usize,
    pub validation_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitRecord>,
}

impl TrainingRecord {
    pub fn from_run(
        config: &TrainConfig,
        run: &TrainedModel,
        train_samples: usize,
        validation_samples: usize,
    ) -> Self {
        Self {
            config: config.clone(),
            epochs_run: run.history.len(),
            best_epoch: run.best_epoch,
            best_validation_loss: run
                .history
                .last()
                .map_or(f64::NAN, |h| h.best_validation_loss),
            train_samples,
            validation_samples,
            split: None,
        }
    }
}

/// Versioned on-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model_kind: ModelKind,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub output_activation: OutputActivation,
    /// Per layer, row-major `(out, in)`.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub feature_stats: FeatureStats,
    pub param_ranges: Vec<ParamRange>,
    pub training_config: TrainingRecord,
    pub seed: u64,
}

impl ModelFile {
    pub fn new(model: &PredictionModel, training_config: TrainingRecord, seed: u64) -> Self {
        let net = &model.network;
        Self {
            format_version: MODEL_FORMAT_VERSION,
            model_kind: model.kind,
            layer_sizes: net.layer_sizes.clone(),
            activation: net.activation,
            output_activation: net.output_activation,
            weights: net
                .weights
                .iter()
                .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: net.biases.iter().map(|b| b.to_vec()).collect(),
            feature_stats: model.feature_stats.clone(),
            param_ranges: model.param_ranges.clone(),
            training_config,
            seed,
        }
    }

    pub fn to_model(&self) -> Result<PredictionModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let mut weights = Vec::with_capacity(self.weights.len());
        for (l, w) in self.weights.iter().enumerate() {
            let rows = w.len();
            let cols = w.first().map_or(0, Vec::len);
            if w.iter().any(|r| r.len() != cols) {
                return Err(Error::Format(format!("layer {l} weights are ragged")));
            }
            let flat: Vec<f64> = w.iter().flatten().copied().collect();
            weights.push(
                Array2::from_shape_vec((rows, cols), flat)
                    .map_err(|e| Error::Format(format!("layer {l}: {e}")))?,
            );
        }
        let network = NetworkParams {
            layer_sizes: self.layer_sizes.clone(),
            weights,
            biases: self.biases.iter().map(|b| b.clone().into()).collect(),
            activation: self.activation,
            output_activation: self.output_activation,
        };
        PredictionModel::new(
            self.model_kind,
            network,
            self.feature_stats.clone(),
            self.param_ranges.clone(),
        )
        .map_err(|e| Error::Format(format!("inconsistent model file: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })?;
        match value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
        {
            Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Format(format!(
                "{}: model format version {v} is not supported (expected {MODEL_FORMAT_VERSION})",
                path.display()
            )))
            }
            None => {
                return Err(Error::Format(format!(
                    "{}: missing format_version",
                    path.display()
                )))
            }
        }
        serde_json::from_value(value).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}
