//! A small dense feed-forward network with explicit reverse-mode gradients
//! and an Adam optimizer. Shared by the hybrid and the pure-MLP estimators.
//!
//! Batches are row-major: one sample per row.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Floor applied to per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    /// Logistic squash of every output into (0, 1).
    UnitIntervalSquash,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layer_sizes: Vec<usize>,
    /// One `(out, in)` matrix per layer.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub activation: Activation,
    pub output_activation: OutputActivation,
}

/// Layer outputs from a forward pass; the first entry is the input batch and
/// the last is the network output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations
            .last()
            .expect("cache holds at least the input")
    }
}

/// Parameter gradients, shaped like the network's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            weights: params
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            biases: params
                .biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }
}

fn flatten(weights: &[Array2<f64>], biases: &[Array1<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in weights.iter().zip(biases) {
        out.extend(w.iter());
        out.extend(b.iter());
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl NetworkParams {
    /// Deterministic initialization: weights uniform in ±1/√fan_in drawn from a
    /// ChaCha stream seeded with `seed`, biases zero. Hidden layers use tanh and
    /// the output is linear until changed.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Dimension(format!(
                "need at least two non-empty layers, got {layer_sizes:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..limit));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation: Activation::Tanh,
            output_activation: OutputActivation::Linear,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_output_activation(mut self, output_activation: OutputActivation) -> Self {
        self.output_activation = output_activation;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated at construction")
    }

    /// Checks layer shapes against `layer_sizes`.
    pub fn validate(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(Error::Dimension(format!(
                "{} layer sizes but {} weight matrices and {} bias vectors",
                n,
                self.weights.len(),
                self.biases.len()
            )));
        }
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            if self.weights[l].dim() != (pair[1], pair[0]) || self.biases[l].len() != pair[1] {
                return Err(Error::Dimension(format!(
                    "layer {l}: expected {}x{} weights, got {:?}",
                    pair[1],
                    pair[0],
                    self.weights[l].dim()
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameters in layer order, each layer's weights (row-major) then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                flat.len()
            )));
        }
        let mut it = flat.iter();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut()
                .chain(b.iter_mut())
                .for_each(|x| *x = *it.next().unwrap());
        }
        Ok(())
    }

    /// Forward pass over a batch, keeping every layer output for backprop.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let n_layers = self.weights.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[l].dot(&w.t());
            z += b;
            if l + 1 < n_layers {
                match self.activation {
                    Activation::Tanh => z.mapv_inplace(f64::tanh),
                    Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
                }
            } else if self.output_activation == OutputActivation::UnitIntervalSquash {
                z.mapv_inplace(sigmoid);
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Output for a single (already standardized) feature vector.
    pub fn forward_one(&self, features: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, features.len()), features)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(self.forward(x)?.output().row(0).to_vec())
    }

    /// Reverse-mode gradients of `Σ d_output ⊙ output` with respect to the
    /// parameters and the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_output: ArrayView2<'_, f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let n_layers = self.weights.len();
        if cache.activations.len() != n_layers + 1 {
            return Err(Error::Dimension(
                "cache does not match network depth".into(),
            ));
        }
        let out = cache.output();
        if d_output.dim() != out.dim() {
            return Err(Error::Dimension(format!(
                "output gradient shape {:?} does not match output {:?}",
                d_output.dim(),
                out.dim()
            )));
        }

        let mut delta = d_output.to_owned();
        if self.output_activation == OutputActivation::UnitIntervalSquash {
            Zip::from(&mut delta)
                .and(out)
                .for_each(|d, &y| *d *= y * (1.0 - y));
        }

        let mut grads = Gradients::zeros_like(self);
        for l in (0..n_layers).rev() {
            let input = &cache.activations[l];
            grads.weights[l] = delta.t().dot(input);
            grads.biases[l] = delta.sum_axis(Axis(0));
            let mut d_prev = delta.dot(&self.weights[l]);
            if l > 0 {
                match self.activation {
                    Activation::Tanh => Zip::from(&mut d_prev)
                        .and(input)
                        .for_each(|d, &a| *d *= 1.0 - a * a),
                    Activation::Relu => Zip::from(&mut d_prev).and(input).for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0
                        }
                    }),
                }
            }
            delta = d_prev;
        }
        Ok((grads, delta))
    }
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        Self {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam update (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
pub fn adam_step(params: &mut NetworkParams, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    };
    for l in 0..params.weights.len() {
        Zip::from(&mut params.weights[l])
            .and(&grads.weights[l])
            .and(&mut state.m.weights[l])
            .and(&mut state.v.weights[l])
            .for_each(update);
        Zip::from(&mut params.biases[l])
            .and(&grads.biases[l])
            .and(&mut state.m.biases[l])
            .and(&mut state.v.biases[l])
            .for_each(update);
    }
}

/// Per-feature mean and standard deviation of the training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Column means and population standard deviations (floored at 1e-8).
    pub fn fit(rows: ArrayView2<'_, f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::Empty(
                "cannot fit feature statistics on zero rows".into(),
            ));
        }
        let n = rows.nrows() as f64;
        let mean: Vec<f64> = rows.columns().into_iter().map(|c| c.sum() / n).collect();
        let std = rows
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| {
                let var = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
                var.sqrt().max(STD_FLOOR)
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(x − mean) / std` elementwise.
    pub fn standardize(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.mean.len() || self.std.len() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "{} features vs statistics of dimension {}",
                features.len(),
                self.mean.len()
            )));
        }
        Ok(features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn standardize_rows(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rows.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "{} features vs statistics of dimension {}",
                rows.ncols(),
                self.dim()
            )));
        }
        let mut out = rows.to_owned();
        for (mut col, (m, s)) in out
            .columns_mut()
            .into_iter()
            .zip(self.mean.iter().zip(&self.std))
        {
            col.mapv_inplace(|x| (x - m) / s);
        }
        Ok(out)
    }
}
