//! Feedforward network with sigmoid units on every layer, trained by
//! per-sample backpropagation against mean squared error.
//!
//! Each layer computes `a = sigmoid(W a_prev + b)` with `W` stored row-major
//! as `out × in`. Scalars are `f64` throughout.

mod persist;
mod train;

pub use persist::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{train, train_vectors, TrainReport};

use crate::dataset::{MinMaxScaler, CLASS_COUNT, INPUT_DIM};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Hyperparameters and architecture of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    /// Widths of the hidden layers, input side first.
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Training stops once an epoch's mean loss is at or below this.
    pub target_loss: f64,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
    /// Fit a min-max scaler on the training inputs and store it with the model.
    pub normalize_inputs: bool,
}

impl NetworkConfig {
    /// 6-10-7 defaults for the motor task.
    pub fn motor() -> Self {
        Self {
            input_dim: INPUT_DIM,
            hidden_layers: vec![10],
            output_dim: CLASS_COUNT,
            learning_rate: 0.1,
            max_epochs: 2000,
            target_loss: 1e-3,
            seed: 0,
            shuffle_each_epoch: true,
            normalize_inputs: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden_layers = hidden;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::usage("input and output dimensions must be at least 1"));
        }
        if self.hidden_layers.is_empty() {
            return Err(Error::usage("at least one hidden layer is required"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::usage("hidden layer widths must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::usage("max_epochs must be at least 1"));
        }
        if self.target_loss.is_nan() || self.target_loss < 0.0 {
            return Err(Error::usage(format!(
                "target loss must be non-negative, got {}",
                self.target_loss
            )));
        }
        Ok(())
    }

    /// `[input, hidden..., output]`.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut widths = Vec::with_capacity(self.hidden_layers.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden_layers);
        widths.push(self.output_dim);
        widths
    }
}

/// A dense layer. `weights` is row-major `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::usage("layer dimensions must be at least 1"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::Length {
                expected: in_dim * out_dim,
                actual: weights.len(),
            });
        }
        if biases.len() != out_dim {
            return Err(Error::Length {
                expected: out_dim,
                actual: biases.len(),
            });
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::usage("weights and biases must be finite"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            biases,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.in_dim..(i + 1) * self.in_dim]
    }

    /// `sigmoid(W x + b)`; `x` must already have length `in_dim`.
    fn activate(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|i| {
                let z = self.biases[i] + self.row(i).iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
                sigmoid(z)
            })
            .collect()
    }
}

/// Logistic function `1 / (1 + e^-x)`, evaluated without overflow and kept
/// inside the open interval (0, 1) even when it saturates.
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Mean of squared componentwise differences.
pub fn loss_mse(output: &[f64], target: &[f64]) -> Result<f64> {
    if output.len() != target.len() {
        return Err(Error::Length {
            expected: output.len(),
            actual: target.len(),
        });
    }
    if output.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = output.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum();
    Ok(sum / output.len() as f64)
}

/// Gradient of the loss with respect to one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    /// Row-major, same shape as the layer's weights.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    config: NetworkConfig,
    scaler: Option<MinMaxScaler>,
}

impl Network {
    /// Assembles a network from explicit layers. The dimensions recorded in
    /// `config` are overwritten by those of the layers.
    pub fn from_layers(mut config: NetworkConfig, layers: Vec<Layer>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::usage("a network needs at least one layer"))?;
        for (idx, pair) in layers.windows(2).enumerate() {
            if pair[1].in_dim != pair[0].out_dim {
                return Err(Error::Dimension {
                    layer: idx + 1,
                    reason: format!(
                        "input width {} does not match previous output width {}",
                        pair[1].in_dim, pair[0].out_dim
                    ),
                });
            }
        }
        config.input_dim = first.in_dim;
        config.output_dim = layers[layers.len() - 1].out_dim;
        config.hidden_layers = layers[..layers.len() - 1].iter().map(|l| l.out_dim).collect();
        Ok(Self {
            layers,
            config,
            scaler: None,
        })
    }

    /// Seeded Glorot-uniform weights on `[-r, r]`, `r = sqrt(6 / (fan_in + fan_out))`,
    /// and zero biases.
    pub fn init(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededRng::new(config.seed);
        let widths = config.layer_widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = glorot_bound(fan_in, fan_out);
                let weights = (0..fan_in * fan_out).map(|_| rng.uniform(-bound, bound)).collect();
                Layer {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weights,
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            layers,
            config: config.clone(),
            scaler: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn scaler(&self) -> Option<&MinMaxScaler> {
        self.scaler.as_ref()
    }

    pub fn set_scaler(&mut self, scaler: Option<MinMaxScaler>) -> Result<()> {
        if let Some(s) = &scaler {
            if s.min.len() != self.input_dim() || s.max.len() != self.input_dim() {
                return Err(Error::Dimension {
                    layer: 0,
                    reason: format!("scaler width does not match input width {}", self.input_dim()),
                });
            }
        }
        self.scaler = scaler;
        Ok(())
    }

    /// Total number of weights and biases.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn prepare_input(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                layer: 0,
                reason: format!("input has {} values, expected {}", input.len(), self.input_dim()),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("input values must be finite"));
        }
        Ok(match &self.scaler {
            Some(s) => s.transform(input),
            None => input.to_vec(),
        })
    }

    /// Activations of every layer, input side first; the last entry is the
    /// network output.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        let x = self.prepare_input(input)?;
        Ok(self.forward_prepared(&x))
    }

    fn forward_prepared(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = activations.last().map_or(x, Vec::as_slice);
            let next = layer.activate(prev);
            activations.push(next);
        }
        activations
    }

    /// Output vector only.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut activations = self.forward(input)?;
        Ok(activations.pop().expect("network has at least one layer"))
    }

    /// Loss of the network on one `(input, target)` pair.
    pub fn loss(&self, input: &[f64], target: &[f64]) -> Result<f64> {
        let output = self.predict(input)?;
        self.check_target(target)?;
        loss_mse(&output, target)
    }

    fn check_target(&self, target: &[f64]) -> Result<()> {
        if target.len() != self.output_dim() {
            return Err(Error::Dimension {
                layer: self.layers.len() - 1,
                reason: format!("target has {} values, expected {}", target.len(), self.output_dim()),
            });
        }
        Ok(())
    }

    /// Exact gradients of `loss_mse(forward(input), target)` with respect to
    /// every weight and bias.
    pub fn backprop_gradients(&self, input: &[f64], target: &[f64]) -> Result<Vec<LayerGradient>> {
        let x = self.prepare_input(input)?;
        self.check_target(target)?;
        let activations = self.forward_prepared(&x);
        Ok(self.backprop_prepared(&x, &activations, target))
    }

    fn backprop_prepared(&self, x: &[f64], activations: &[Vec<f64>], target: &[f64]) -> Vec<LayerGradient> {
        let output = &activations[activations.len() - 1];
        let scale = 2.0 / output.len() as f64;
        // delta = dL/dz for the current layer
        let mut delta: Vec<f64> = output
            .iter()
            .zip(target)
            .map(|(&o, &t)| scale * (o - t) * o * (1.0 - o))
            .collect();

        let mut grads = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let prev = if idx == 0 { x } else { activations[idx - 1].as_slice() };
            let mut weights = Vec::with_capacity(layer.weights.len());
            for &d in &delta {
                weights.extend(prev.iter().map(|&a| d * a));
            }
            let next_delta = if idx > 0 {
                (0..layer.in_dim)
                    .map(|j| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(i, &d)| layer.weights[i * layer.in_dim + j] * d)
                            .sum();
                        back * prev[j] * (1.0 - prev[j])
                    })
                    .collect()
            } else {
                Vec::new()
            };
            grads.push(LayerGradient { weights, biases: delta });
            delta = next_delta;
        }
        grads.reverse();
        grads
    }

    /// `W <- W - lr * grad` for every parameter.
    pub fn apply_gradients(&mut self, grads: &[LayerGradient], learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            for (w, dw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= learning_rate * dw;
            }
            for (b, db) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= learning_rate * db;
            }
        }
    }
}

/// Bound of the Glorot-uniform initializer for one layer.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Builds a seeded network for `config`.
pub fn init_weights(config: &NetworkConfig) -> Result<Network> {
    Network::init(config)
}
