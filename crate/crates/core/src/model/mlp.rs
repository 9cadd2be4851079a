//! Fully connected network with a sigmoid output trained on binary
//! cross-entropy with Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::{Dataset, ModelError};

/// Probabilities are clamped to `[LOSS_CLAMP, 1 - LOSS_CLAMP]` inside the loss only.
pub const LOSS_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![100],
            activation: Activation::Relu,
            adam: AdamConfig::default(),
            batch_size: 32,
            epochs: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *slot = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn bce(p: f64, y: u8) -> f64 {
    let p = p.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    activation: Activation,
    layers: Vec<Dense>,
}

/// A fitted network and its full-pass training loss after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpFit {
    pub model: Mlp,
    pub epoch_losses: Vec<f64>,
}

struct Grads {
    weights: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
}

impl Grads {
    fn zeros(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|g| g.fill(0.0));
    }
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` weights and zero biases.
    pub fn init(input_width: usize, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut sizes = vec![input_width];
        sizes.extend(&config.hidden_layers);
        sizes.push(1);
        let layers = sizes.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Self {
            activation: config.activation,
            layers,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    /// Set the output layer's weights and bias to zero.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("network has an output layer");
        last.weights.fill(0.0);
        last.bias.fill(0.0);
    }

    /// Per-layer outputs; `acts[0]` is the input and the last entry holds the
    /// sigmoid probability.
    fn forward_into(&self, x: &[f64], acts: &mut [Vec<f64>]) {
        acts[0].copy_from_slice(x);
        let n = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let (lo, hi) = acts.split_at_mut(l + 1);
            let out = &mut hi[0];
            layer.forward(&lo[l], out);
            if l + 1 < n {
                out.iter_mut().for_each(|z| *z = self.activation.apply(*z));
            } else {
                out[0] = sigmoid(out[0]);
            }
        }
    }

    fn scratch(&self) -> Vec<Vec<f64>> {
        let mut acts = vec![vec![0.0; self.input_width()]];
        acts.extend(self.layers.iter().map(|l| vec![0.0; l.outputs]));
        acts
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut acts = self.scratch();
        self.forward_into(x, &mut acts);
        acts.last().expect("output layer")[0]
    }

    /// Mean clamped cross-entropy over `rows`.
    pub fn loss(&self, data: &Dataset, rows: &[usize]) -> f64 {
        let mut acts = self.scratch();
        let total: f64 = rows
            .iter()
            .map(|&i| {
                self.forward_into(&data.features[i], &mut acts);
                bce(acts.last().expect("output layer")[0], data.labels[i])
            })
            .sum();
        total / rows.len() as f64
    }

    /// All weights and biases, layer by layer (weights row-major, then bias).
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    /// A copy with parameters replaced, in [`Mlp::parameters`] order.
    pub fn with_parameters(&self, params: &[f64]) -> Self {
        let mut out = self.clone();
        let mut it = params.iter().copied();
        for l in &mut out.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| {
                *p = it.next().expect("parameter vector too short");
            });
        }
        assert!(it.next().is_none(), "parameter vector too long");
        out
    }

    /// Analytic gradient of [`Mlp::loss`] over `rows`, in [`Mlp::parameters`] order.
    pub fn gradient(&self, data: &Dataset, rows: &[usize]) -> Vec<f64> {
        let mut grads = Grads::zeros(self);
        self.backprop(data, rows, &mut grads);
        grads
            .weights
            .iter()
            .zip(&grads.bias)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    /// Accumulate the gradient of the mean loss over `rows` into `grads`;
    /// returns the mean loss.
    fn backprop(&self, data: &Dataset, rows: &[usize], grads: &mut Grads) -> f64 {
        let mut acts = self.scratch();
        let mut delta: Vec<f64> = Vec::new();
        let mut prev_delta: Vec<f64> = Vec::new();
        let scale = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        for &i in rows {
            self.forward_into(&data.features[i], &mut acts);
            let p = acts.last().expect("output layer")[0];
            let y = data.labels[i];
            loss += bce(p, y);
            // d(loss)/d(pre-sigmoid) for the unclamped cross-entropy
            delta.clear();
            delta.push((p - f64::from(y)) * scale);
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &acts[l];
                let gw = &mut grads.weights[l];
                for (o, d) in delta.iter().enumerate() {
                    grads.bias[l][o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
                }
                if l == 0 {
                    break;
                }
                prev_delta.clear();
                prev_delta.resize(layer.inputs, 0.0);
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    prev_delta.iter_mut().zip(row).for_each(|(pd, w)| *pd += w * d);
                }
                for (pd, a) in prev_delta.iter_mut().zip(input) {
                    *pd *= self.activation.derivative_from_output(*a);
                }
                std::mem::swap(&mut delta, &mut prev_delta);
            }
        }
        loss * scale
    }

    /// Train from a seeded initialization with a seeded per-epoch shuffle.
    pub fn fit(data: &Dataset, config: &TrainConfig) -> Result<MlpFit, ModelError> {
        data.require_nonempty()?;
        if config.batch_size == 0 {
            return Err(ModelError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if config.hidden_layers.contains(&0) {
            return Err(ModelError::InvalidConfig("hidden layers need at least one unit".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut net = Mlp::init(data.width(), config, &mut rng);
        let slots: Vec<usize> = net
            .layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        let mut adam = Adam::new(config.adam, &slots);
        let mut grads = Grads::zeros(&net);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let all: Vec<usize> = order.clone();
        let mut epoch_losses = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            for (batch, rows) in order.chunks(config.batch_size).enumerate() {
                grads.clear();
                let loss = net.backprop(data, rows, &mut grads);
                if !loss.is_finite() {
                    return Err(ModelError::NonFiniteLoss { epoch, batch, loss });
                }
                adam.begin_step();
                for (l, layer) in net.layers.iter_mut().enumerate() {
                    adam.update(2 * l, &mut layer.weights, &grads.weights[l]);
                    adam.update(2 * l + 1, &mut layer.bias, &grads.bias[l]);
                }
            }
            let loss = net.loss(data, &all);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    batch: usize::MAX,
                    loss,
                });
            }
            log::debug!("mlp epoch {} loss {loss:.6}", epoch + 1);
            epoch_losses.push(loss);
        }
        Ok(MlpFit {
            model: net,
            epoch_losses,
        })
    }
}
