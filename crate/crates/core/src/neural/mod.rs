//! Small feed-forward classifiers: a two-hidden-layer MLP and a network
//! whose first layer is an LSTM cell applied once to each flow.

mod layers;
mod optim;
mod train;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::trees::{sigmoid, softmax_in_place};

pub use layers::{Activation, Layer, LayerKind, LayerSpec, Masks};
pub use optim::{Adam, AdamConfig};
pub use train::{fit_network, train, EarlyStopping, StopDecision, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Mlp,
    Lstm,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::Mlp => "mlp",
            Architecture::Lstm => "lstm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub architecture: Architecture,
    /// Widths of the two hidden layers.
    pub hidden: [usize; 2],
    pub dropout: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            architecture: Architecture::Mlp,
            hidden: [128, 64],
            dropout: 0.2,
            adam: AdamConfig::default(),
            batch_size: 32,
            max_epochs: 30,
            patience: 3,
            seed: 0,
        }
    }
}

impl NetConfig {
    pub fn mlp(hidden: [usize; 2]) -> Self {
        NetConfig {
            hidden,
            ..Self::default()
        }
    }

    pub fn lstm(hidden: [usize; 2]) -> Self {
        NetConfig {
            architecture: Architecture::Lstm,
            hidden,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("patience, batch_size and max_epochs must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        self.adam.validate()
    }

    pub fn layer_specs(&self, n_classes: usize) -> Vec<LayerSpec> {
        let [h1, h2] = self.hidden;
        let first = match self.architecture {
            Architecture::Mlp => LayerSpec::dense(h1, Activation::Relu),
            Architecture::Lstm => LayerSpec::lstm(h1),
        };
        vec![
            first,
            LayerSpec::dropout(self.dropout),
            LayerSpec::dense(h2, Activation::Relu),
            LayerSpec::dropout(self.dropout),
            output_spec(n_classes),
        ]
    }
}

/// One sigmoid unit for two classes, a softmax over classes otherwise.
pub fn output_spec(n_classes: usize) -> LayerSpec {
    if n_classes == 2 {
        LayerSpec::dense(1, Activation::Sigmoid)
    } else {
        LayerSpec::dense(n_classes, Activation::Softmax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    BinaryCrossEntropy,
    CrossEntropy,
    /// Half squared error, for linear-output probes.
    SquaredError,
}

/// A stack of layers with the loss implied by its output activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn init(specs: &[LayerSpec], input_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        let last = specs.last().ok_or_else(|| Error::invalid("network has no layers"))?;
        if last.kind != LayerKind::Dense {
            return Err(Error::invalid("the output layer must be dense"));
        }
        let mut rng = stream_rng(seed, 0);
        let mut width = input_dim;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            if spec.activation == Activation::Softmax && !std::ptr::eq(spec, last) {
                return Err(Error::invalid("softmax is only supported on the output layer"));
            }
            let (layer, w) = Layer::init(spec, width, &mut rng)?;
            layers.push(layer);
            width = w;
        }
        Ok(Network { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.iter().find_map(Layer::input_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Dense { w, .. }) => w.ncols(),
            _ => 0,
        }
    }

    pub fn loss_kind(&self) -> Result<LossKind> {
        match self.layers.last() {
            Some(Layer::Dense { activation, .. }) => match activation {
                Activation::Sigmoid => Ok(LossKind::BinaryCrossEntropy),
                Activation::Softmax => Ok(LossKind::CrossEntropy),
                Activation::Linear => Ok(LossKind::SquaredError),
                a => Err(Error::invalid(format!("no loss defined for a {a:?} output"))),
            },
            _ => Err(Error::invalid("the output layer must be dense")),
        }
    }

    /// Activated network output.
    pub fn forward(&self, x: ArrayView2<f64>, masks: &mut Masks) -> Result<Array2<f64>> {
        Ok(layers::forward(&self.layers, x, masks, false)?.0)
    }

    /// Mean loss over the rows of `x`.
    pub fn loss(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>, masks: &mut Masks) -> Result<f64> {
        let (logits, _) = layers::forward(&self.layers, x, masks, true)?;
        Ok(loss_and_delta(logits.view(), targets, self.loss_kind()?)?.0)
    }

    /// Mean loss and its gradient for every parameter tensor, grouped by
    /// layer in `Layer::params` order.
    pub fn gradients(
        &self,
        x: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        masks: &mut Masks,
    ) -> Result<(f64, Vec<Vec<Array2<f64>>>)> {
        let (logits, caches) = layers::forward(&self.layers, x, masks, true)?;
        let (loss, delta) = loss_and_delta(logits.view(), targets, self.loss_kind()?)?;
        Ok((loss, layers::backward(&self.layers, &caches, delta, true)?))
    }

    /// Forward pass that samples dropout masks and returns them for replay.
    pub fn sample_masks(&self, x: ArrayView2<f64>, seed: u64) -> Result<Vec<Array2<f64>>> {
        let mut rng = stream_rng(seed, 0);
        let (_, caches) = layers::forward(&self.layers, x, &mut Masks::Sample(&mut rng), true)?;
        Ok(layers::recorded_masks(&caches))
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(|p| p.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .all(|p| p.iter().all(|v| v.is_finite()))
    }
}

fn log_sum_exp(row: ndarray::ArrayView1<f64>) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean loss and dLoss/dlogits for a batch.
pub(crate) fn loss_and_delta(
    logits: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    kind: LossKind,
) -> Result<(f64, Array2<f64>)> {
    if logits.dim() != targets.dim() {
        return Err(Error::DimensionMismatch {
            expected: logits.ncols(),
            got: targets.ncols(),
        });
    }
    let n = logits.nrows().max(1) as f64;
    let mut total = 0.0;
    let mut delta = Array2::zeros(logits.raw_dim());
    for ((z, t), mut d) in logits.rows().into_iter().zip(targets.rows()).zip(delta.rows_mut()) {
        match kind {
            LossKind::BinaryCrossEntropy => {
                for ((&z, &y), d) in z.iter().zip(t).zip(d.iter_mut()) {
                    total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
                    *d = (sigmoid(z) - y) / n;
                }
            }
            LossKind::CrossEntropy => {
                let lse = log_sum_exp(z);
                total += lse - z.iter().zip(t).map(|(z, y)| z * y).sum::<f64>();
                let mut p = z.to_vec();
                softmax_in_place(&mut p);
                for ((d, p), &y) in d.iter_mut().zip(p).zip(t) {
                    *d = (p - y) / n;
                }
            }
            LossKind::SquaredError => {
                for ((&z, &y), d) in z.iter().zip(t).zip(d.iter_mut()) {
                    total += 0.5 * (z - y) * (z - y);
                    *d = (z - y) / n;
                }
            }
        }
    }
    Ok((total / n, delta))
}

/// Target matrix for class indices: a 0/1 column for a single output,
/// one-hot rows otherwise.
pub fn target_matrix(y: &[usize], n_outputs: usize) -> Array2<f64> {
    let mut t = Array2::zeros((y.len(), n_outputs));
    for (r, &c) in y.iter().enumerate() {
        if n_outputs == 1 {
            t[[r, 0]] = c as f64;
        } else {
            t[[r, c]] = 1.0;
        }
    }
    t
}

/// Largest relative error between backpropagated gradients and central
/// differences, over every parameter. Relative error is
/// `|a - n| / max(|a| + |n|, 1e-6)`, so entries where both are near zero are
/// judged on absolute error.
pub fn numeric_gradient_check(
    network: &Network,
    x: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    masks: &[Array2<f64>],
    epsilon: f64,
) -> Result<f64> {
    let (_, analytic) = network.gradients(x, targets, &mut Masks::Fixed(masks))?;
    let mut probe = network.clone();
    let mut worst: f64 = 0.0;
    for (li, layer_grads) in analytic.iter().enumerate() {
        for (pi, grad) in layer_grads.iter().enumerate() {
            for idx in 0..grad.len() {
                let (r, c) = (idx / grad.ncols(), idx % grad.ncols());
                let original = network.layers[li].params()[pi][[r, c]];
                probe.layers[li].params_mut()[pi][[r, c]] = original + epsilon;
                let plus = probe.loss(x, targets, &mut Masks::Fixed(masks))?;
                probe.layers[li].params_mut()[pi][[r, c]] = original - epsilon;
                let minus = probe.loss(x, targets, &mut Masks::Fixed(masks))?;
                probe.layers[li].params_mut()[pi][[r, c]] = original;
                let numeric = (plus - minus) / (2.0 * epsilon);
                let a = grad[[r, c]];
                let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    Ok(worst)
}

/// A trained classifier with its feature order and class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub config: NetConfig,
    pub network: Network,
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
}

impl NetworkModel {
    pub fn init(config: NetConfig, feature_names: Vec<String>, classes: Vec<String>) -> Result<Self> {
        config.validate()?;
        if classes.len() < 2 {
            return Err(Error::invalid("at least two classes are required"));
        }
        let network = Network::init(&config.layer_specs(classes.len()), feature_names.len(), config.seed)?;
        Ok(NetworkModel {
            config,
            network,
            feature_names,
            classes,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class probabilities, `n_rows x n_classes`, with dropout off.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let out = self.network.forward(x, &mut Masks::Off)?;
        if out.ncols() == 1 {
            let mut p = Array2::zeros((out.nrows(), 2));
            p.column_mut(1).assign(&out.column(0));
            p.column_mut(0).assign(&out.column(0).mapv(|v| 1.0 - v));
            Ok(p)
        } else {
            Ok(out)
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(crate::trees::argmax_rows(&self.predict_proba(x)?))
    }

    /// Mean loss with dropout off.
    pub fn evaluate_loss(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<f64> {
        let t = target_matrix(y, self.network.output_dim());
        self.network.loss(x, t.view(), &mut Masks::Off)
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<f64> {
        let pred = self.predict(x)?;
        let hits = pred.iter().zip(y).filter(|(p, t)| p == t).count();
        Ok(hits as f64 / y.len().max(1) as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: NetworkModel = serde_json::from_str(s)?;
        if !m.network.all_finite() {
            return Err(Error::NonFinite("network weights".into()));
        }
        Ok(m)
    }
}

pub(crate) fn batch_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}
