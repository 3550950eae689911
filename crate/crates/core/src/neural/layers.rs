use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    LstmCell,
    Dropout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub units: usize,
    pub activation: Activation,
    /// Dropout rate; only read for dropout layers.
    #[serde(default)]
    pub rate: f64,
}

impl LayerSpec {
    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            units,
            activation,
            rate: 0.0,
        }
    }

    pub fn lstm(units: usize) -> Self {
        LayerSpec {
            kind: LayerKind::LstmCell,
            units,
            activation: Activation::Tanh,
            rate: 0.0,
        }
    }

    pub fn dropout(rate: f64) -> Self {
        LayerSpec {
            kind: LayerKind::Dropout,
            units: 0,
            activation: Activation::Linear,
            rate,
        }
    }
}

/// Learnable tensors are stored as matrices; biases are `1 x n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        w: Array2<f64>,
        b: Array2<f64>,
        activation: Activation,
    },
    /// Gate blocks are ordered input, forget, cell, output. The cell runs a
    /// single step from a zero state, so `u` never reaches the output; it is
    /// kept so the parameter layout matches a standard LSTM cell.
    LstmCell {
        w: Array2<f64>,
        u: Array2<f64>,
        b: Array2<f64>,
        units: usize,
    },
    Dropout {
        rate: f64,
    },
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit);
    Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng))
}

impl Layer {
    /// Builds a layer for an input of width `input` and returns it with its
    /// output width.
    pub fn init(spec: &LayerSpec, input: usize, rng: &mut ChaCha8Rng) -> Result<(Layer, usize)> {
        match spec.kind {
            LayerKind::Dense | LayerKind::LstmCell if spec.units == 0 => {
                Err(Error::invalid("layer units must be positive"))
            }
            LayerKind::Dense => Ok((
                Layer::Dense {
                    w: glorot(rng, input, spec.units),
                    b: Array2::zeros((1, spec.units)),
                    activation: spec.activation,
                },
                spec.units,
            )),
            LayerKind::LstmCell => {
                let h = spec.units;
                let mut b = Array2::zeros((1, 4 * h));
                b.slice_mut(ndarray::s![.., h..2 * h]).fill(1.0);
                Ok((
                    Layer::LstmCell {
                        w: glorot(rng, input, 4 * h),
                        u: glorot(rng, h, 4 * h),
                        b,
                        units: h,
                    },
                    h,
                ))
            }
            LayerKind::Dropout => {
                if !(0.0..1.0).contains(&spec.rate) {
                    return Err(Error::invalid(format!("dropout rate {} outside [0, 1)", spec.rate)));
                }
                Ok((Layer::Dropout { rate: spec.rate }, input))
            }
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Layer::Dense { w, .. } | Layer::LstmCell { w, .. } => Some(w.nrows()),
            Layer::Dropout { .. } => None,
        }
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        match self {
            Layer::Dense { w, b, .. } => vec![w, b],
            Layer::LstmCell { w, u, b, .. } => vec![w, u, b],
            Layer::Dropout { .. } => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        match self {
            Layer::Dense { w, b, .. } => vec![w, b],
            Layer::LstmCell { w, u, b, .. } => vec![w, u, b],
            Layer::Dropout { .. } => vec![],
        }
    }
}

/// Where dropout masks come from during a forward pass.
pub enum Masks<'a> {
    /// Inference: dropout is the identity.
    Off,
    Sample(&'a mut ChaCha8Rng),
    /// Replays masks recorded by an earlier pass (one per dropout layer).
    Fixed(&'a [Array2<f64>]),
}

pub(crate) enum Cache {
    Dense { x: Array2<f64>, a: Array2<f64> },
    Lstm { x: Array2<f64>, i: Array2<f64>, g: Array2<f64>, o: Array2<f64>, tc: Array2<f64> },
    Dropout { mask: Option<Array2<f64>> },
}

fn sigmoid_mat(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(crate::trees::sigmoid)
}

fn apply_activation(z: &mut Array2<f64>, act: Activation) {
    match act {
        Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
        Activation::Tanh => z.mapv_inplace(f64::tanh),
        Activation::Sigmoid => z.mapv_inplace(crate::trees::sigmoid),
        Activation::Softmax => {
            for mut row in z.rows_mut() {
                let mut v = row.to_vec();
                crate::trees::softmax_in_place(&mut v);
                row.iter_mut().zip(v).for_each(|(d, s)| *d = s);
            }
        }
        Activation::Linear => {}
    }
}

/// Elementwise derivative expressed through the activation output.
fn activation_grad(delta: &mut Array2<f64>, a: &Array2<f64>, act: Activation) -> Result<()> {
    match act {
        Activation::Relu => Zip::from(delta).and(a).for_each(|d, &a| {
            if a <= 0.0 {
                *d = 0.0;
            }
        }),
        Activation::Tanh => Zip::from(delta).and(a).for_each(|d, &a| *d *= 1.0 - a * a),
        Activation::Sigmoid => Zip::from(delta).and(a).for_each(|d, &a| *d *= a * (1.0 - a)),
        Activation::Linear => {}
        Activation::Softmax => return Err(Error::invalid("softmax is only supported on the output layer")),
    }
    Ok(())
}

/// Forward pass through `layers`. With `output_logits`, the last dense layer
/// skips its activation so the loss can fold it in.
pub(crate) fn forward(
    layers: &[Layer],
    x: ArrayView2<f64>,
    masks: &mut Masks,
    output_logits: bool,
) -> Result<(Array2<f64>, Vec<Cache>)> {
    let mut h = x.to_owned();
    let mut caches = Vec::with_capacity(layers.len());
    let mut fixed_idx = 0;
    let last = layers.len().saturating_sub(1);
    for (li, layer) in layers.iter().enumerate() {
        if let Some(d) = layer.input_dim() {
            if h.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: h.ncols(),
                });
            }
        }
        match layer {
            Layer::Dense { w, b, activation } => {
                let mut z = h.dot(w) + b;
                if !(output_logits && li == last) {
                    apply_activation(&mut z, *activation);
                }
                caches.push(Cache::Dense { x: h, a: z.clone() });
                h = z;
            }
            Layer::LstmCell { w, b, units, .. } => {
                let n = *units;
                let gates = h.dot(w) + b;
                let i = sigmoid_mat(&gates.slice(ndarray::s![.., 0..n]).to_owned());
                let g = gates.slice(ndarray::s![.., 2 * n..3 * n]).mapv(f64::tanh);
                let o = sigmoid_mat(&gates.slice(ndarray::s![.., 3 * n..4 * n]).to_owned());
                // c0 = 0, so the forget gate drops out: c = i * g.
                let tc = (&i * &g).mapv(f64::tanh);
                let out = &o * &tc;
                caches.push(Cache::Lstm { x: h, i, g, o, tc });
                h = out;
            }
            Layer::Dropout { rate } => {
                let mask = match masks {
                    Masks::Off => None,
                    _ if *rate == 0.0 => None,
                    Masks::Sample(rng) => {
                        let keep = 1.0 - rate;
                        Some(Array2::from_shape_simple_fn(h.raw_dim(), || {
                            if rng.gen::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        }))
                    }
                    Masks::Fixed(list) => {
                        let m = list
                            .get(fixed_idx)
                            .ok_or_else(|| Error::invalid("not enough fixed dropout masks"))?;
                        fixed_idx += 1;
                        Some(m.clone())
                    }
                };
                if let Some(m) = &mask {
                    h = &h * m;
                }
                caches.push(Cache::Dropout { mask });
            }
        }
    }
    Ok((h, caches))
}

/// Backward pass. `delta` is dLoss/d(output of the last layer), taken before
/// its activation when the forward ran with `output_logits`. Returns one
/// gradient per parameter tensor, in `Layer::params` order.
pub(crate) fn backward(
    layers: &[Layer],
    caches: &[Cache],
    mut delta: Array2<f64>,
    output_logits: bool,
) -> Result<Vec<Vec<Array2<f64>>>> {
    let mut grads: Vec<Vec<Array2<f64>>> = vec![Vec::new(); layers.len()];
    let last = layers.len().saturating_sub(1);
    for li in (0..layers.len()).rev() {
        match (&layers[li], &caches[li]) {
            (Layer::Dense { w, activation, .. }, Cache::Dense { x, a }) => {
                if !(output_logits && li == last) {
                    activation_grad(&mut delta, a, *activation)?;
                }
                let dw = x.t().dot(&delta);
                let db = delta.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dx = delta.dot(&w.t());
                grads[li] = vec![dw, db];
                delta = dx;
            }
            (Layer::LstmCell { w, u, units, .. }, Cache::Lstm { x, i, g, o, tc }) => {
                let n = *units;
                let rows = delta.nrows();
                let d_o = &delta * tc;
                let dc = &delta * o * &tc.mapv(|t| 1.0 - t * t);
                let d_i = &dc * g;
                let d_g = &dc * i;
                let mut dgates = Array2::zeros((rows, 4 * n));
                dgates
                    .slice_mut(ndarray::s![.., 0..n])
                    .assign(&(&d_i * &i.mapv(|v| v * (1.0 - v))));
                dgates
                    .slice_mut(ndarray::s![.., 2 * n..3 * n])
                    .assign(&(&d_g * &g.mapv(|v| 1.0 - v * v)));
                dgates
                    .slice_mut(ndarray::s![.., 3 * n..4 * n])
                    .assign(&(&d_o * &o.mapv(|v| v * (1.0 - v))));
                let dw = x.t().dot(&dgates);
                let du = Array2::zeros(u.raw_dim());
                let db = dgates.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dx = dgates.dot(&w.t());
                grads[li] = vec![dw, du, db];
                delta = dx;
            }
            (Layer::Dropout { .. }, Cache::Dropout { mask }) => {
                if let Some(m) = mask {
                    delta = &delta * m;
                }
            }
            _ => return Err(Error::invalid("layer and cache out of sync")),
        }
    }
    Ok(grads)
}

/// Masks recorded in a cache list, for replay through `Masks::Fixed`.
pub(crate) fn recorded_masks(caches: &[Cache]) -> Vec<Array2<f64>> {
    caches
        .iter()
        .filter_map(|c| match c {
            Cache::Dropout { mask: Some(m) } => Some(m.clone()),
            _ => None,
        })
        .collect()
}
