use std::time::Instant;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{batch_rows, target_matrix, Adam, Masks, NetConfig, NetworkModel};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Wait,
    Stop,
}

/// Tracks the best validation loss and signals a stop after `patience`
/// consecutive epochs without strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    wait: usize,
    epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience: patience.max(1),
            best: f64::INFINITY,
            best_epoch: None,
            wait: 0,
            epoch: 0,
        }
    }

    pub fn observe(&mut self, val_loss: f64) -> StopDecision {
        let epoch = self.epoch;
        self.epoch += 1;
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = Some(epoch);
            self.wait = 0;
            return StopDecision::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Wait
        }
    }

    /// Zero-based index of the best epoch seen so far.
    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    /// Zero-based index into the per-epoch vectors.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn epochs(&self) -> usize {
        self.val_loss.len()
    }

    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.epoch_seconds.is_empty() {
            0.0
        } else {
            self.epoch_seconds.iter().sum::<f64>() / self.epoch_seconds.len() as f64
        }
    }
}

fn check_split(x: ArrayView2<f64>, y: &[usize], n_features: usize, n_classes: usize, what: &str) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::NotEnoughData(format!("empty {what} set")));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.ncols() != n_features {
        return Err(Error::DimensionMismatch {
            expected: n_features,
            got: x.ncols(),
        });
    }
    if y.iter().any(|&c| c >= n_classes) {
        return Err(Error::invalid(format!("{what} label out of range")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} features")));
    }
    Ok(())
}

/// Mini-batch Adam with best-weights early stopping on validation loss. The
/// returned model carries the weights of `log.best_epoch`.
pub fn train(
    mut model: NetworkModel,
    x_train: ArrayView2<f64>,
    y_train: &[usize],
    x_val: ArrayView2<f64>,
    y_val: &[usize],
) -> Result<(NetworkModel, TrainLog)> {
    let cfg = model.config.clone();
    cfg.validate()?;
    let d = model.network.input_dim();
    let k = model.n_classes();
    check_split(x_train, y_train, d, k, "training")?;
    check_split(x_val, y_val, d, k, "validation")?;

    let targets = target_matrix(y_train, model.network.output_dim());
    let mut order_rng = stream_rng(cfg.seed, 1);
    let mut dropout_rng = stream_rng(cfg.seed, 2);
    let mut adam = Adam::new(cfg.adam, &model.network.layers);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.network.clone();
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..x_train.nrows()).collect();

    for _ in 0..cfg.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = batch_rows(x_train, batch);
            let tb = batch_rows(targets.view(), batch);
            let (loss, grads) = model
                .network
                .gradients(xb.view(), tb.view(), &mut Masks::Sample(&mut dropout_rng))?;
            adam.step(&mut model.network.layers, &grads);
            loss_sum += loss * batch.len() as f64;
        }
        let val_loss = model.evaluate_loss(x_val, y_val)?;
        let val_acc = model.accuracy(x_val, y_val)?;
        log.train_loss.push(loss_sum / order.len() as f64);
        log.val_loss.push(val_loss);
        log.val_accuracy.push(val_acc);
        log.epoch_seconds.push(start.elapsed().as_secs_f64());
        match stopper.observe(val_loss) {
            StopDecision::Improved => best = model.network.clone(),
            StopDecision::Wait => {}
            StopDecision::Stop => {
                log.stopped_early = true;
                break;
            }
        }
    }
    if !best.all_finite() {
        return Err(Error::NonFinite("trained network weights".into()));
    }
    log.best_epoch = stopper.best_epoch().unwrap_or(0);
    model.network = best;
    Ok((model, log))
}

pub fn fit_network(
    config: NetConfig,
    feature_names: Vec<String>,
    classes: Vec<String>,
    x_train: ArrayView2<f64>,
    y_train: &[usize],
    x_val: ArrayView2<f64>,
    y_val: &[usize],
) -> Result<(NetworkModel, TrainLog)> {
    train(NetworkModel::init(config, feature_names, classes)?, x_train, y_train, x_val, y_val)
}
