use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::forest::ForestConfig;
use super::gbdt::GbdtConfig;
use super::tree::Tree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Forest,
    Gbdt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConfig {
    Forest(ForestConfig),
    Gbdt(GbdtConfig),
}

/// A fitted forest or boosted ensemble.
///
/// Forest: leaves hold class distributions and the prediction is their
/// average over trees. Boosting: `tree_output[t]` names the margin each tree
/// adds to (one margin for binary, one per class otherwise) and
/// probabilities are the sigmoid/softmax of
/// `base_score + learning_rate * sum(tree outputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub kind: EnsembleKind,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    pub tree_output: Vec<usize>,
    pub base_score: Vec<f64>,
    pub learning_rate: f64,
    pub config: ModelConfig,
    /// Boosting only: training log-loss before the first round and after each.
    pub train_loss: Vec<f64>,
}

pub(crate) fn check_training_input(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    feature_names: &[String],
) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::NotEnoughData("empty training matrix".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if feature_names.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: feature_names.len(),
        });
    }
    if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("training matrix entry {bad}")));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {n_classes} classes")));
    }
    let mut seen = vec![false; n_classes];
    y.iter().for_each(|&c| seen[c] = true);
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::NotEnoughData("training labels contain a single class".into()));
    }
    Ok(())
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl TreeEnsembleModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Number of boosting margins: 1 for binary, `n_classes` otherwise.
    pub fn n_outputs(&self) -> usize {
        match self.kind {
            EnsembleKind::Forest => self.n_classes,
            EnsembleKind::Gbdt => self.base_score.len(),
        }
    }

    fn check_dims(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Boosting margins per row (`base_score + lr * sum of tree outputs`).
    pub fn predict_margin(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dims(x)?;
        if self.kind != EnsembleKind::Gbdt {
            return Err(Error::invalid("margins are defined for boosted ensembles only"));
        }
        let k = self.n_outputs();
        let mut out = Array2::zeros((x.nrows(), k));
        let mut buf = Vec::with_capacity(x.ncols());
        for (r, row) in x.rows().into_iter().enumerate() {
            buf.clear();
            buf.extend(row.iter().copied());
            for j in 0..k {
                out[[r, j]] = self.base_score[j];
            }
            for (tree, &o) in self.trees.iter().zip(&self.tree_output) {
                out[[r, o]] += self.learning_rate * tree.predict(&buf)[0];
            }
        }
        Ok(out)
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dims(x)?;
        match self.kind {
            EnsembleKind::Forest => {
                let mut out = Array2::zeros((x.nrows(), self.n_classes));
                if self.trees.is_empty() {
                    return Err(Error::invalid("forest has no trees"));
                }
                let scale = 1.0 / self.trees.len() as f64;
                let mut buf = Vec::with_capacity(x.ncols());
                for (r, row) in x.rows().into_iter().enumerate() {
                    buf.clear();
                    buf.extend(row.iter().copied());
                    for tree in &self.trees {
                        for (c, p) in tree.predict(&buf).iter().enumerate() {
                            out[[r, c]] += p * scale;
                        }
                    }
                }
                Ok(out)
            }
            EnsembleKind::Gbdt => {
                let margin = self.predict_margin(x)?;
                Ok(margin_to_proba(&margin, self.n_classes))
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(x)?))
    }

    /// Total split gain per feature, normalized to sum to one.
    pub fn impurity_importance(&self) -> Result<Vec<f64>> {
        let mut imp = vec![0.0; self.n_features()];
        for tree in &self.trees {
            for (f, g) in tree.split_features() {
                imp[f] += g.max(0.0);
            }
        }
        let total: f64 = imp.iter().sum();
        if total <= 0.0 {
            return Err(Error::NotEnoughData("model contains no splits".into()));
        }
        imp.iter_mut().for_each(|v| *v /= total);
        Ok(imp)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub(crate) fn margin_to_proba(margin: &Array2<f64>, n_classes: usize) -> Array2<f64> {
    let mut out = Array2::zeros((margin.nrows(), n_classes));
    for (r, row) in margin.rows().into_iter().enumerate() {
        if row.len() == 1 {
            let p = sigmoid(row[0]);
            out[[r, 0]] = 1.0 - p;
            out[[r, 1]] = p;
        } else {
            let mut z = row.to_vec();
            softmax_in_place(&mut z);
            for (c, v) in z.into_iter().enumerate() {
                out[[r, c]] = v;
            }
        }
    }
    out
}

pub fn argmax_rows(p: &Array2<f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
