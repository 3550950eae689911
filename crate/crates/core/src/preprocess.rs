//! Standardization, stratified hold-out splits and stratified k-fold plans.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Column, FlowTable};
use crate::error::{Error, Result};

const MIN_STD: f64 = 1e-12;

/// Per-feature standardization statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub features: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(table: &FlowTable, rows: &[usize]) -> Result<Self> {
        let features = table.feature_names();
        let x = table.take_rows(rows).matrix(&features)?;
        Self::fit_matrix(x.view(), features)
    }

    pub fn fit_matrix(x: ArrayView2<f64>, features: Vec<String>) -> Result<Self> {
        if x.ncols() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: x.ncols(),
            });
        }
        if x.nrows() < 2 {
            return Err(Error::NotEnoughData(format!(
                "scaler needs at least 2 rows, got {}",
                x.nrows()
            )));
        }
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            std.push(if s < MIN_STD { 1.0 } else { s });
        }
        Ok(Scaler { features, mean, std })
    }

    pub fn transform_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    /// Scales the fitted feature columns of `table`; other columns pass through.
    pub fn transform(&self, table: &FlowTable) -> Result<FlowTable> {
        let features = table.feature_names();
        if features != self.features {
            return Err(Error::FeatureMismatch(format!(
                "scaler fitted on {} features, table has {}",
                self.features.len(),
                features.len()
            )));
        }
        let mut cols: Vec<Column> = table.columns().to_vec();
        for col in cols.iter_mut() {
            if let Some(j) = self.features.iter().position(|f| *f == col.name) {
                if let crate::data::ColumnData::Numeric(v) = &mut col.data {
                    let (m, s) = (self.mean[j], self.std[j]);
                    v.iter_mut().for_each(|x| *x = (*x - m) / s);
                }
            }
        }
        FlowTable::new(cols, table.taxonomy().clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratify_on: String,
    pub seed: u64,
}

fn group_rows<T: Ord>(labels: &[T]) -> BTreeMap<&T, Vec<usize>> {
    let mut groups: BTreeMap<&T, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

/// Stratified split of row indices. Each class contributes
/// `round(train_fraction * count)` rows to the training side, clamped so both
/// sides keep at least one row of the class. Outputs are sorted.
pub fn stratified_holdout<T: Ord>(
    labels: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for (_, mut rows) in group_rows(labels) {
        if rows.len() < 2 {
            return Err(Error::NotEnoughData(format!(
                "a class has {} row(s); at least 2 are needed to split",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        let n_train = ((train_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        train.extend_from_slice(&rows[..n_train]);
        valid.extend_from_slice(&rows[n_train..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}

pub fn holdout_split(table: &FlowTable, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels = table
        .label(&spec.stratify_on)
        .or_else(|| table.categorical(&spec.stratify_on))
        .ok_or_else(|| Error::ColumnNotFound(spec.stratify_on.clone()))?;
    stratified_holdout(labels, spec.train_fraction, spec.seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index per row.
    pub assignment: Vec<usize>,
    pub stratified: bool,
    pub seed: u64,
}

impl FoldPlan {
    /// Stratified assignment: rows of each class are shuffled and dealt
    /// round-robin, continuing the deal position across classes so overall
    /// fold sizes also differ by at most one.
    pub fn stratified<T: Ord>(labels: &[T], k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("k must be at least 2, got {k}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = vec![0usize; labels.len()];
        let mut pos = 0usize;
        for (_, mut rows) in group_rows(labels) {
            if rows.len() < k {
                return Err(Error::NotEnoughData(format!(
                    "a class has {} row(s), fewer than k = {k}",
                    rows.len()
                )));
            }
            rows.shuffle(&mut rng);
            for r in rows {
                assignment[r] = pos % k;
                pos += 1;
            }
        }
        Ok(FoldPlan {
            k,
            assignment,
            stratified: true,
            seed,
        })
    }

    /// (train rows, held-out rows) for one fold.
    pub fn fold(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (r, &f) in self.assignment.iter().enumerate() {
            if f == i {
                test.push(r)
            } else {
                train.push(r)
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn kfold(table: &FlowTable, k: usize, stratify_on: &str, seed: u64) -> Result<FoldPlan> {
    let labels = table
        .label(stratify_on)
        .or_else(|| table.categorical(stratify_on))
        .ok_or_else(|| Error::ColumnNotFound(stratify_on.to_string()))?;
    FoldPlan::stratified(labels, k, seed)
}
