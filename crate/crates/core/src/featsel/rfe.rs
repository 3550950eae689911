use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::{FeatureScorer, Method, MethodScore, ScoringInput};
use crate::error::{Error, Result};
use crate::preprocess::stratified_holdout;
use crate::trees::{fit_random_forest, ForestConfig};

/// Recursive feature elimination driven by random-forest impurity importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfeConfig {
    /// Fraction of the remaining features dropped per round (rounded up).
    pub step: f64,
    pub target: usize,
    pub forest: ForestConfig,
    /// Stratified row cap for the internal forest fits.
    pub max_rows: Option<usize>,
}

impl Default for RfeConfig {
    fn default() -> Self {
        RfeConfig {
            step: 0.1,
            target: 1,
            forest: ForestConfig::default(),
            max_rows: None,
        }
    }
}

/// Runs elimination and returns feature indices in the order they were
/// removed; the survivors come last, weakest first.
pub fn elimination_order(input: &ScoringInput, config: &RfeConfig) -> Result<Vec<usize>> {
    if !(config.step > 0.0 && config.step <= 1.0) {
        return Err(Error::invalid(format!("RFE step must lie in (0, 1], got {}", config.step)));
    }
    if let Some(bad) = input.x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("feature matrix entry {bad}")));
    }
    let d = input.x.ncols();
    let target = config.target.max(1);

    let rows: Vec<usize> = match config.max_rows {
        Some(cap) if cap < input.y.len() => {
            let frac = cap as f64 / input.y.len() as f64;
            stratified_holdout(input.y, frac, config.forest.seed)?.0
        }
        _ => (0..input.y.len()).collect(),
    };
    let x = input.x.select(Axis(0), &rows);
    let y: Vec<usize> = rows.iter().map(|&r| input.y[r]).collect();

    let mut remaining: Vec<usize> = (0..d).collect();
    let mut order = Vec::with_capacity(d);
    while remaining.len() > target {
        let importance = round_importance(&x, &y, input, &remaining, &config.forest)?;
        let mut ranked: Vec<usize> = (0..remaining.len()).collect();
        ranked.sort_by(|&a, &b| importance[a].total_cmp(&importance[b]).then(a.cmp(&b)));
        let n_drop = ((config.step * remaining.len() as f64).ceil() as usize)
            .max(1)
            .min(remaining.len() - target);
        let mut dropped: Vec<usize> = ranked[..n_drop].to_vec();
        order.extend(dropped.iter().map(|&i| remaining[i]));
        dropped.sort_unstable();
        for i in dropped.into_iter().rev() {
            remaining.remove(i);
        }
    }
    if remaining.len() > 1 {
        let importance = round_importance(&x, &y, input, &remaining, &config.forest)?;
        let mut ranked: Vec<usize> = (0..remaining.len()).collect();
        ranked.sort_by(|&a, &b| importance[a].total_cmp(&importance[b]).then(a.cmp(&b)));
        order.extend(ranked.into_iter().map(|i| remaining[i]));
    } else {
        order.extend(remaining);
    }
    Ok(order)
}

fn round_importance(
    x: &ndarray::Array2<f64>,
    y: &[usize],
    input: &ScoringInput,
    features: &[usize],
    forest: &ForestConfig,
) -> Result<Vec<f64>> {
    let sub = x.select(Axis(1), features);
    let names: Vec<String> = features.iter().map(|&f| input.feature_names[f].clone()).collect();
    let model = fit_random_forest(sub.view(), y, input.n_classes, &names, forest)?;
    // A forest without a single split carries no ranking information.
    Ok(model
        .impurity_importance()
        .unwrap_or_else(|_| vec![0.0; features.len()]))
}

#[derive(Debug, Clone, Default)]
pub struct RecursiveElimination {
    pub config: RfeConfig,
}

impl FeatureScorer for RecursiveElimination {
    fn method(&self) -> Method {
        Method::Rfe
    }

    fn score(&self, input: &ScoringInput) -> Result<MethodScore> {
        input.validate()?;
        let d = input.x.ncols();
        let mut raw = vec![1.0; d];
        if d > 1 {
            for (pos, f) in elimination_order(input, &self.config)?.into_iter().enumerate() {
                raw[f] = pos as f64 / (d - 1) as f64;
            }
        }
        MethodScore::from_raw(Method::Rfe, input.feature_names, raw)
    }
}
