//! Confusion-matrix metrics, timing and model selection.

mod grid;
mod metrics;

use std::time::Instant;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::Classifier;

pub use grid::{grid_search, holdout_search, CandidateScore, GridResult, GridSpec, TieBreak};
pub use metrics::{benign_fpr, binary_metrics, macro_metrics, task_metrics, ClassMetrics, ConfusionMatrix, Metrics};

/// Wall time of `action` on the monotonic clock.
pub fn time_harness<T>(action: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = action();
    (out, start.elapsed().as_secs_f64())
}

pub fn mean_epoch_seconds(epochs: &[f64]) -> Option<f64> {
    if epochs.is_empty() {
        None
    } else {
        Some(epochs.iter().sum::<f64>() / epochs.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Full,
    Selected,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Full => "full",
            FeatureSet::Selected => "selected",
        }
    }
}

/// Test-set evaluation of one model on one feature set. Percentages are in
/// [0, 100]; timings are wall seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub feature_set: FeatureSet,
    pub n_features: usize,
    pub f1s: f64,
    pub acc: f64,
    pub rcl: f64,
    pub prc: f64,
    pub fpr: f64,
    pub tt_seconds: f64,
    pub te_seconds: Option<f64>,
    pub it_seconds: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub warnings: Vec<String>,
}

/// Scores `model` on the test rows, timing a single prediction call.
pub fn evaluate(
    model: &dyn Classifier,
    x_test: ArrayView2<f64>,
    y_test: &[usize],
    classes: &[String],
    benign: usize,
    feature_set: FeatureSet,
    tt_seconds: f64,
) -> Result<EvalReport> {
    let (pred, it_seconds) = time_harness(|| model.predict(x_test));
    let cm = ConfusionMatrix::from_indices(y_test, &pred?, classes)?;
    let m = task_metrics(&cm, benign)?;
    Ok(EvalReport {
        model: model.family().to_string(),
        feature_set,
        n_features: x_test.ncols(),
        f1s: m.f1,
        acc: m.accuracy,
        rcl: m.recall,
        prc: m.precision,
        fpr: m.fpr,
        tt_seconds,
        te_seconds: model.train_log().and_then(|l| mean_epoch_seconds(&l.epoch_seconds)),
        it_seconds,
        per_class: m.per_class,
        confusion: cm,
        warnings: m.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_sanity() {
        let ((), secs) = time_harness(|| std::thread::sleep(std::time::Duration::from_millis(100)));
        assert!((0.1..0.2).contains(&secs), "{secs}");
    }

    #[test]
    fn epoch_mean() {
        assert_eq!(mean_epoch_seconds(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(mean_epoch_seconds(&[]), None);
    }
}
