//! Unsupervised spread scores: mean absolute deviation and dispersion ratio.

use serde::{Deserialize, Serialize};

use super::{FeatureScorer, Method, MethodScore, ScoringInput};
use crate::error::Result;

/// `mean(|x - mean(x)|)`.
pub fn mean_absolute_deviation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).abs()).sum::<f64>() / n
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionFormula {
    /// Arithmetic over geometric mean of `x - min(x) + 1`; at least 1.
    #[default]
    AmGm,
    /// `sqrt(sum (x - mean)^2 / sum s^2)` with `s = x - min(x) + 1`; in [0, 1).
    VarianceRatio,
}

fn shifted(values: &[f64]) -> impl Iterator<Item = f64> + '_ {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    values.iter().map(move |v| v - min + 1.0)
}

/// Arithmetic over geometric mean of strictly positive values, with the
/// geometric mean taken in log space.
pub fn am_gm_ratio(positive: &[f64]) -> f64 {
    if positive.is_empty() {
        return 1.0;
    }
    let n = positive.len() as f64;
    let (sum, log_sum) = positive.iter().fold((0.0, 0.0), |(s, l), v| (s + v, l + v.ln()));
    let am = sum / n;
    let gm = (log_sum / n).exp();
    // AM >= GM holds exactly; clamp rounding noise on constant columns.
    (am / gm).max(1.0)
}

pub fn dispersion_ratio(values: &[f64], formula: DispersionFormula) -> f64 {
    if values.is_empty() {
        return match formula {
            DispersionFormula::AmGm => 1.0,
            DispersionFormula::VarianceRatio => 0.0,
        };
    }
    let n = values.len() as f64;
    match formula {
        DispersionFormula::AmGm => am_gm_ratio(&shifted(values).collect::<Vec<_>>()),
        DispersionFormula::VarianceRatio => {
            let mean = values.iter().sum::<f64>() / n;
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            let total: f64 = shifted(values).map(|s| s * s).sum();
            (ss / total).sqrt()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MeanAbsoluteDeviation;

impl FeatureScorer for MeanAbsoluteDeviation {
    fn method(&self) -> Method {
        Method::Mad
    }

    fn score(&self, input: &ScoringInput) -> Result<MethodScore> {
        input.validate()?;
        let raw = input
            .x
            .columns()
            .into_iter()
            .map(|c| mean_absolute_deviation(&c.to_vec()))
            .collect();
        MethodScore::from_raw(Method::Mad, input.feature_names, raw)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DispersionRatio {
    pub formula: DispersionFormula,
}

impl FeatureScorer for DispersionRatio {
    fn method(&self) -> Method {
        Method::DispersionRatio
    }

    fn score(&self, input: &ScoringInput) -> Result<MethodScore> {
        input.validate()?;
        let raw = input
            .x
            .columns()
            .into_iter()
            .map(|c| dispersion_ratio(&c.to_vec(), self.formula))
            .collect();
        MethodScore::from_raw(Method::DispersionRatio, input.feature_names, raw)
    }
}
