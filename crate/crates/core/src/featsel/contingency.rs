//! Information gain and chi-squared statistics on bin-by-class tables.

use super::binning::{equal_frequency_bins, BinningConfig};
use super::{FeatureScorer, Method, MethodScore, ScoringInput};
use crate::error::Result;

/// Rows = bins, columns = classes.
pub fn contingency_table(bins: &[usize], y: &[usize], n_classes: usize) -> Vec<Vec<f64>> {
    let n_bins = bins.iter().max().map_or(0, |m| m + 1);
    let mut t = vec![vec![0.0; n_classes]; n_bins];
    for (&b, &c) in bins.iter().zip(y) {
        t[b][c] += 1.0;
    }
    t
}

fn entropy_bits(counts: impl Iterator<Item = f64>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0.0)
        .map(|c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

/// `H(Y) - H(Y | bin)` in bits.
pub fn information_gain(table: &[Vec<f64>]) -> f64 {
    let n_classes = table.first().map_or(0, Vec::len);
    let total: f64 = table.iter().flatten().sum();
    if total == 0.0 {
        return 0.0;
    }
    let class_totals = (0..n_classes).map(|c| table.iter().map(|row| row[c]).sum::<f64>());
    let h_y = entropy_bits(class_totals, total);
    let h_y_given_x: f64 = table
        .iter()
        .map(|row| {
            let nb: f64 = row.iter().sum();
            if nb == 0.0 {
                0.0
            } else {
                nb / total * entropy_bits(row.iter().copied(), nb)
            }
        })
        .sum();
    (h_y - h_y_given_x).max(0.0)
}

/// Pearson chi-squared statistic of independence, `sum (O - E)^2 / E`, over
/// cells with non-zero expected count.
pub fn chi_squared(table: &[Vec<f64>]) -> f64 {
    let n_classes = table.first().map_or(0, Vec::len);
    let total: f64 = table.iter().flatten().sum();
    if total == 0.0 {
        return 0.0;
    }
    let col: Vec<f64> = (0..n_classes).map(|c| table.iter().map(|r| r[c]).sum()).collect();
    let mut stat = 0.0;
    for row in table {
        let rs: f64 = row.iter().sum();
        for (c, &o) in row.iter().enumerate() {
            let e = rs * col[c] / total;
            if e > 0.0 {
                stat += (o - e) * (o - e) / e;
            }
        }
    }
    stat
}

fn score_columns(input: &ScoringInput, binning: BinningConfig, f: fn(&[Vec<f64>]) -> f64) -> Result<Vec<f64>> {
    input
        .x
        .columns()
        .into_iter()
        .map(|col| {
            let bins = equal_frequency_bins(&col.to_vec(), binning)?;
            Ok(f(&contingency_table(&bins, input.y, input.n_classes)))
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct InformationGain {
    pub binning: BinningConfig,
}

impl FeatureScorer for InformationGain {
    fn method(&self) -> Method {
        Method::InfoGain
    }

    fn score(&self, input: &ScoringInput) -> Result<MethodScore> {
        input.validate()?;
        MethodScore::from_raw(Method::InfoGain, input.feature_names, score_columns(input, self.binning, information_gain)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ChiSquared {
    pub binning: BinningConfig,
}

impl FeatureScorer for ChiSquared {
    fn method(&self) -> Method {
        Method::ChiSquared
    }

    fn score(&self, input: &ScoringInput) -> Result<MethodScore> {
        input.validate()?;
        MethodScore::from_raw(Method::ChiSquared, input.feature_names, score_columns(input, self.binning, chi_squared)?)
    }
}
