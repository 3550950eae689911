use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization for the contingency-table scorers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub n_bins: usize,
}

impl Default for BinningConfig {
    fn default() -> Self {
        BinningConfig { n_bins: 10 }
    }
}

/// Equal-frequency bin index per value.
///
/// Cut points are the order statistics at ranks `q*n/n_bins`, deduplicated;
/// a value's bin is the number of cuts at or below it. Heavy ties collapse
/// bins, so a constant column lands in a single bin.
pub fn equal_frequency_bins(values: &[f64], config: BinningConfig) -> Result<Vec<usize>> {
    if config.n_bins < 2 {
        return Err(Error::invalid("at least 2 bins are required"));
    }
    if values.len() < config.n_bins {
        return Err(Error::NotEnoughData(format!(
            "{} rows for {} bins",
            values.len(),
            config.n_bins
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..config.n_bins).map(|q| sorted[q * n / config.n_bins]).collect();
    cuts.dedup();
    Ok(values
        .iter()
        .map(|&v| cuts.partition_point(|&c| c <= v))
        .collect())
}
