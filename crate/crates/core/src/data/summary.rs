use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::FlowTable;
use crate::error::{Error, Result};

/// Per-class row counts and percentage shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub label: String,
    pub counts: BTreeMap<String, usize>,
    /// Percent of all rows, per class.
    pub ratios: BTreeMap<String, f64>,
    pub n_rows: usize,
}

impl DatasetSummary {
    pub fn from_counts(label: impl Into<String>, counts: BTreeMap<String, usize>) -> Self {
        let n_rows: usize = counts.values().sum();
        let ratios = counts
            .iter()
            .map(|(k, &c)| {
                let r = if n_rows == 0 {
                    0.0
                } else {
                    100.0 * c as f64 / n_rows as f64
                };
                (k.clone(), r)
            })
            .collect();
        DatasetSummary {
            label: label.into(),
            counts,
            ratios,
            n_rows,
        }
    }

    /// Adds the counts of two summaries over the same label (e.g. train + test).
    pub fn merge(&self, other: &DatasetSummary) -> DatasetSummary {
        let mut counts = self.counts.clone();
        for (k, c) in &other.counts {
            *counts.entry(k.clone()).or_default() += c;
        }
        DatasetSummary::from_counts(self.label.clone(), counts)
    }
}

pub fn summarize(table: &FlowTable, label: &str) -> Result<DatasetSummary> {
    let values = table
        .label(label)
        .or_else(|| table.categorical(label))
        .ok_or_else(|| Error::ColumnNotFound(label.to_string()))?;
    let mut counts = BTreeMap::new();
    for v in values {
        *counts.entry(v.clone()).or_insert(0usize) += 1;
    }
    Ok(DatasetSummary::from_counts(label, counts))
}
