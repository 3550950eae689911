use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::table::{Column, ColumnData, FlowTable};
use super::taxonomy::{ColumnKind, FeatureMeta, Taxonomy};
use crate::error::{Error, Result};

/// Categorical flow attributes that are one-hot encoded before training.
pub const GENIS_CATEGORICAL: [&str; 3] = ["State", "Flags", "Protocol"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub column: String,
    pub reason: String,
}

/// Drops every column the taxonomy marks as excluded. Label columns stay.
///
/// Columns the taxonomy excludes but the table lacks are skipped.
pub fn apply_exclusion_policy(table: &FlowTable) -> (FlowTable, Vec<Removal>) {
    let mut removed = Vec::new();
    let mut kept = Vec::new();
    let (columns, taxonomy) = table.clone().into_parts();
    for col in columns {
        match taxonomy.get(&col.name) {
            Some(meta) if meta.excluded && meta.kind != ColumnKind::Label => {
                let reason = meta.exclusion_reason.clone().unwrap_or_default();
                log::debug!("excluding {} ({reason})", col.name);
                removed.push(Removal {
                    column: col.name,
                    reason,
                });
            }
            _ => kept.push(col),
        }
    }
    let table = FlowTable::new(kept, taxonomy).expect("subset of a valid table is valid");
    (table, removed)
}

/// Category lists learned from one table and applied to others, so that
/// train and test tables share the same encoded columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    pub columns: Vec<(String, Vec<String>)>,
}

impl OneHotEncoder {
    pub fn fit(table: &FlowTable, columns: &[&str]) -> Result<Self> {
        let mut out = Vec::with_capacity(columns.len());
        for &name in columns {
            let col = table
                .column(name)
                .ok_or_else(|| Error::ColumnNotFound(name.to_string()))?;
            let values = match &col.data {
                ColumnData::Categorical(v) => v,
                _ => return Err(Error::NotCategorical(name.to_string())),
            };
            let cats: BTreeSet<&String> = values.iter().collect();
            out.push((name.to_string(), cats.into_iter().cloned().collect()));
        }
        Ok(OneHotEncoder { columns: out })
    }

    /// Replaces each encoded column, in place, by one `<col>=<value>` indicator
    /// column per learned category. Values unseen at fit time encode as all
    /// zeros.
    pub fn transform(&self, table: &FlowTable) -> Result<FlowTable> {
        let (columns, mut taxonomy) = table.clone().into_parts();
        let mut out = Vec::with_capacity(columns.len());
        for col in columns {
            let Some((_, cats)) = self.columns.iter().find(|(n, _)| *n == col.name) else {
                out.push(col);
                continue;
            };
            let values = match &col.data {
                ColumnData::Categorical(v) => v,
                _ => return Err(Error::NotCategorical(col.name.clone())),
            };
            let source = taxonomy
                .get(&col.name)
                .cloned()
                .ok_or_else(|| Error::ColumnNotFound(col.name.clone()))?;
            for cat in cats {
                let name = format!("{}={}", col.name, cat);
                let ind = values.iter().map(|v| f64::from(u8::from(v == cat))).collect();
                let mut meta = FeatureMeta::new(name.clone(), source.category, ColumnKind::Numeric);
                meta.excluded = source.excluded;
                meta.exclusion_reason = source.exclusion_reason.clone();
                taxonomy.insert(meta);
                out.push(Column::numeric(name, ind));
            }
        }
        FlowTable::new(out, taxonomy)
    }
}

/// One-hot encodes the named categorical columns using the categories
/// observed in `table`, in lexicographic order.
pub fn one_hot_encode(table: &FlowTable, columns: &[&str]) -> Result<FlowTable> {
    OneHotEncoder::fit(table, columns)?.transform(table)
}

/// Names from [`GENIS_CATEGORICAL`] present in the table as categorical columns.
pub fn present_categorical<'a>(table: &FlowTable, candidates: &[&'a str]) -> Vec<&'a str> {
    candidates
        .iter()
        .copied()
        .filter(|n| table.categorical(n).is_some())
        .collect()
}

/// Taxonomy restricted to what the table holds, for reports.
pub fn describe(table: &FlowTable) -> Taxonomy {
    let metas = table
        .column_names()
        .filter_map(|n| table.taxonomy().get(n).cloned())
        .collect();
    Taxonomy::new(metas).expect("table columns are unique")
}
