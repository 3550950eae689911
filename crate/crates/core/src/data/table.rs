use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::taxonomy::{Category, ColumnKind, FeatureMeta, Taxonomy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
    Label(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) | ColumnData::Label(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
            ColumnData::Label(_) => ColumnKind::Label,
        }
    }

    fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
            ColumnData::Label(v) => ColumnData::Label(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            ColumnData::Numeric(v) => format!("{}", v[row]),
            ColumnData::Categorical(v) | ColumnData::Label(v) => v[row].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<String>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical(values),
        }
    }

    pub fn label(name: impl Into<String>, values: Vec<String>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Label(values),
        }
    }
}

/// Column-oriented flow dataset.
///
/// Construction validates that every column has `n_rows` entries, names are
/// unique, numeric cells are finite, and every column is described by the
/// taxonomy. The table is immutable afterwards; transformations return new
/// tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTable {
    columns: Vec<Column>,
    n_rows: usize,
    taxonomy: Taxonomy,
}

/// Outcome of reading a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub table: FlowTable,
    pub dropped_rows: usize,
    pub unknown_columns: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Number of header columns absent from the taxonomy that are tolerated.
    /// Tolerated columns are kept as excluded categorical columns.
    pub max_unknown_columns: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            max_unknown_columns: 0,
        }
    }
}

impl FlowTable {
    pub fn new(columns: Vec<Column>, taxonomy: Taxonomy) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.data.len());
        let mut seen = HashSet::new();
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::DuplicateColumn(col.name.clone()));
            }
            if col.data.len() != n_rows {
                return Err(Error::DimensionMismatch {
                    expected: n_rows,
                    got: col.data.len(),
                });
            }
            if let ColumnData::Numeric(v) = &col.data {
                if let Some(bad) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("{}[{bad}]", col.name)));
                }
            }
            if taxonomy.get(&col.name).is_none() {
                return Err(Error::FeatureMismatch(format!(
                    "column {} has no taxonomy entry",
                    col.name
                )));
            }
        }
        Ok(FlowTable {
            columns,
            n_rows,
            taxonomy,
        })
    }

    /// Builds a table from columns, describing any column missing from
    /// `taxonomy` with the given fallback category.
    pub fn with_fallback_taxonomy(
        columns: Vec<Column>,
        mut taxonomy: Taxonomy,
        fallback: Category,
    ) -> Result<Self> {
        for col in &columns {
            if taxonomy.get(&col.name).is_none() {
                let category = if col.data.kind() == ColumnKind::Label {
                    Category::Label
                } else {
                    fallback
                };
                taxonomy.insert(FeatureMeta::new(col.name.clone(), category, col.data.kind()));
            }
        }
        Self::new(columns, taxonomy)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column(name).is_some()
    }

    pub fn numeric(&self, name: &str) -> Option<&[f64]> {
        match &self.column(name)?.data {
            ColumnData::Numeric(v) => Some(v),
            _ => None,
        }
    }

    pub fn categorical(&self, name: &str) -> Option<&[String]> {
        match &self.column(name)?.data {
            ColumnData::Categorical(v) => Some(v),
            _ => None,
        }
    }

    pub fn label(&self, name: &str) -> Option<&[String]> {
        match &self.column(name)?.data {
            ColumnData::Label(v) => Some(v),
            _ => None,
        }
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Numeric columns usable as model inputs, in table order.
    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| matches!(c.data, ColumnData::Numeric(_)))
            .filter(|c| self.taxonomy.get(&c.name).is_some_and(|m| m.is_model_input()))
            .map(|c| c.name.clone())
            .collect()
    }

    /// Row-major matrix of the named numeric columns.
    pub fn matrix(&self, names: &[String]) -> Result<Array2<f64>> {
        let cols = names
            .iter()
            .map(|n| {
                self.numeric(n).ok_or_else(|| match self.column(n) {
                    Some(_) => Error::FeatureMismatch(format!("{n} is not numeric")),
                    None => Error::ColumnNotFound(n.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Array2::from_shape_fn((self.n_rows, names.len()), |(r, c)| cols[c][r]))
    }

    pub fn take_rows(&self, rows: &[usize]) -> FlowTable {
        FlowTable {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.take(rows),
                })
                .collect(),
            n_rows: rows.len(),
            taxonomy: self.taxonomy.clone(),
        }
    }

    /// Rows of `self` followed by rows of `other`. Both tables must hold the
    /// same columns in the same order with the same kinds.
    pub fn concat(&self, other: &FlowTable) -> Result<FlowTable> {
        let names = |t: &FlowTable| t.columns.iter().map(|c| (c.name.clone(), c.data.kind())).collect::<Vec<_>>();
        if names(self) != names(other) {
            return Err(Error::FeatureMismatch("tables hold different columns".into()));
        }
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| {
                let data = match (&a.data, &b.data) {
                    (ColumnData::Numeric(x), ColumnData::Numeric(y)) => ColumnData::Numeric([x.as_slice(), y].concat()),
                    (ColumnData::Categorical(x), ColumnData::Categorical(y)) => {
                        ColumnData::Categorical([x.as_slice(), y].concat())
                    }
                    (ColumnData::Label(x), ColumnData::Label(y)) => ColumnData::Label([x.as_slice(), y].concat()),
                    _ => unreachable!("kinds compared above"),
                };
                Column {
                    name: a.name.clone(),
                    data,
                }
            })
            .collect();
        Ok(FlowTable {
            columns,
            n_rows: self.n_rows + other.n_rows,
            taxonomy: self.taxonomy.clone(),
        })
    }

    pub(crate) fn into_parts(self) -> (Vec<Column>, Taxonomy) {
        (self.columns, self.taxonomy)
    }

    pub fn load_csv(path: impl AsRef<Path>, taxonomy: &Taxonomy, opts: LoadOptions) -> Result<Loaded> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, taxonomy, opts)
    }

    /// Parses CSV text. Rows whose numeric cells fail to parse (or parse to a
    /// non-finite value) are dropped and counted.
    pub fn read_csv<R: Read>(reader: R, taxonomy: &Taxonomy, opts: LoadOptions) -> Result<Loaded> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(h) => h?,
            None => return Err(Error::EmptyInput),
        };
        let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
        if names.iter().all(|n| n.is_empty()) {
            return Err(Error::EmptyInput);
        }

        let mut table_taxonomy = Taxonomy::default();
        let mut unknown = Vec::new();
        let mut kinds = Vec::with_capacity(names.len());
        for name in &names {
            let meta = match taxonomy.get(name) {
                Some(m) => m.clone(),
                None => {
                    unknown.push(name.clone());
                    FeatureMeta::new(name.clone(), Category::General, ColumnKind::Categorical)
                        .excluded("unknown column")
                }
            };
            kinds.push(meta.kind);
            table_taxonomy.insert(meta);
        }
        if unknown.len() > opts.max_unknown_columns {
            return Err(Error::UnknownColumns {
                count: unknown.len(),
                allowed: opts.max_unknown_columns,
                names: unknown,
            });
        }
        for u in &unknown {
            log::warn!("column {u} is not in the taxonomy; kept as excluded");
        }

        let mut data: Vec<ColumnData> = kinds
            .iter()
            .map(|k| match k {
                ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
                ColumnKind::Categorical => ColumnData::Categorical(Vec::new()),
                ColumnKind::Label => ColumnData::Label(Vec::new()),
            })
            .collect();

        let mut dropped = 0usize;
        let mut parsed: Vec<Option<f64>> = vec![None; names.len()];
        for record in records {
            let record = record?;
            let mut ok = true;
            for (i, kind) in kinds.iter().enumerate() {
                if *kind == ColumnKind::Numeric {
                    let v = record.get(i).unwrap_or("").trim().parse::<f64>().ok();
                    match v {
                        Some(x) if x.is_finite() => parsed[i] = Some(x),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if !ok {
                dropped += 1;
                continue;
            }
            for (i, col) in data.iter_mut().enumerate() {
                match col {
                    ColumnData::Numeric(v) => v.push(parsed[i].expect("parsed above")),
                    ColumnData::Categorical(v) | ColumnData::Label(v) => {
                        v.push(record.get(i).unwrap_or("").trim().to_string())
                    }
                }
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} row(s) with unparseable numeric cells");
        }

        let columns = names
            .into_iter()
            .zip(data)
            .map(|(name, data)| Column { name, data })
            .collect();
        Ok(Loaded {
            table: FlowTable::new(columns, table_taxonomy)?,
            dropped_rows: dropped,
            unknown_columns: unknown,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.column_names())?;
        let mut row = Vec::with_capacity(self.columns.len());
        for r in 0..self.n_rows {
            row.clear();
            row.extend(self.columns.iter().map(|c| c.data.cell(r)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
