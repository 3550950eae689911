//! Feature taxonomy: which columns exist, what they measure, and which ones
//! must never reach a model.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GENIS_TAXONOMY: &str = include_str!("../../data/genis_taxonomy.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    General,
    TimeBased,
    QuantityBased,
    Hybrid,
    Context,
    Label,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::General,
        Category::TimeBased,
        Category::QuantityBased,
        Category::Hybrid,
        Category::Context,
        Category::Label,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::General => "general",
            Category::TimeBased => "time_based",
            Category::QuantityBased => "quantity_based",
            Category::Hybrid => "hybrid",
            Category::Context => "context",
            Category::Label => "label",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown feature category {s:?}")))
    }
}

/// How a column is stored once loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
}

impl FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "numeric" => Ok(ColumnKind::Numeric),
            "categorical" => Ok(ColumnKind::Categorical),
            "label" => Ok(ColumnKind::Label),
            other => Err(Error::Config(format!("unknown column kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub category: Category,
    pub kind: ColumnKind,
    pub excluded: bool,
    pub exclusion_reason: Option<String>,
}

impl FeatureMeta {
    pub fn new(name: impl Into<String>, category: Category, kind: ColumnKind) -> Self {
        FeatureMeta {
            name: name.into(),
            category,
            kind,
            excluded: false,
            exclusion_reason: None,
        }
    }

    pub fn excluded(mut self, reason: impl Into<String>) -> Self {
        self.excluded = true;
        self.exclusion_reason = Some(reason.into());
        self
    }

    /// Label columns and excluded columns never feed a model.
    pub fn is_model_input(&self) -> bool {
        !self.excluded && self.category != Category::Label && self.kind != ColumnKind::Label
    }
}

#[derive(Debug, Deserialize)]
struct DescriptorRow {
    name: String,
    category: String,
    kind: String,
    excluded: String,
    #[serde(default)]
    reason: String,
}

/// Ordered feature descriptions, looked up by column name.
///
/// Derived one-hot columns (`<col>=<value>`) inherit the category of their
/// source column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    features: Vec<FeatureMeta>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Taxonomy {
    pub fn new(features: Vec<FeatureMeta>) -> Result<Self> {
        let mut index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if index.insert(f.name.clone(), i).is_some() {
                return Err(Error::DuplicateColumn(f.name.clone()));
            }
            if f.kind == ColumnKind::Label && f.category != Category::Label {
                return Err(Error::Config(format!(
                    "label column {} must use the label category",
                    f.name
                )));
            }
        }
        Ok(Taxonomy { features, index })
    }

    /// The bundled GeNIS descriptor: 125 columns, 3 of them labels.
    pub fn genis() -> Self {
        Self::parse(GENIS_TAXONOMY).expect("bundled taxonomy is well-formed")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses a descriptor with header `name,category,kind,excluded,reason`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut features = Vec::new();
        for row in rdr.deserialize::<DescriptorRow>() {
            let row = row?;
            let excluded = match row.excluded.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" | "" => false,
                other => return Err(Error::Config(format!("bad excluded flag {other:?}"))),
            };
            let mut meta = FeatureMeta::new(row.name, row.category.parse()?, row.kind.parse()?);
            if excluded {
                let reason = if row.reason.is_empty() {
                    "excluded by taxonomy".to_string()
                } else {
                    row.reason
                };
                meta = meta.excluded(reason);
            }
            features.push(meta);
        }
        Self::new(features)
    }

    pub fn to_descriptor(&self) -> String {
        let mut out = String::from("name,category,kind,excluded,reason\n");
        for f in &self.features {
            let kind = match f.kind {
                ColumnKind::Numeric => "numeric",
                ColumnKind::Categorical => "categorical",
                ColumnKind::Label => "label",
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.name,
                f.category,
                kind,
                f.excluded,
                f.exclusion_reason.as_deref().unwrap_or("")
            ));
        }
        out
    }

    pub fn features(&self) -> &[FeatureMeta] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn reindex(&mut self) {
        self.index = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i))
            .collect();
    }

    pub fn get(&self, name: &str) -> Option<&FeatureMeta> {
        if self.index.len() != self.features.len() {
            return self.features.iter().find(|f| f.name == name);
        }
        self.index.get(name).map(|&i| &self.features[i])
    }

    /// Category of a column, resolving derived one-hot names to their source.
    pub fn category_of(&self, name: &str) -> Option<Category> {
        self.get(name)
            .or_else(|| name.split_once('=').and_then(|(src, _)| self.get(src)))
            .map(|f| f.category)
    }

    pub fn insert(&mut self, meta: FeatureMeta) {
        if self.index.len() != self.features.len() {
            self.reindex();
        }
        match self.index.get(&meta.name) {
            Some(&i) => self.features[i] = meta,
            None => {
                self.index.insert(meta.name.clone(), self.features.len());
                self.features.push(meta);
            }
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<FeatureMeta> {
        let pos = self.features.iter().position(|f| f.name == name)?;
        let meta = self.features.remove(pos);
        self.reindex();
        Some(meta)
    }

    pub fn count(&self, category: Category) -> usize {
        self.features.iter().filter(|f| f.category == category).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genis_counts() {
        let t = Taxonomy::genis();
        assert_eq!(t.len(), 125);
        assert_eq!(t.count(Category::Label), 3);
        assert_eq!(t.count(Category::General), 17);
        assert_eq!(t.count(Category::QuantityBased), 38);
        assert_eq!(t.count(Category::Context), 29);
        assert_eq!(
            t.count(Category::TimeBased) + t.count(Category::Hybrid),
            125 - 3 - 17 - 38 - 29
        );
    }

    #[test]
    fn genis_exclusions() {
        let t = Taxonomy::genis();
        for name in ["FlowID", "Rank", "Seq", "AutoId", "TcpOpt", "Cause"] {
            let f = t.get(name).unwrap();
            assert!(f.excluded);
            assert_eq!(f.exclusion_reason.as_deref(), Some("exporter artifact"));
        }
        for name in ["Ssaddr", "Sdaddr"] {
            assert_eq!(
                t.get(name).unwrap().exclusion_reason.as_deref(),
                Some("topology-dependent")
            );
        }
        assert!(t
            .features()
            .iter()
            .filter(|f| f.category == Category::Context)
            .all(|f| f.excluded));
        assert!(t
            .features()
            .iter()
            .filter(|f| f.category == Category::Label)
            .all(|f| !f.is_model_input()));
    }

    #[test]
    fn selected_reference_features_are_known() {
        let t = Taxonomy::genis();
        for name in crate::data::reference::BINARY_SELECTION
            .iter()
            .chain(crate::data::reference::MULTICLASS_SELECTION.iter())
        {
            let f = t.get(name).unwrap_or_else(|| panic!("{name} missing"));
            assert!(f.is_model_input(), "{name}");
        }
    }

    #[test]
    fn descriptor_round_trip() {
        let t = Taxonomy::genis();
        let again = Taxonomy::parse(&t.to_descriptor()).unwrap();
        assert_eq!(t.features(), again.features());
    }

    #[test]
    fn derived_columns_inherit_category() {
        let t = Taxonomy::genis();
        assert_eq!(t.category_of("Protocol=tcp"), Some(Category::General));
        assert_eq!(t.category_of("Nope=1"), None);
    }

    #[test]
    fn duplicate_names_rejected() {
        let f = FeatureMeta::new("a", Category::General, ColumnKind::Numeric);
        assert!(matches!(
            Taxonomy::new(vec![f.clone(), f]),
            Err(Error::DuplicateColumn(_))
        ));
    }
}
