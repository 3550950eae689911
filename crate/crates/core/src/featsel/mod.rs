//! Feature scoring and the normalize-and-sum selection ensemble.
//!
//! Five scorers share the [`FeatureScorer`] trait and are looked up by name
//! through a [`ScorerRegistry`]. Each produces raw scores that are min-max
//! normalized; the per-feature sum ranks the features and the top `k` are
//! selected.

mod binning;
mod contingency;
mod dispersion;
mod rfe;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FlowTable;
use crate::error::{Error, Result};

pub use binning::{equal_frequency_bins, BinningConfig};
pub use contingency::{chi_squared, contingency_table, information_gain, ChiSquared, InformationGain};
pub use dispersion::{am_gm_ratio, dispersion_ratio, mean_absolute_deviation, DispersionFormula, DispersionRatio, MeanAbsoluteDeviation};
pub use rfe::{elimination_order, RecursiveElimination, RfeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    InfoGain,
    ChiSquared,
    Rfe,
    Mad,
    DispersionRatio,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::InfoGain,
        Method::ChiSquared,
        Method::Rfe,
        Method::Mad,
        Method::DispersionRatio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::InfoGain => "info_gain",
            Method::ChiSquared => "chi_squared",
            Method::Rfe => "rfe",
            Method::Mad => "mad",
            Method::DispersionRatio => "dispersion_ratio",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown selection method {s:?}")))
    }
}

/// Borrowed view of a scoring problem: a dense feature matrix, encoded labels
/// and the matching column names.
#[derive(Debug, Clone, Copy)]
pub struct ScoringInput<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [usize],
    pub n_classes: usize,
    pub feature_names: &'a [String],
}

impl<'a> ScoringInput<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &'a [usize], n_classes: usize, feature_names: &'a [String]) -> Self {
        ScoringInput {
            x,
            y,
            n_classes,
            feature_names,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.ncols() == 0 {
            return Err(Error::invalid("no features to score"));
        }
        if self.x.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        if self.feature_names.len() != self.x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.x.ncols(),
                got: self.feature_names.len(),
            });
        }
        if self.y.len() != self.x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.x.nrows(),
                got: self.y.len(),
            });
        }
        if let Some(&c) = self.y.iter().find(|&&c| c >= self.n_classes) {
            return Err(Error::invalid(format!("label {c} out of range for {} classes", self.n_classes)));
        }
        if let Some(bad) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature matrix entry {bad}")));
        }
        Ok(())
    }
}

/// Owned counterpart of [`ScoringInput`], built from a table's numeric
/// model inputs and a label column.
#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
}

impl LabeledMatrix {
    pub fn from_table(table: &FlowTable, label: &str) -> Result<Self> {
        let labels = table
            .label(label)
            .ok_or_else(|| Error::ColumnNotFound(label.to_string()))?;
        let classes: Vec<String> = labels.iter().collect::<BTreeSet<_>>().into_iter().cloned().collect();
        let y = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("class list built from labels"))
            .collect();
        let feature_names = table.feature_names();
        let x = table.matrix(&feature_names)?;
        Ok(LabeledMatrix {
            x,
            y,
            classes,
            feature_names,
        })
    }

    pub fn input(&self) -> ScoringInput<'_> {
        ScoringInput::new(self.x.view(), &self.y, self.classes.len(), &self.feature_names)
    }
}

/// Raw and min-max normalized scores of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: Method,
    pub raw: BTreeMap<String, f64>,
    pub normalized: BTreeMap<String, f64>,
}

impl MethodScore {
    pub fn from_raw(method: Method, feature_names: &[String], raw: Vec<f64>) -> Result<Self> {
        if feature_names.len() != raw.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                got: raw.len(),
            });
        }
        let mut map = BTreeMap::new();
        for (name, v) in feature_names.iter().zip(raw) {
            if map.insert(name.clone(), v).is_some() {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        Self::from_map(method, map)
    }

    pub fn from_map(method: Method, raw: BTreeMap<String, f64>) -> Result<Self> {
        let normalized = normalize_scores(&raw)?;
        Ok(MethodScore { method, raw, normalized })
    }
}

/// Min-max normalization to [0, 1]. All-equal inputs map to zeros.
pub fn normalize_scores(raw: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((k, _)) = raw.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(format!("score of {k}")));
    }
    let min = raw.values().copied().fold(f64::INFINITY, f64::min);
    let max = raw.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    Ok(raw
        .iter()
        .map(|(k, &v)| {
            let n = if range > 0.0 { ((v - min) / range).clamp(0.0, 1.0) } else { 0.0 };
            (k.clone(), n)
        })
        .collect())
}

/// A feature-scoring strategy.
pub trait FeatureScorer: Send + Sync {
    fn method(&self) -> Method;
    fn score(&self, input: &ScoringInput) -> Result<MethodScore>;
}

/// Scorers keyed by name, in registration order.
#[derive(Default)]
pub struct ScorerRegistry {
    entries: Vec<(String, Box<dyn FeatureScorer>)>,
}

impl ScorerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The five built-in scorers, configured from `config`.
    pub fn builtin(config: &SelectionConfig) -> Self {
        let mut r = Self::new();
        r.register(InformationGain { binning: config.binning });
        r.register(ChiSquared { binning: config.binning });
        r.register(RecursiveElimination { config: config.rfe.clone() });
        r.register(MeanAbsoluteDeviation);
        r.register(DispersionRatio {
            formula: config.dispersion_formula,
        });
        r
    }

    /// Registers under the scorer's method name, replacing any previous entry.
    pub fn register<S: FeatureScorer + 'static>(&mut self, scorer: S) {
        let name = scorer.method().name().to_string();
        self.register_as(name, Box::new(scorer));
    }

    pub fn register_as(&mut self, name: impl Into<String>, scorer: Box<dyn FeatureScorer>) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = scorer,
            None => self.entries.push((name, scorer)),
        }
    }

    pub fn get(&self, name: &str) -> Result<&dyn FeatureScorer> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_ref())
            .ok_or_else(|| Error::NotRegistered {
                kind: "scorer",
                name: name.to_string(),
                available: self.names(),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Runs the named scorers in parallel; output follows `names` order.
    pub fn score_all(&self, names: &[String], input: &ScoringInput) -> Result<Vec<MethodScore>> {
        let scorers = names.iter().map(|n| self.get(n)).collect::<Result<Vec<_>>>()?;
        scorers.par_iter().map(|s| s.score(input)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub k: usize,
    pub methods: Vec<String>,
    pub binning: BinningConfig,
    pub rfe: RfeConfig,
    pub dispersion_formula: DispersionFormula,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k: 16,
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            binning: BinningConfig::default(),
            rfe: RfeConfig::default(),
            dispersion_formula: DispersionFormula::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub scores: Vec<MethodScore>,
    pub aggregate: BTreeMap<String, f64>,
    pub ranking: Vec<String>,
    pub selected: Vec<String>,
    pub k: usize,
    pub cumulative_importance: f64,
}

// Aggregates are compared on a 1e-9 grid so that rounding noise from
// normalization cannot reorder features that are tied in exact arithmetic.
fn rank_key(v: f64) -> i64 {
    (v * 1e9).round() as i64
}

pub fn aggregate_and_select(scores: Vec<MethodScore>, k: usize) -> Result<SelectionResult> {
    let first = scores.first().ok_or(Error::EmptyInput)?;
    let features: Vec<String> = first.normalized.keys().cloned().collect();
    for s in &scores[1..] {
        if !s.normalized.keys().eq(features.iter()) {
            return Err(Error::FeatureMismatch(format!(
                "{} scores a different feature set than {}",
                s.method, first.method
            )));
        }
    }
    if k == 0 || k > features.len() {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", features.len())));
    }
    let aggregate: BTreeMap<String, f64> = features
        .iter()
        .map(|f| (f.clone(), scores.iter().map(|s| s.normalized[f]).sum()))
        .collect();
    let mut ranking = features;
    ranking.sort_by(|a, b| rank_key(aggregate[b]).cmp(&rank_key(aggregate[a])).then_with(|| a.cmp(b)));
    let selected = ranking[..k].to_vec();
    let cumulative_importance = cumulative_fraction(&aggregate, &ranking, k);
    Ok(SelectionResult {
        scores,
        aggregate,
        ranking,
        selected,
        k,
        cumulative_importance,
    })
}

/// Share of the total aggregate captured by the first `k` ranked features.
/// When every aggregate is zero the share is taken to be uniform, `k / d`.
pub fn cumulative_fraction(aggregate: &BTreeMap<String, f64>, ranking: &[String], k: usize) -> f64 {
    let total: f64 = aggregate.values().sum();
    if total <= 0.0 {
        return k as f64 / ranking.len() as f64;
    }
    let top: f64 = ranking[..k].iter().map(|f| aggregate[f]).sum();
    (top / total).clamp(0.0, 1.0)
}

/// Scores `input` with every method in `config` and selects the top `k`.
pub fn select_features(input: &ScoringInput, config: &SelectionConfig) -> Result<SelectionResult> {
    select_with(&ScorerRegistry::builtin(config), input, config)
}

pub fn select_with(registry: &ScorerRegistry, input: &ScoringInput, config: &SelectionConfig) -> Result<SelectionResult> {
    input.validate()?;
    let scores = registry.score_all(&config.methods, input)?;
    aggregate_and_select(scores, config.k.min(input.x.ncols()))
}

pub fn score_information_gain(table: &FlowTable, label: &str, binning: BinningConfig) -> Result<MethodScore> {
    InformationGain { binning }.score(&LabeledMatrix::from_table(table, label)?.input())
}

pub fn score_chi_squared(table: &FlowTable, label: &str, binning: BinningConfig) -> Result<MethodScore> {
    ChiSquared { binning }.score(&LabeledMatrix::from_table(table, label)?.input())
}

pub fn score_rfe(table: &FlowTable, label: &str, config: &RfeConfig) -> Result<MethodScore> {
    RecursiveElimination { config: config.clone() }.score(&LabeledMatrix::from_table(table, label)?.input())
}

fn unsupervised_input(table: &FlowTable) -> Result<(Array2<f64>, Vec<usize>, Vec<String>)> {
    let names = table.feature_names();
    let x = table.matrix(&names)?;
    Ok((x, vec![0; table.n_rows()], names))
}

pub fn score_mad(table: &FlowTable) -> Result<MethodScore> {
    let (x, y, names) = unsupervised_input(table)?;
    MeanAbsoluteDeviation.score(&ScoringInput::new(x.view(), &y, 1, &names))
}

pub fn score_dispersion_ratio(table: &FlowTable, formula: DispersionFormula) -> Result<MethodScore> {
    let (x, y, names) = unsupervised_input(table)?;
    DispersionRatio { formula }.score(&ScoringInput::new(x.view(), &y, 1, &names))
}

impl SelectionResult {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let width = self.ranking.iter().map(String::len).max().unwrap_or(7).max(7);
        let _ = write!(out, "{:<width$}", "feature");
        for s in &self.scores {
            let _ = write!(out, " {:>16}", s.method.name());
        }
        let _ = writeln!(out, " {:>10} {:>5} selected", "aggregate", "rank");
        for (rank, f) in self.ranking.iter().enumerate() {
            let _ = write!(out, "{f:<width$}");
            for s in &self.scores {
                let _ = write!(out, " {:>16.6}", s.normalized[f]);
            }
            let mark = if rank < self.k { "*" } else { "" };
            let _ = writeln!(out, " {:>10.6} {:>5} {mark}", self.aggregate[f], rank + 1);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "selected ({}): {}", self.k, self.selected.join(", "));
        let _ = writeln!(out, "cumulative importance: {:.4}", self.cumulative_importance);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(
            normalize_scores(&map(&[("a", 2.0), ("b", 4.0), ("c", 6.0)])).unwrap(),
            map(&[("a", 0.0), ("b", 0.5), ("c", 1.0)])
        );
        assert_eq!(
            normalize_scores(&map(&[("a", 7.0), ("b", 7.0)])).unwrap(),
            map(&[("a", 0.0), ("b", 0.0)])
        );
        assert!(normalize_scores(&map(&[("a", f64::NAN)])).is_err());
        assert!(normalize_scores(&BTreeMap::new()).is_err());
    }

    #[test]
    fn aggregation_example() {
        let a = MethodScore {
            method: Method::InfoGain,
            raw: map(&[("a", 1.0), ("b", 0.0)]),
            normalized: map(&[("a", 1.0), ("b", 0.0)]),
        };
        let b = MethodScore {
            method: Method::Mad,
            raw: map(&[("a", 0.5), ("b", 1.0)]),
            normalized: map(&[("a", 0.5), ("b", 1.0)]),
        };
        let r = aggregate_and_select(vec![a.clone(), b.clone()], 1).unwrap();
        assert_eq!(r.aggregate, map(&[("a", 1.5), ("b", 1.0)]));
        assert_eq!(r.ranking, vec!["a", "b"]);
        assert_eq!(r.selected, vec!["a"]);
        assert!((r.cumulative_importance - 0.6).abs() < 1e-12);
        let all = aggregate_and_select(vec![a, b], 2).unwrap();
        assert_eq!(all.cumulative_importance, 1.0);
    }

    #[test]
    fn ties_break_by_name() {
        let s = MethodScore::from_map(Method::Mad, map(&[("zeta", 1.0), ("alpha", 1.0), ("mid", 0.0)])).unwrap();
        let r = aggregate_and_select(vec![s], 2).unwrap();
        assert_eq!(r.ranking, vec!["alpha", "zeta", "mid"]);
    }

    #[test]
    fn selection_errors() {
        let a = MethodScore::from_map(Method::Mad, map(&[("a", 1.0), ("b", 2.0)])).unwrap();
        let c = MethodScore::from_map(Method::Rfe, map(&[("a", 1.0), ("c", 2.0)])).unwrap();
        assert!(matches!(
            aggregate_and_select(vec![a.clone(), c], 1),
            Err(Error::FeatureMismatch(_))
        ));
        assert!(aggregate_and_select(vec![a.clone()], 0).is_err());
        assert!(aggregate_and_select(vec![a], 3).is_err());
        assert!(aggregate_and_select(vec![], 1).is_err());
    }

    #[test]
    fn registry_lookup() {
        let r = ScorerRegistry::builtin(&SelectionConfig::default());
        assert_eq!(r.names(), vec!["info_gain", "chi_squared", "rfe", "mad", "dispersion_ratio"]);
        assert_eq!(r.get("mad").unwrap().method(), Method::Mad);
        assert!(matches!(r.get("lasso"), Err(Error::NotRegistered { .. })));
        assert_eq!("rfe".parse::<Method>().unwrap(), Method::Rfe);
    }

    #[test]
    fn text_report_lists_selected() {
        let s = MethodScore::from_map(Method::Mad, map(&[("x", 3.0), ("y", 1.0)])).unwrap();
        let text = aggregate_and_select(vec![s], 1).unwrap().render_text();
        assert!(text.contains("selected (1): x"));
        assert!(text.contains("cumulative importance: 1.0000"));
    }
}
