//! Shapley attributions for trees and networks, and their per-category
//! aggregation.

mod sampling;
mod treeshap;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{Category, Taxonomy};
use crate::error::{Error, Result};
use crate::neural::NetworkModel;
use crate::trees::TreeEnsembleModel;

pub use sampling::{sampled_shapley, stratified_background, SampledAttribution};
pub use treeshap::{expected_value, tree_shap, tree_shap_row};

/// Which class each row's attribution explains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Class(usize),
    Predicted,
    PerRow(Vec<usize>),
}

impl Target {
    pub(crate) fn resolve(
        &self,
        n_rows: usize,
        n_classes: usize,
        predicted: impl FnOnce() -> Result<Vec<usize>>,
    ) -> Result<Vec<usize>> {
        let targets = match self {
            Target::Class(c) => vec![*c; n_rows],
            Target::Predicted => predicted()?,
            Target::PerRow(v) if v.len() == n_rows => v.clone(),
            Target::PerRow(v) => {
                return Err(Error::DimensionMismatch {
                    expected: n_rows,
                    got: v.len(),
                })
            }
        };
        if let Some(&bad) = targets.iter().find(|&&c| c >= n_classes) {
            return Err(Error::invalid(format!("target class {bad} out of range")));
        }
        Ok(targets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Probability,
    Margin,
}

/// Per-row, per-feature Shapley values. For every row,
/// `base_values[r] + sum(values[r, ..]) == outputs[r]` up to rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature_names: Vec<String>,
    pub values: Array2<f64>,
    pub base_values: Vec<f64>,
    pub outputs: Vec<f64>,
    pub targets: Vec<usize>,
    pub output_kind: OutputKind,
}

impl Attribution {
    /// Largest `|base + sum(phi) - output|` over rows.
    pub fn additivity_error(&self) -> f64 {
        self.values
            .rows()
            .into_iter()
            .zip(&self.base_values)
            .zip(&self.outputs)
            .map(|((row, b), o)| (b + row.sum() - o).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean_abs(&self) -> Vec<f64> {
        let n = self.values.nrows().max(1) as f64;
        self.values
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n)
            .collect()
    }
}

/// Anything that yields class probabilities for a dense feature matrix.
pub trait ProbabilityModel: Sync {
    fn n_features(&self) -> usize;
    fn feature_names(&self) -> &[String];
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;
}

impl ProbabilityModel for NetworkModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        NetworkModel::predict_proba(self, x)
    }
}

impl ProbabilityModel for TreeEnsembleModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        TreeEnsembleModel::predict_proba(self, x)
    }
}

/// The categories reported in the importance tables.
pub const REPORTED_CATEGORIES: [Category; 3] = [Category::QuantityBased, Category::TimeBased, Category::Hybrid];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    /// Sum of mean |phi| over the member features of each category. The
    /// three reported categories are always present.
    pub totals: BTreeMap<Category, f64>,
    pub per_feature: BTreeMap<String, f64>,
}

pub fn group_importance(attr: &Attribution, taxonomy: &Taxonomy) -> Result<GroupImportance> {
    let mut totals: BTreeMap<Category, f64> = REPORTED_CATEGORIES.iter().map(|&c| (c, 0.0)).collect();
    let mut per_feature = BTreeMap::new();
    for (name, m) in attr.feature_names.iter().zip(attr.mean_abs()) {
        let cat = taxonomy
            .category_of(name)
            .ok_or_else(|| Error::ColumnNotFound(name.clone()))?;
        *totals.entry(cat).or_insert(0.0) += m;
        per_feature.insert(name.clone(), m);
    }
    Ok(GroupImportance { totals, per_feature })
}

impl GroupImportance {
    pub fn total(&self, category: Category) -> f64 {
        self.totals.get(&category).copied().unwrap_or(0.0)
    }

    /// The category with the largest total among the reported ones.
    pub fn dominant(&self) -> Category {
        let mut best = REPORTED_CATEGORIES[0];
        for c in REPORTED_CATEGORIES {
            if self.total(c) > self.total(best) {
                best = c;
            }
        }
        best
    }
}

/// Text table with one row per model: quantity, time and hybrid totals.
pub fn render_group_table(rows: &[(String, GroupImportance)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>14} {:>14} {:>14}", "Model", "Quantity-based", "Time-based", "Hybrid-based");
    for (name, g) in rows {
        let _ = writeln!(
            out,
            "{:<12} {:>14.4} {:>14.4} {:>14.4}",
            name,
            g.total(Category::QuantityBased),
            g.total(Category::TimeBased),
            g.total(Category::Hybrid)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnKind, FeatureMeta};
    use crate::trees::{EnsembleKind, GbdtConfig, ModelConfig, Node, Tree};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn taxonomy() -> Taxonomy {
        Taxonomy::new(vec![
            FeatureMeta::new("a", Category::QuantityBased, ColumnKind::Numeric),
            FeatureMeta::new("b", Category::QuantityBased, ColumnKind::Numeric),
            FeatureMeta::new("c", Category::TimeBased, ColumnKind::Numeric),
        ])
        .unwrap()
    }

    fn attribution(values: Array2<f64>) -> Attribution {
        let n = values.nrows();
        Attribution {
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            values,
            base_values: vec![0.0; n],
            outputs: vec![0.0; n],
            targets: vec![0; n],
            output_kind: OutputKind::Probability,
        }
    }

    #[test]
    fn group_sums() {
        let g = group_importance(&attribution(ndarray::array![[0.3, -0.2, 0.0], [-0.3, 0.2, 0.0]]), &taxonomy()).unwrap();
        assert!((g.total(Category::QuantityBased) - 0.5).abs() < 1e-15);
        assert_eq!(g.total(Category::TimeBased), 0.0);
        assert_eq!(g.total(Category::Hybrid), 0.0);
        assert_eq!(g.dominant(), Category::QuantityBased);
        let zero = group_importance(&attribution(Array2::zeros((4, 3))), &taxonomy()).unwrap();
        assert!(zero.totals.values().all(|&v| v == 0.0));
        let mut bad = attribution(Array2::zeros((1, 3)));
        bad.feature_names[2] = "nope".into();
        assert!(group_importance(&bad, &taxonomy()).is_err());
    }

    fn gbdt_of(tree: Tree, n_features: usize) -> TreeEnsembleModel {
        TreeEnsembleModel {
            kind: EnsembleKind::Gbdt,
            n_classes: 2,
            feature_names: (0..n_features).map(|i| format!("f{i}")).collect(),
            trees: vec![tree],
            tree_output: vec![0],
            base_score: vec![0.0],
            learning_rate: 1.0,
            config: ModelConfig::Gbdt(GbdtConfig::histogram()),
            train_loss: vec![],
        }
    }

    #[test]
    fn single_leaf_has_no_attribution() {
        let m = gbdt_of(Tree::leaf(vec![0.7], 10.0), 3);
        let a = tree_shap(&m, Array2::zeros((2, 3)).view(), Target::Class(1)).unwrap();
        assert!(a.values.iter().all(|&v| v == 0.0));
        assert!(a.base_values.iter().all(|&b| (b - 0.7).abs() < 1e-15));
    }

    #[test]
    fn missing_cover_is_rejected() {
        let m = gbdt_of(Tree::leaf(vec![0.7], 0.0), 1);
        assert!(tree_shap(&m, Array2::zeros((1, 1)).view(), Target::Class(1)).is_err());
    }

    #[test]
    fn stump_attribution() {
        // x0 <= 0 -> 1 (cover 3), else 5 (cover 1): E = 2
        let t = Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                    cover: 4.0,
                    gain: 1.0,
                },
                Node::Leaf { value: vec![1.0], cover: 3.0 },
                Node::Leaf { value: vec![5.0], cover: 1.0 },
            ],
        };
        let m = gbdt_of(t, 2);
        let a = tree_shap(&m, ndarray::array![[1.0, 9.0], [-1.0, 9.0]].view(), Target::Class(1)).unwrap();
        assert_eq!(a.values, ndarray::array![[3.0, 0.0], [-1.0, 0.0]]);
        assert!(a.additivity_error() < 1e-12);
    }

    struct Linear {
        w: Vec<f64>,
        names: Vec<String>,
    }

    impl ProbabilityModel for Linear {
        fn n_features(&self) -> usize {
            self.w.len()
        }
        fn feature_names(&self) -> &[String] {
            &self.names
        }
        fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
            let mut out = Array2::zeros((x.nrows(), 1));
            for (r, row) in x.rows().into_iter().enumerate() {
                out[[r, 0]] = row.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>();
            }
            Ok(out)
        }
    }

    #[test]
    fn additive_game_is_exact() {
        let m = Linear {
            w: vec![2.0, -1.0, 0.0, 0.5],
            names: (0..4).map(|i| format!("f{i}")).collect(),
        };
        let x = ndarray::array![[1.0, 2.0, 3.0, 4.0], [-1.0, 0.5, 7.0, 0.0]];
        let b = ndarray::array![[0.5, 0.5, 0.5, 0.5]];
        for n in [1, 3, 10] {
            let s = sampled_shapley(&m, x.view(), b.view(), Target::Class(0), n, 4).unwrap();
            for r in 0..2 {
                for j in 0..4 {
                    let expect = m.w[j] * (x[[r, j]] - b[[0, j]]);
                    assert!((s.attribution.values[[r, j]] - expect).abs() < 1e-12);
                }
            }
            assert!(s.attribution.additivity_error() < 1e-12);
        }
        assert!(sampled_shapley(&m, x.view(), Array2::zeros((0, 4)).view(), Target::Class(0), 5, 0).is_err());
    }

    #[test]
    fn background_rows_are_stratified() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y: Vec<usize> = (0..1000).map(|_| if rng.gen::<f64>() < 0.9 { 0 } else { 1 }).collect();
        let rows = stratified_background(&y, 100, 7).unwrap();
        assert!((99..=101).contains(&rows.len()));
        let ones = rows.iter().filter(|&&r| y[r] == 1).count() as f64;
        let expected = y.iter().filter(|&&c| c == 1).count() as f64 / 10.0;
        assert!((ones - expected).abs() <= 1.0);
        assert_eq!(stratified_background(&y, 5000, 7).unwrap().len(), 1000);
    }
}
