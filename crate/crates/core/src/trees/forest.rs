//! Gini random forest: bootstrap samples, random feature subsets per split,
//! exact midpoint thresholds.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{check_training_input, EnsembleKind, ModelConfig, TreeEnsembleModel};
use super::tree::{midpoint, Node, Tree};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => n_features,
            MaxFeatures::Count(c) => c.clamp(1, n_features.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 100,
            max_features: MaxFeatures::Sqrt,
            max_depth: Some(16),
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 || self.min_samples_leaf == 0 || self.max_depth == Some(0) {
            return Err(Error::invalid("forest counts must be positive"));
        }
        if let MaxFeatures::Count(0) = self.max_features {
            return Err(Error::invalid("max_features must be positive"));
        }
        Ok(())
    }
}

/// Gini impurity `1 - sum p_k^2` of a count vector.
pub fn gini(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

/// `n * gini(counts)`, the weighted impurity of a child.
fn weighted_gini(counts: &[f64], n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    n - counts.iter().map(|c| c * c).sum::<f64>() / n
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

struct Grower<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    mtry: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1.0;
        }
        c
    }

    fn best_split(&self, rows: &[usize], parent: &[f64], rng: &mut ChaCha8Rng) -> Option<SplitCandidate> {
        let n = rows.len() as f64;
        let parent_impurity = weighted_gini(parent, n);
        let mut features: Vec<usize> = (0..self.cols.len()).collect();
        features.shuffle(rng);

        let mut best: Option<SplitCandidate> = None;
        let mut visited = 0;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for f in features {
            if visited >= self.mtry {
                break;
            }
            let col = &self.cols[f];
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (col[r], self.y[r])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            visited += 1;

            let mut left = vec![0.0; self.n_classes];
            let mut right = parent.to_vec();
            for i in 0..pairs.len() - 1 {
                let (v, c) = pairs[i];
                left[c] += 1.0;
                right[c] -= 1.0;
                let next = pairs[i + 1].0;
                if v == next {
                    continue;
                }
                let n_left = (i + 1) as f64;
                let n_right = n - n_left;
                if (i + 1) < self.min_leaf || pairs.len() - (i + 1) < self.min_leaf {
                    continue;
                }
                let child = weighted_gini(&left, n_left) + weighted_gini(&right, n_right);
                let decrease = parent_impurity - child;
                if decrease > 1e-12 && best.as_ref().map_or(true, |b| decrease > b.decrease) {
                    best = Some(SplitCandidate {
                        feature: f,
                        threshold: midpoint(v, next),
                        decrease,
                    });
                }
            }
        }
        best
    }

    fn grow(&self, nodes: &mut Vec<Node>, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(rows);
        let n = rows.len() as f64;
        let id = nodes.len();
        let leaf = Node::Leaf {
            value: counts.iter().map(|c| c / n).collect(),
            cover: n,
        };
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if pure || self.max_depth.is_some_and(|d| depth >= d) || rows.len() < 2 * self.min_leaf {
            nodes.push(leaf);
            return id;
        }
        let Some(split) = self.best_split(rows, &counts, rng) else {
            nodes.push(leaf);
            return id;
        };
        nodes.push(leaf);
        let col = &self.cols[split.feature];
        let mut mid = 0;
        for i in 0..rows.len() {
            if col[rows[i]] <= split.threshold {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = rows.split_at_mut(mid);
        let left = self.grow(nodes, l, depth + 1, rng);
        let right = self.grow(nodes, r, depth + 1, rng);
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            cover: n,
            gain: split.decrease,
        };
        id
    }
}

pub(crate) fn columns_of(x: ArrayView2<f64>) -> Vec<Vec<f64>> {
    x.columns().into_iter().map(|c| c.to_vec()).collect()
}

pub fn fit_random_forest(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    feature_names: &[String],
    config: &ForestConfig,
) -> Result<TreeEnsembleModel> {
    config.validate()?;
    check_training_input(x, y, n_classes, feature_names)?;
    let cols = columns_of(x);
    let grower = Grower {
        cols: &cols,
        y,
        n_classes,
        mtry: config.max_features.resolve(x.ncols()),
        max_depth: config.max_depth,
        min_leaf: config.min_samples_leaf,
    };
    let n = x.nrows();
    let trees: Vec<Tree> = (0..config.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(config.seed, t as u64);
            let mut rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut nodes = Vec::new();
            grower.grow(&mut nodes, &mut rows, 0, &mut rng);
            Tree { nodes }
        })
        .collect();

    Ok(TreeEnsembleModel {
        kind: EnsembleKind::Forest,
        n_classes,
        feature_names: feature_names.to_vec(),
        trees,
        tree_output: vec![],
        base_score: vec![],
        learning_rate: 1.0,
        config: ModelConfig::Forest(config.clone()),
        train_loss: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5.0, 5.0]), 0.5);
        assert_eq!(gini(&[10.0, 0.0]), 0.0);
    }

    #[test]
    fn separable_single_tree_fits_exactly() {
        let n = 60;
        let x = Array2::from_shape_fn((n, 3), |(r, c)| ((r * 7 + c * 13) % 17) as f64 + if c == 1 { r as f64 } else { 0.0 });
        let y: Vec<usize> = (0..n).map(|r| usize::from(x[[r, 1]] > 35.0)).collect();
        let names: Vec<String> = (0..3).map(|i| format!("f{i}")).collect();
        let cfg = ForestConfig {
            n_estimators: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..Default::default()
        };
        let m = fit_random_forest(x.view(), &y, 2, &names, &cfg).unwrap();
        let p = m.predict_proba(x.view()).unwrap();
        for r in 0..n {
            let pred = usize::from(p[[r, 1]] > 0.5);
            assert_eq!(pred, y[r]);
        }
    }

    #[test]
    fn leaves_respect_min_samples_and_depth() {
        let n = 200;
        let x = Array2::from_shape_fn((n, 4), |(r, c)| ((r * 31 + c * 17) % 97) as f64);
        let y: Vec<usize> = (0..n).map(|r| (r * 13 % 7) % 3).collect();
        let names: Vec<String> = (0..4).map(|i| format!("f{i}")).collect();
        let cfg = ForestConfig {
            n_estimators: 5,
            max_depth: Some(4),
            min_samples_leaf: 3,
            bootstrap: false,
            ..Default::default()
        };
        let m = fit_random_forest(x.view(), &y, 3, &names, &cfg).unwrap();
        for t in &m.trees {
            assert!(t.depth() <= 4);
            assert!(t.leaves().all(|(_, cover)| cover >= 3.0));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let n = 120;
        let x = Array2::from_shape_fn((n, 5), |(r, c)| ((r * 37 + c * 11) % 53) as f64);
        let y: Vec<usize> = (0..n).map(|r| usize::from(x[[r, 2]] + x[[r, 4]] > 50.0)).collect();
        let names: Vec<String> = (0..5).map(|i| format!("f{i}")).collect();
        let cfg = ForestConfig {
            n_estimators: 10,
            seed: 42,
            ..Default::default()
        };
        let a = fit_random_forest(x.view(), &y, 2, &names, &cfg).unwrap();
        let b = fit_random_forest(x.view(), &y, 2, &names, &cfg).unwrap();
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn rejects_bad_input() {
        let x = Array2::<f64>::zeros((4, 2));
        let names = vec!["a".to_string(), "b".to_string()];
        let cfg = ForestConfig::default();
        assert!(fit_random_forest(x.view(), &[0, 0, 0, 0], 2, &names, &cfg).is_err());
        assert!(fit_random_forest(x.view(), &[0, 1, 0], 2, &names, &cfg).is_err());
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(fit_random_forest(empty.view(), &[], 2, &names, &cfg).is_err());
    }
}
