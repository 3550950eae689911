use genisbench::data::{Category, ColumnKind, FeatureMeta, Taxonomy};
use genisbench::explain::{group_importance, sampled_shapley, tree_shap, tree_shap_row, ProbabilityModel, Target};
use genisbench::trees::{fit_gbdt, fit_random_forest, ForestConfig, GbdtConfig, Node, Tree};
use ndarray::{array, Array2, ArrayView2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("f{i}")).collect()
}

/// Column 3 is constant, so no tree can split on it.
fn dataset(n: usize, k: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<usize> = (0..n).map(|i| i % k).collect();
    let x = Array2::from_shape_fn((n, 4), |(r, c)| match c {
        0 | 1 => y[r] as f64 * 0.7 + rng.gen_range(-1.0..1.0),
        2 => rng.gen_range(-1.0..1.0),
        _ => 2.5,
    });
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unused_feature_gets_exactly_zero(k in 2usize..4, seed: u64) {
        let (x, y) = dataset(150, k, seed);
        let forest = fit_random_forest(x.view(), &y, k, &names(4), &ForestConfig { n_estimators: 8, seed, ..ForestConfig::default() }).unwrap();
        let boost = fit_gbdt(x.view(), &y, k, &names(4), &GbdtConfig { n_estimators: 8, seed, ..GbdtConfig::histogram() }).unwrap();
        for model in [&forest, &boost] {
            let a = tree_shap(model, x.view(), Target::Predicted).unwrap();
            prop_assert!(a.values.column(3).iter().all(|&v| v == 0.0));
            prop_assert!(a.additivity_error() < 1e-6);
        }
    }

    #[test]
    fn ensemble_attribution_is_the_weighted_sum_of_trees(k in 2usize..4, seed: u64) {
        let (x, y) = dataset(120, k, seed);
        let forest = fit_random_forest(x.view(), &y, k, &names(4), &ForestConfig { n_estimators: 6, seed, ..ForestConfig::default() }).unwrap();
        let class = k - 1;
        let a = tree_shap(&forest, x.view(), Target::Class(class)).unwrap();
        for r in 0..10 {
            let row = x.row(r).to_vec();
            let mut total = [0.0; 4];
            for tree in &forest.trees {
                let mut phi = [0.0; 4];
                tree_shap_row(tree, &row, class, &mut phi);
                total.iter_mut().zip(phi).for_each(|(t, p)| *t += p / forest.trees.len() as f64);
            }
            for (i, t) in total.iter().enumerate() {
                prop_assert!((a.values[[r, i]] - t).abs() < 1e-12);
            }
        }

        let binary: Vec<usize> = y.iter().map(|&c| c.min(1)).collect();
        let boost = fit_gbdt(x.view(), &binary, 2, &names(4), &GbdtConfig { n_estimators: 6, seed, ..GbdtConfig::histogram() }).unwrap();
        let a = tree_shap(&boost, x.view(), Target::Class(1)).unwrap();
        let row = x.row(0).to_vec();
        let mut total = [0.0; 4];
        for tree in &boost.trees {
            let mut phi = [0.0; 4];
            tree_shap_row(tree, &row, 0, &mut phi);
            total.iter_mut().zip(phi).for_each(|(t, p)| *t += boost.learning_rate * p);
        }
        for (i, t) in total.iter().enumerate() {
            prop_assert!((a.values[[0, i]] - t).abs() < 1e-12);
        }
    }
}

fn leaf(v: f64, cover: f64) -> Node {
    Node::Leaf { value: vec![v], cover }
}

fn split(feature: usize, left: usize, right: usize, cover: f64) -> Node {
    Node::Split {
        feature,
        threshold: 0.0,
        left,
        right,
        cover,
        gain: 1.0,
    }
}

#[test]
fn interchangeable_features_share_credit() {
    // AND of x0 > 0 and x1 > 0 with balanced covers
    let tree = Tree {
        nodes: vec![
            split(0, 1, 2, 100.0),
            split(1, 3, 4, 50.0),
            split(1, 5, 6, 50.0),
            leaf(0.0, 25.0),
            leaf(0.0, 25.0),
            leaf(0.0, 25.0),
            leaf(1.0, 25.0),
        ],
    };
    for x in [[1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]] {
        let mut phi = [0.0; 3];
        tree_shap_row(&tree, &x, 0, &mut phi);
        assert!((phi[0] - phi[1]).abs() < 1e-12, "{phi:?}");
        assert_eq!(phi[2], 0.0);
    }
}

struct Symmetric;

impl ProbabilityModel for Symmetric {
    fn n_features(&self) -> usize {
        3
    }

    fn feature_names(&self) -> &[String] {
        static NAMES: std::sync::OnceLock<Vec<String>> = std::sync::OnceLock::new();
        NAMES.get_or_init(|| names(3))
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> genisbench::Result<Array2<f64>> {
        Ok(Array2::from_shape_fn((x.nrows(), 2), |(r, c)| {
            let p = 1.0 / (1.0 + (-(x[[r, 0]] * x[[r, 1]])).exp());
            if c == 1 {
                p
            } else {
                1.0 - p
            }
        }))
    }
}

#[test]
fn sampled_estimator_is_symmetric_and_ignores_unused_inputs() {
    let x = array![[1.5, 1.5, 3.0], [-0.5, -0.5, 1.0]];
    let bg = array![[0.2, 0.2, 0.0], [-0.4, -0.4, 2.0]];
    let s = sampled_shapley(&Symmetric, x.view(), bg.view(), Target::Class(1), 400, 1).unwrap();
    for r in 0..2 {
        let (a, b) = (s.attribution.values[[r, 0]], s.attribution.values[[r, 1]]);
        let se = (s.std_error[[r, 0]].powi(2) + s.std_error[[r, 1]].powi(2)).sqrt();
        assert!((a - b).abs() <= 3.0 * se + 1e-12, "{a} vs {b} (se {se})");
        assert_eq!(s.attribution.values[[r, 2]], 0.0);
    }
    assert!(s.attribution.additivity_error() < 1e-9);
}

#[test]
fn group_totals_add_mean_absolute_values() {
    let (x, y) = dataset(100, 2, 4);
    let forest = fit_random_forest(x.view(), &y, 2, &names(4), &ForestConfig { n_estimators: 5, ..ForestConfig::default() }).unwrap();
    let a = tree_shap(&forest, x.view(), Target::Predicted).unwrap();
    let taxonomy = Taxonomy::new(vec![
        FeatureMeta::new("f0", Category::QuantityBased, ColumnKind::Numeric),
        FeatureMeta::new("f1", Category::QuantityBased, ColumnKind::Numeric),
        FeatureMeta::new("f2", Category::TimeBased, ColumnKind::Numeric),
        FeatureMeta::new("f3", Category::Hybrid, ColumnKind::Numeric),
    ])
    .unwrap();
    let g = group_importance(&a, &taxonomy).unwrap();
    let m = a.mean_abs();
    assert!((g.total(Category::QuantityBased) - (m[0] + m[1])).abs() < 1e-12);
    assert!((g.total(Category::TimeBased) - m[2]).abs() < 1e-12);
    assert_eq!(g.total(Category::Hybrid), 0.0);
    assert_eq!(g.dominant(), Category::QuantityBased);

    let partial = Taxonomy::new(vec![FeatureMeta::new("f0", Category::QuantityBased, ColumnKind::Numeric)]).unwrap();
    assert!(group_importance(&a, &partial).is_err());
}
