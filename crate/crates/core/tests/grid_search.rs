use std::sync::atomic::{AtomicUsize, Ordering};

use genisbench::eval::{grid_search, GridSpec, TieBreak};
use genisbench::models::{
    cartesian, Classifier, GbdtFamily, ModelFamily, ModelRegistry, ParamValue, Params, TrainData, Tuning,
};
use genisbench::Error;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Delegates to a real family, counting fits and failing chosen candidates.
struct Counting<F> {
    inner: F,
    fits: AtomicUsize,
    fail_on: Option<String>,
}

impl<F: ModelFamily> Counting<F> {
    fn new(inner: F) -> Self {
        Counting {
            inner,
            fits: AtomicUsize::new(0),
            fail_on: None,
        }
    }
}

impl<F: ModelFamily> ModelFamily for Counting<F> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn tuning(&self) -> Tuning {
        self.inner.tuning()
    }

    fn grid(&self) -> Vec<Params> {
        self.inner.grid()
    }

    fn fit(&self, params: &Params, data: &TrainData) -> genisbench::Result<Box<dyn Classifier>> {
        self.fits.fetch_add(1, Ordering::SeqCst);
        if self.fail_on.as_deref() == Some(params.key().as_str()) {
            return Err(Error::invalid("scripted failure"));
        }
        self.inner.fit(params, data)
    }
}

/// Two-class XOR on the first two columns plus two noise columns.
fn xor(n: usize) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Array2::from_shape_simple_fn((n, 4), || rng.gen_range(-1.0..1.0));
    let y = x.rows().into_iter().map(|r| usize::from((r[0] > 0.0) != (r[1] > 0.0))).collect();
    (x, y)
}

fn data<'a>(x: &'a Array2<f64>, y: &'a [usize], classes: &'a [String], names: &'a [String]) -> TrainData<'a> {
    TrainData {
        x: x.view(),
        y,
        classes,
        benign: 0,
        feature_names: names,
        seed: 5,
    }
}

fn labels() -> (Vec<String>, Vec<String>) {
    (
        vec!["Benign".into(), "Malicious".into()],
        (0..4).map(|i| format!("f{i}")).collect(),
    )
}

fn depth(d: i64) -> Params {
    Params::new().with("max_depth", ParamValue::Int(d)).with("n_estimators", ParamValue::Int(20))
}

#[test]
fn histogram_grid_fits_each_candidate_on_each_fold() {
    let (x, y) = xor(300);
    let (classes, names) = labels();
    let family = Counting::new(GbdtFamily::histogram());
    let grid: Vec<Params> = family
        .grid()
        .into_iter()
        .map(|p| p.with("n_estimators", ParamValue::Int(5)))
        .collect();
    let result = grid_search(&family, &GridSpec::new(grid), &data(&x, &y, &classes, &names)).unwrap();
    assert_eq!(family.fits.load(Ordering::SeqCst), 30);
    assert_eq!(result.candidates.len(), 6);
    assert!(result.candidates.iter().all(|c| c.fold_scores.len() == 5));
}

#[test]
fn single_candidate_still_runs_every_fold() {
    let (x, y) = xor(200);
    let (classes, names) = labels();
    let family = Counting::new(GbdtFamily::histogram());
    let spec = GridSpec {
        folds: 4,
        ..GridSpec::new(vec![depth(3)])
    };
    let result = grid_search(&family, &spec, &data(&x, &y, &classes, &names)).unwrap();
    assert_eq!(result.winner, 0);
    assert_eq!(family.fits.load(Ordering::SeqCst), 4);
}

#[test]
fn dominant_candidate_wins() {
    // stumps cannot represent XOR; depth 4 can
    let (x, y) = xor(400);
    let (classes, names) = labels();
    let family = GbdtFamily::histogram();
    let spec = GridSpec {
        tie_break: TieBreak::Lexicographic,
        ..GridSpec::new(vec![depth(1), depth(4)])
    };
    let result = grid_search(&family, &spec, &data(&x, &y, &classes, &names)).unwrap();
    assert_eq!(result.best().params, depth(4));
    assert!(result.candidates[1].mean_score > result.candidates[0].mean_score + 20.0);
}

#[test]
fn failing_candidates_are_recorded_and_skipped() {
    let (x, y) = xor(200);
    let (classes, names) = labels();
    let mut family = Counting::new(GbdtFamily::histogram());
    family.fail_on = Some(depth(4).key());
    let spec = GridSpec::new(vec![depth(4), depth(2)]);
    let result = grid_search(&family, &spec, &data(&x, &y, &classes, &names)).unwrap();
    assert!(result.candidates[0].error.as_deref().unwrap().contains("scripted failure"));
    assert_eq!(result.winner, 1);

    let spec = GridSpec::new(vec![depth(4)]);
    let err = grid_search(&family, &spec, &data(&x, &y, &classes, &names)).unwrap_err();
    assert!(matches!(err, Error::AllCandidatesFailed(_)), "{err}");
}

#[test]
fn row_cap_keeps_the_result_deterministic() {
    let (x, y) = xor(600);
    let (classes, names) = labels();
    let family = GbdtFamily::histogram();
    let spec = GridSpec {
        max_rows: Some(250),
        tie_break: TieBreak::Lexicographic,
        ..GridSpec::new(cartesian(&[
            ("max_depth", vec![ParamValue::Int(2), ParamValue::Int(3)]),
            ("n_estimators", vec![ParamValue::Int(10)]),
        ]))
    };
    let d = data(&x, &y, &classes, &names);
    let a = grid_search(&family, &spec, &d).unwrap();
    let b = grid_search(&family, &spec, &d).unwrap();
    let scores = |r: &genisbench::eval::GridResult| r.candidates.iter().map(|c| c.fold_scores.clone()).collect::<Vec<_>>();
    assert_eq!(scores(&a), scores(&b));
    assert_eq!(a.winner, b.winner);
}

#[test]
fn registry_resolves_and_replaces_by_name() {
    let mut registry = ModelRegistry::builtin();
    assert_eq!(registry.names(), ["rf", "gbdt_hist", "gbdt_goss", "mlp", "lstm"]);
    assert_eq!(registry.get("mlp").unwrap().tuning(), Tuning::Holdout);
    assert_eq!(registry.get("rf").unwrap().tuning(), Tuning::CrossValidation);
    assert_eq!(registry.get("gbdt_goss").unwrap().grid().len(), 3);
    let err = registry.get("svm").err().unwrap().to_string();
    assert!(err.contains("svm") && err.contains("gbdt_hist"), "{err}");

    registry.register(Box::new(Counting::new(GbdtFamily::histogram())));
    assert_eq!(registry.names().len(), 5);
}
