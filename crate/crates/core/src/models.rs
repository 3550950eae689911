//! Model families behind a common trait, registered by name.
//!
//! A [`ModelFamily`] turns a hyperparameter assignment into a fitted
//! [`Classifier`]. Tree families are tuned by cross-validated grid search;
//! network families hold out part of the training rows for early stopping
//! and are compared on that holdout.

use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{task_metrics, ConfusionMatrix};
use crate::explain::{sampled_shapley, tree_shap, Attribution, ProbabilityModel, Target};
use crate::neural::{train, Architecture, NetConfig, NetworkModel, TrainLog};
use crate::preprocess::{stratified_holdout, Scaler};
use crate::rng::derive_seed;
use crate::trees::{argmax_rows, fit_gbdt, fit_random_forest, ForestConfig, GbdtConfig, MaxFeatures, TreeEnsembleModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Text(v) => f.write_str(v),
        }
    }
}

impl ParamValue {
    fn as_usize(&self, key: &str) -> Result<usize> {
        match self {
            ParamValue::Int(v) if *v >= 0 => Ok(*v as usize),
            _ => Err(Error::Config(format!("{key} must be a non-negative integer, got {self}"))),
        }
    }

    fn as_f64(&self, key: &str) -> Result<f64> {
        match self {
            ParamValue::Int(v) => Ok(*v as f64),
            ParamValue::Float(v) => Ok(*v),
            ParamValue::Text(_) => Err(Error::Config(format!("{key} must be numeric, got {self}"))),
        }
    }
}

/// One hyperparameter assignment. Keys are sorted, so the rendered form is a
/// canonical name for the candidate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("default");
        }
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Cartesian product of per-key candidate values, in key order.
pub fn cartesian(axes: &[(&str, Vec<ParamValue>)]) -> Vec<Params> {
    let mut out = vec![Params::new()];
    for (key, values) in axes {
        out = out
            .into_iter()
            .flat_map(|p| values.iter().map(move |v| p.clone().with(key, v.clone())))
            .collect();
    }
    out
}

/// Training rows in model-input space.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [usize],
    pub classes: &'a [String],
    pub benign: usize,
    pub feature_names: &'a [String],
    pub seed: u64,
}

impl TrainData<'_> {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExplainSettings<'a> {
    /// Reference rows for the permutation estimator, in raw feature space.
    pub background: ArrayView2<'a, f64>,
    pub n_permutations: usize,
    pub seed: u64,
}

pub trait Classifier: Send + Sync {
    fn family(&self) -> &str;
    fn feature_names(&self) -> &[String];
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;

    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(x)?))
    }

    /// Per-epoch log for iteratively trained models.
    fn train_log(&self) -> Option<&TrainLog> {
        None
    }

    /// Objective on the internal holdout, for families tuned that way.
    fn validation_score(&self) -> Option<f64> {
        None
    }

    fn explain(&self, x: ArrayView2<f64>, target: Target, settings: &ExplainSettings) -> Result<Attribution>;
    fn to_json(&self) -> Result<String>;
    fn as_any(&self) -> &dyn Any;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    CrossValidation,
    Holdout,
}

pub trait ModelFamily: Send + Sync {
    fn name(&self) -> &str;
    fn tuning(&self) -> Tuning;
    /// Candidate assignments searched by default.
    fn grid(&self) -> Vec<Params>;
    fn fit(&self, params: &Params, data: &TrainData) -> Result<Box<dyn Classifier>>;
}

// ---------------------------------------------------------------- trees

pub struct TreeClassifier {
    family: String,
    pub model: TreeEnsembleModel,
}

impl Classifier for TreeClassifier {
    fn family(&self) -> &str {
        &self.family
    }

    fn feature_names(&self) -> &[String] {
        &self.model.feature_names
    }

    fn n_classes(&self) -> usize {
        self.model.n_classes
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.model.predict_proba(x)
    }

    fn explain(&self, x: ArrayView2<f64>, target: Target, _: &ExplainSettings) -> Result<Attribution> {
        tree_shap(&self.model, x, target)
    }

    fn to_json(&self) -> Result<String> {
        self.model.to_json()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

fn unknown_param(family: &str, key: &str) -> Error {
    Error::Config(format!("unknown {family} parameter {key:?}"))
}

#[derive(Debug, Clone)]
pub struct ForestFamily {
    pub base: ForestConfig,
    pub grid: Vec<Params>,
}

impl Default for ForestFamily {
    fn default() -> Self {
        ForestFamily {
            base: ForestConfig::default(),
            grid: vec![Params::new()],
        }
    }
}

impl ForestFamily {
    pub fn config(&self, params: &Params, seed: u64) -> Result<ForestConfig> {
        let mut c = self.base.clone();
        c.seed = seed;
        for (k, v) in &params.0 {
            match k.as_str() {
                "n_estimators" => c.n_estimators = v.as_usize(k)?,
                "max_depth" => c.max_depth = Some(v.as_usize(k)?),
                "min_samples_leaf" => c.min_samples_leaf = v.as_usize(k)?,
                "max_features" => {
                    c.max_features = match v {
                        ParamValue::Text(s) if s == "sqrt" => MaxFeatures::Sqrt,
                        ParamValue::Text(s) if s == "all" => MaxFeatures::All,
                        other => MaxFeatures::Count(other.as_usize(k)?),
                    }
                }
                _ => return Err(unknown_param("rf", k)),
            }
        }
        Ok(c)
    }
}

impl ModelFamily for ForestFamily {
    fn name(&self) -> &str {
        "rf"
    }

    fn tuning(&self) -> Tuning {
        Tuning::CrossValidation
    }

    fn grid(&self) -> Vec<Params> {
        self.grid.clone()
    }

    fn fit(&self, params: &Params, data: &TrainData) -> Result<Box<dyn Classifier>> {
        let cfg = self.config(params, data.seed)?;
        let model = fit_random_forest(data.x, data.y, data.n_classes(), data.feature_names, &cfg)?;
        Ok(Box::new(TreeClassifier {
            family: self.name().to_string(),
            model,
        }))
    }
}

#[derive(Debug, Clone)]
pub struct GbdtFamily {
    pub name: String,
    pub base: GbdtConfig,
    pub grid: Vec<Params>,
}

impl GbdtFamily {
    /// Histogram boosting searched over depth {4, 8, 16} and feature
    /// subsample {0.8, 0.9}.
    pub fn histogram() -> Self {
        GbdtFamily {
            name: "gbdt_hist".into(),
            base: GbdtConfig::histogram(),
            grid: cartesian(&[
                ("max_depth", vec![ParamValue::Int(4), ParamValue::Int(8), ParamValue::Int(16)]),
                ("feature_subsample", vec![ParamValue::Float(0.8), ParamValue::Float(0.9)]),
            ]),
        }
    }

    /// GOSS boosting searched over a minimum leaf size of 2 to 4.
    pub fn goss() -> Self {
        GbdtFamily {
            name: "gbdt_goss".into(),
            base: GbdtConfig::goss(),
            grid: cartesian(&[(
                "min_samples_leaf",
                vec![ParamValue::Int(2), ParamValue::Int(3), ParamValue::Int(4)],
            )]),
        }
    }

    pub fn config(&self, params: &Params, seed: u64) -> Result<GbdtConfig> {
        let mut c = self.base.clone();
        c.seed = seed;
        for (k, v) in &params.0 {
            match k.as_str() {
                "n_estimators" => c.n_estimators = v.as_usize(k)?,
                "max_depth" => c.max_depth = Some(v.as_usize(k)?),
                "max_leaves" => c.max_leaves = Some(v.as_usize(k)?),
                "min_samples_leaf" => c.min_samples_leaf = v.as_usize(k)?,
                "feature_subsample" => c.feature_subsample = v.as_f64(k)?,
                "learning_rate" => c.learning_rate = v.as_f64(k)?,
                _ => return Err(unknown_param(&self.name, k)),
            }
        }
        Ok(c)
    }
}

impl ModelFamily for GbdtFamily {
    fn name(&self) -> &str {
        &self.name
    }

    fn tuning(&self) -> Tuning {
        Tuning::CrossValidation
    }

    fn grid(&self) -> Vec<Params> {
        self.grid.clone()
    }

    fn fit(&self, params: &Params, data: &TrainData) -> Result<Box<dyn Classifier>> {
        let cfg = self.config(params, data.seed)?;
        let model = fit_gbdt(data.x, data.y, data.n_classes(), data.feature_names, &cfg)?;
        Ok(Box::new(TreeClassifier {
            family: self.name.clone(),
            model,
        }))
    }
}

// ---------------------------------------------------------------- networks

/// A network together with the standardization fitted on its training part.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaledNetwork {
    pub scaler: Scaler,
    pub model: NetworkModel,
}

impl ProbabilityModel for ScaledNetwork {
    fn n_features(&self) -> usize {
        self.model.feature_names.len()
    }

    fn feature_names(&self) -> &[String] {
        &self.model.feature_names
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.model.predict_proba(self.scaler.transform_matrix(x)?.view())
    }
}

pub struct NetworkClassifier {
    family: String,
    pub net: ScaledNetwork,
    pub log: TrainLog,
    pub validation_score: f64,
}

impl Classifier for NetworkClassifier {
    fn family(&self) -> &str {
        &self.family
    }

    fn feature_names(&self) -> &[String] {
        &self.net.model.feature_names
    }

    fn n_classes(&self) -> usize {
        self.net.model.n_classes()
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net.predict_proba(x)
    }

    fn train_log(&self) -> Option<&TrainLog> {
        Some(&self.log)
    }

    fn validation_score(&self) -> Option<f64> {
        Some(self.validation_score)
    }

    fn explain(&self, x: ArrayView2<f64>, target: Target, settings: &ExplainSettings) -> Result<Attribution> {
        Ok(sampled_shapley(&self.net, x, settings.background, target, settings.n_permutations, settings.seed)?.attribution)
    }

    fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.net)?)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// F1 of the attack class for two classes, macro-F1 otherwise.
pub fn objective(truth: &[usize], predicted: &[usize], classes: &[String], benign: usize) -> Result<f64> {
    let cm = ConfusionMatrix::from_indices(truth, predicted, classes)?;
    Ok(task_metrics(&cm, benign)?.f1)
}

#[derive(Debug, Clone)]
pub struct NetworkFamily {
    pub name: String,
    pub base: NetConfig,
    /// Share of the training rows used to fit the weights; the rest drive
    /// early stopping and the architecture comparison.
    pub train_fraction: f64,
    pub grid: Vec<Params>,
}

impl NetworkFamily {
    fn new(name: &str, architecture: Architecture) -> Self {
        NetworkFamily {
            name: name.into(),
            base: NetConfig {
                architecture,
                ..NetConfig::default()
            },
            train_fraction: 0.7,
            grid: cartesian(&[(
                "hidden",
                vec![ParamValue::Text("128x64".into()), ParamValue::Text("64x32".into())],
            )]),
        }
    }

    pub fn mlp() -> Self {
        Self::new("mlp", Architecture::Mlp)
    }

    pub fn lstm() -> Self {
        Self::new("lstm", Architecture::Lstm)
    }

    pub fn config(&self, params: &Params, seed: u64) -> Result<NetConfig> {
        let mut c = self.base.clone();
        c.seed = seed;
        for (k, v) in &params.0 {
            match k.as_str() {
                "hidden" => {
                    let text = v.to_string();
                    let dims: Vec<usize> = text
                        .split('x')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Config(format!("hidden must look like 128x64, got {text}")))?;
                    match dims.as_slice() {
                        [a, b] => c.hidden = [*a, *b],
                        _ => return Err(Error::Config(format!("hidden needs two widths, got {text}"))),
                    }
                }
                "max_epochs" => c.max_epochs = v.as_usize(k)?,
                "dropout" => c.dropout = v.as_f64(k)?,
                "batch_size" => c.batch_size = v.as_usize(k)?,
                _ => return Err(unknown_param(&self.name, k)),
            }
        }
        Ok(c)
    }
}

impl ModelFamily for NetworkFamily {
    fn name(&self) -> &str {
        &self.name
    }

    fn tuning(&self) -> Tuning {
        Tuning::Holdout
    }

    fn grid(&self) -> Vec<Params> {
        self.grid.clone()
    }

    fn fit(&self, params: &Params, data: &TrainData) -> Result<Box<dyn Classifier>> {
        let cfg = self.config(params, data.seed)?;
        let (fit_rows, val_rows) = stratified_holdout(data.y, self.train_fraction, derive_seed(data.seed, 70))?;
        let x_fit = data.x.select(Axis(0), &fit_rows);
        let x_val = data.x.select(Axis(0), &val_rows);
        let y_fit: Vec<usize> = fit_rows.iter().map(|&r| data.y[r]).collect();
        let y_val: Vec<usize> = val_rows.iter().map(|&r| data.y[r]).collect();

        let scaler = Scaler::fit_matrix(x_fit.view(), data.feature_names.to_vec())?;
        let xs_fit = scaler.transform_matrix(x_fit.view())?;
        let xs_val = scaler.transform_matrix(x_val.view())?;
        let init = NetworkModel::init(cfg, data.feature_names.to_vec(), data.classes.to_vec())?;
        let (model, log) = train(init, xs_fit.view(), &y_fit, xs_val.view(), &y_val)?;
        let validation_score = objective(&y_val, &model.predict(xs_val.view())?, data.classes, data.benign)?;
        Ok(Box::new(NetworkClassifier {
            family: self.name.clone(),
            net: ScaledNetwork { scaler, model },
            log,
            validation_score,
        }))
    }
}

// ---------------------------------------------------------------- registry

/// Model families keyed by name, in registration order.
#[derive(Default)]
pub struct ModelRegistry {
    families: Vec<Box<dyn ModelFamily>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `rf`, `gbdt_hist`, `gbdt_goss`, `mlp` and `lstm` with their default
    /// configurations and grids.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register(Box::new(ForestFamily::default()));
        r.register(Box::new(GbdtFamily::histogram()));
        r.register(Box::new(GbdtFamily::goss()));
        r.register(Box::new(NetworkFamily::mlp()));
        r.register(Box::new(NetworkFamily::lstm()));
        r
    }

    /// Adds a family, replacing any family of the same name.
    pub fn register(&mut self, family: Box<dyn ModelFamily>) {
        match self.families.iter_mut().find(|f| f.name() == family.name()) {
            Some(slot) => *slot = family,
            None => self.families.push(family),
        }
    }

    pub fn get(&self, name: &str) -> Result<&dyn ModelFamily> {
        self.families
            .iter()
            .find(|f| f.name() == name)
            .map(|f| f.as_ref())
            .ok_or_else(|| Error::NotRegistered {
                kind: "model family",
                name: name.to_string(),
                available: self.names(),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.families.iter().map(|f| f.name().to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_grid() {
        let g = GbdtFamily::histogram().grid;
        assert_eq!(g.len(), 6);
        assert_eq!(g[0].key(), "feature_subsample=0.8,max_depth=4");
        assert_eq!(Params::new().key(), "default");
    }

    #[test]
    fn params_apply() {
        let f = GbdtFamily::histogram();
        let c = f.config(&f.grid[5], 3).unwrap();
        assert_eq!(c.max_depth, Some(16));
        assert_eq!(c.feature_subsample, 0.9);
        assert_eq!(c.seed, 3);
        assert!(f.config(&Params::new().with("bogus", ParamValue::Int(1)), 0).is_err());
        let n = NetworkFamily::lstm();
        assert_eq!(n.config(&n.grid[1], 0).unwrap().hidden, [64, 32]);
        assert!(n.config(&Params::new().with("hidden", ParamValue::Text("12".into())), 0).is_err());
    }

    #[test]
    fn registry_names() {
        let r = ModelRegistry::builtin();
        assert_eq!(r.names(), vec!["rf", "gbdt_hist", "gbdt_goss", "mlp", "lstm"]);
        assert_eq!(r.get("lstm").unwrap().tuning(), Tuning::Holdout);
        assert!(matches!(r.get("svm"), Err(Error::NotRegistered { .. })));
    }

    #[test]
    fn params_serialize_flat() {
        let p = Params::new()
            .with("max_depth", ParamValue::Int(4))
            .with("hidden", ParamValue::Text("64x32".into()));
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"hidden":"64x32","max_depth":4}"#);
        assert_eq!(serde_json::from_str::<Params>(&json).unwrap(), p);
    }
}
