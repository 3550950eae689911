//! End-to-end run: ingest, exclude, split, encode, select, train, evaluate
//! and explain, with every matrix read logged per stage.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::config::{data_dir_from_env, DataSource, RunConfig};
use crate::data::{
    apply_exclusion_policy, present_categorical, FlowTable, LabelSpace, LoadOptions, OneHotEncoder, Taxonomy,
    GENIS_CATEGORICAL,
};
use crate::error::{Error, Result, StageContext};
use crate::eval::{evaluate, grid_search, holdout_search, time_harness, FeatureSet, GridSpec};
use crate::explain::{group_importance, stratified_background, Target};
use crate::featsel::{select_with, ScorerRegistry, ScoringInput, SelectionResult};
use crate::models::{Classifier, ExplainSettings, ModelRegistry, TrainData, Tuning};
use crate::report::{AttributionRecord, AuditEntry, DatasetInfo, Environment, Report, TuningRecord};
use crate::rng::derive_seed;
use crate::synth::synth_generate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Exclude,
    Split,
    Encode,
    Select,
    Scale,
    Train,
    Evaluate,
    Explain,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Exclude => "exclude",
            Stage::Split => "split",
            Stage::Encode => "encode",
            Stage::Select => "select",
            Stage::Scale => "scale",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
        }
    }
}

/// Distinct rows read by each stage, over the combined train and test rows.
#[derive(Debug)]
pub struct RowAudit {
    is_test: Vec<bool>,
    reads: Mutex<BTreeMap<Stage, BTreeSet<usize>>>,
}

impl RowAudit {
    pub fn new(n_rows: usize, test_rows: &[usize]) -> Self {
        let mut is_test = vec![false; n_rows];
        for &r in test_rows {
            is_test[r] = true;
        }
        RowAudit {
            is_test,
            reads: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn record(&self, stage: Stage, rows: &[usize]) {
        let mut reads = self.reads.lock().expect("audit lock");
        reads.entry(stage).or_default().extend(rows.iter().copied());
    }

    pub fn test_rows_read(&self, stage: Stage) -> usize {
        let reads = self.reads.lock().expect("audit lock");
        reads
            .get(&stage)
            .map_or(0, |s| s.iter().filter(|&&r| self.is_test[r]).count())
    }

    pub fn entries(&self) -> Vec<AuditEntry> {
        let reads = self.reads.lock().expect("audit lock");
        reads
            .iter()
            .map(|(stage, rows)| AuditEntry {
                stage: stage.as_str().to_string(),
                rows_read: rows.len(),
                test_rows_read: rows.iter().filter(|&&r| self.is_test[r]).count(),
            })
            .collect()
    }
}

/// Encoded rows in model-input space; all access goes through the audit.
struct Prepared {
    table: FlowTable,
    x: Array2<f64>,
    y: Vec<usize>,
    labels: LabelSpace,
    train: Vec<usize>,
    test: Vec<usize>,
    features: Vec<String>,
    audit: RowAudit,
}

impl Prepared {
    fn rows(&self, stage: Stage, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        self.audit.record(stage, rows);
        self.x.select(Axis(0), rows).select(Axis(1), cols)
    }

    fn labels(&self, stage: Stage, rows: &[usize]) -> Vec<usize> {
        self.audit.record(stage, rows);
        rows.iter().map(|&r| self.y[r]).collect()
    }

    fn counts(&self, rows: &[usize]) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> = self.labels.classes.iter().map(|c| (c.clone(), 0)).collect();
        for &r in rows {
            *out.get_mut(&self.labels.classes[self.y[r]]).expect("known class") += 1;
        }
        out
    }
}

pub struct TrainedModel {
    pub model: String,
    pub feature_set: FeatureSet,
    pub classifier: Box<dyn Classifier>,
}

pub struct PipelineRun {
    pub report: Report,
    pub models: Vec<TrainedModel>,
    pub selection: Option<SelectionResult>,
}

pub struct Pipeline {
    pub config: RunConfig,
    pub models: ModelRegistry,
    pub data_dir: Option<PathBuf>,
}

impl Pipeline {
    /// Built-in model families; the dataset directory comes from the
    /// environment.
    pub fn new(config: RunConfig) -> Self {
        Pipeline {
            config,
            models: ModelRegistry::builtin(),
            data_dir: data_dir_from_env(),
        }
    }

    pub fn with_models(mut self, models: ModelRegistry) -> Self {
        self.models = models;
        self
    }

    pub fn with_data_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.data_dir = dir;
        self
    }

    pub fn run(&self) -> Result<PipelineRun> {
        self.run_until(Stage::Explain)
    }

    /// Runs every stage up to and including `last`.
    pub fn run_until(&self, last: Stage) -> Result<PipelineRun> {
        if self.config.single_thread {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| self.execute(last))
        } else {
            self.execute(last)
        }
    }

    fn load(&self) -> Result<(FlowTable, Option<usize>, String)> {
        let cfg = &self.config;
        let (train, test, taxonomy) = match cfg.resolve_source(self.data_dir.as_deref())? {
            DataSource::Synth(spec) => {
                let desc = format!("synthetic ({} rows, seed {})", spec.n_rows, spec.seed);
                return Ok((synth_generate(&spec)?, None, desc));
            }
            DataSource::Files { train, test, taxonomy } => (train, test, taxonomy),
        };
        let taxonomy = match taxonomy {
            Some(p) => Taxonomy::from_path(p)?,
            None => Taxonomy::genis(),
        };
        let opts = LoadOptions {
            max_unknown_columns: cfg.data.max_unknown_columns,
        };
        let read = |p: &PathBuf| -> Result<FlowTable> {
            let loaded = FlowTable::load_csv(p, &taxonomy, opts)?;
            if loaded.dropped_rows > 0 {
                log::warn!("{}: dropped {} malformed rows", p.display(), loaded.dropped_rows);
            }
            Ok(loaded.table)
        };
        match test {
            None => Ok((read(&train)?, None, train.display().to_string())),
            Some(test) => {
                let a = read(&train)?;
                let b = read(&test)?;
                let desc = format!("{} + {}", train.display(), test.display());
                Ok((a.concat(&b)?, Some(a.n_rows()), desc))
            }
        }
    }

    fn prepare(&self) -> Result<(Prepared, DatasetInfo)> {
        let cfg = &self.config;
        let (raw, n_train, source) = self.load().stage(Stage::Ingest.as_str())?;
        log::info!("ingested {} rows from {source}", raw.n_rows());
        let (table, removed) = apply_exclusion_policy(&raw);

        let (labels, y, train, test) = (|| -> Result<_> {
            let column = cfg.task.label_column();
            let raw_labels = table.label(column).ok_or_else(|| Error::ColumnNotFound(column.into()))?;
            let labels = LabelSpace::infer(cfg.task, raw_labels, &cfg.data.benign_class)?;
            let y = labels.encode(raw_labels)?;
            let (train, test) = match n_train {
                Some(n) => ((0..n).collect(), (n..y.len()).collect()),
                None => crate::preprocess::stratified_holdout(&y, 1.0 - cfg.data.test_fraction, derive_seed(cfg.seed, 1))?,
            };
            if train.is_empty() || test.is_empty() {
                return Err(Error::NotEnoughData("empty train or test split".into()));
            }
            Ok((labels, y, train, test))
        })()
        .stage(Stage::Split.as_str())?;
        let audit = RowAudit::new(y.len(), &test);

        let (encoded, features, x) = (|| -> Result<_> {
            let categorical = present_categorical(&table, &GENIS_CATEGORICAL);
            audit.record(Stage::Encode, &train);
            let encoder = OneHotEncoder::fit(&table.take_rows(&train), &categorical)?;
            let encoded = encoder.transform(&table)?;
            let features = encoded.feature_names();
            if features.is_empty() {
                return Err(Error::NotEnoughData("no model input columns".into()));
            }
            let x = encoded.matrix(&features)?;
            Ok((encoded, features, x))
        })()
        .stage(Stage::Encode.as_str())?;

        let prepared = Prepared {
            table: encoded,
            x,
            y,
            labels,
            train,
            test,
            features,
            audit,
        };
        let info = DatasetInfo {
            source,
            n_rows: prepared.y.len(),
            n_train: prepared.train.len(),
            n_test: prepared.test.len(),
            classes: prepared.labels.classes.clone(),
            benign_class: prepared.labels.benign_class.clone(),
            train_counts: prepared.counts(&prepared.train),
            test_counts: prepared.counts(&prepared.test),
            features: prepared.features.clone(),
            removed,
        };
        Ok((prepared, info))
    }

    fn execute(&self, last: Stage) -> Result<PipelineRun> {
        let cfg = &self.config;
        let started = Instant::now();
        let mut environment = Environment::capture(cfg.single_thread);
        cfg.validate().stage("config")?;
        for name in &cfg.models {
            self.models.get(name).stage("config")?;
        }

        let (p, dataset) = self.prepare()?;
        let d = p.features.len();
        let all_cols: Vec<usize> = (0..d).collect();
        let mut report = Report {
            task: cfg.task,
            seed: cfg.seed,
            models: cfg.models.clone(),
            dataset,
            selection: None,
            evaluations: vec![],
            tuning: vec![],
            attributions: vec![],
            audit: vec![],
            environment: environment.clone(),
        };
        let mut trained = Vec::new();

        if cfg.selection.enabled && cfg.selection.k > d {
            return Err(Error::invalid(format!(
                "select-k {} exceeds the {d} available features",
                cfg.selection.k
            )))
            .stage(Stage::Select.as_str());
        }

        let mut feature_sets = vec![(FeatureSet::Full, all_cols.clone())];
        if cfg.selection.enabled && last >= Stage::Select {
            let result = (|| {
                let sel_cfg = cfg.selection.to_config(derive_seed(cfg.seed, 2));
                let x = p.rows(Stage::Select, &p.train, &all_cols);
                let y = p.labels(Stage::Select, &p.train);
                let input = ScoringInput::new(x.view(), &y, p.labels.n_classes(), &p.features);
                select_with(&ScorerRegistry::builtin(&sel_cfg), &input, &sel_cfg)
            })()
            .stage(Stage::Select.as_str())?;
            let cols = result
                .selected
                .iter()
                .map(|n| p.features.iter().position(|f| f == n).expect("selected from these features"))
                .collect();
            feature_sets.push((FeatureSet::Selected, cols));
            report.selection = Some(result);
        }
        let explained = feature_sets.last().map(|f| f.0).expect("full set present");

        if last >= Stage::Train {
            let classes = &p.labels.classes;
            let benign = p.labels.benign_index();
            for (m, name) in cfg.models.iter().enumerate() {
                let family = self.models.get(name)?;
                for (fs, cols) in &feature_sets {
                    let names: Vec<String> = cols.iter().map(|&c| p.features[c].clone()).collect();
                    let x = p.rows(Stage::Train, &p.train, cols);
                    let y = p.labels(Stage::Train, &p.train);
                    if family.tuning() == Tuning::Holdout {
                        p.audit.record(Stage::Scale, &p.train);
                    }
                    let data = TrainData {
                        x: x.view(),
                        y: &y,
                        classes,
                        benign,
                        feature_names: &names,
                        seed: derive_seed(cfg.seed, 100 + m as u64),
                    };
                    log::info!("training {name} on {} features", names.len());
                    let (grid, classifier, tt) = (|| -> Result<_> {
                        match family.tuning() {
                            Tuning::CrossValidation => {
                                let spec = GridSpec {
                                    candidates: family.grid(),
                                    folds: cfg.tuning.folds,
                                    tie_break: cfg.tuning.tie_break,
                                    max_rows: cfg.tuning.cv_max_rows,
                                };
                                let grid = grid_search(family, &spec, &data)?;
                                let (fit, tt) = time_harness(|| family.fit(&grid.best().params, &data));
                                Ok((grid, fit?, tt))
                            }
                            Tuning::Holdout => {
                                let (grid, model) = holdout_search(family, &family.grid(), &data, cfg.tuning.tie_break)?;
                                let tt = grid.best().train_seconds;
                                Ok((grid, model, tt))
                            }
                        }
                    })()
                    .stage(Stage::Train.as_str())?;
                    report.tuning.push(TuningRecord {
                        model: name.clone(),
                        feature_set: *fs,
                        tuning: family.tuning(),
                        winner: grid.best().params.clone(),
                        grid,
                    });

                    if last >= Stage::Evaluate {
                        let eval = (|| {
                            let x = p.rows(Stage::Evaluate, &p.test, cols);
                            let y = p.labels(Stage::Evaluate, &p.test);
                            evaluate(classifier.as_ref(), x.view(), &y, classes, benign, *fs, tt)
                        })()
                        .stage(Stage::Evaluate.as_str())?;
                        report.evaluations.push(eval);
                    }

                    if last >= Stage::Explain && cfg.explain.enabled && *fs == explained {
                        let record = self
                            .explain(&p, classifier.as_ref(), name, *fs, cols)
                            .stage(Stage::Explain.as_str())?;
                        report.attributions.push(record);
                    }
                    trained.push(TrainedModel {
                        model: name.clone(),
                        feature_set: *fs,
                        classifier,
                    });
                }
            }
        }

        report.audit = p.audit.entries();
        environment.wall_seconds = started.elapsed().as_secs_f64();
        report.environment = environment;
        let selection = report.selection.clone();
        Ok(PipelineRun {
            report,
            models: trained,
            selection,
        })
    }

    fn explain(
        &self,
        p: &Prepared,
        classifier: &dyn Classifier,
        name: &str,
        fs: FeatureSet,
        cols: &[usize],
    ) -> Result<AttributionRecord> {
        let cfg = &self.config;
        let test_y: Vec<usize> = p.test.iter().map(|&r| p.y[r]).collect();
        let picks = stratified_background(&test_y, cfg.explain.rows, derive_seed(cfg.seed, 200))?;
        let rows: Vec<usize> = picks.iter().map(|&i| p.test[i]).collect();
        let train_y: Vec<usize> = p.train.iter().map(|&r| p.y[r]).collect();
        let bg_picks = stratified_background(&train_y, cfg.explain.background, derive_seed(cfg.seed, 201))?;
        let bg_rows: Vec<usize> = bg_picks.iter().map(|&i| p.train[i]).collect();

        let x = p.rows(Stage::Explain, &rows, cols);
        let background = p.rows(Stage::Explain, &bg_rows, cols);
        let settings = ExplainSettings {
            background: background.view(),
            n_permutations: cfg.explain.permutations,
            seed: derive_seed(cfg.seed, 202),
        };
        let attr = classifier.explain(x.view(), Target::Predicted, &settings)?;
        let groups = group_importance(&attr, p.table.taxonomy())?;
        Ok(AttributionRecord {
            model: name.to_string(),
            feature_set: fs,
            rows: rows.len(),
            output_kind: attr.output_kind,
            max_additivity_error: attr.additivity_error(),
            dominant: groups.dominant(),
            groups,
        })
    }
}

/// Runs every stage with the built-in families.
pub fn run_pipeline(config: &RunConfig) -> Result<Report> {
    Ok(Pipeline::new(config.clone()).run()?.report)
}
