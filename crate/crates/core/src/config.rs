//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::eval::TieBreak;
use crate::featsel::{BinningConfig, DispersionFormula, RfeConfig, SelectionConfig};
use crate::synth::SynthSpec;

/// Environment variable naming the default dataset directory.
pub const DATA_DIR_ENV: &str = "GENISBENCH_DATA_DIR";

pub const MODEL_NAMES: [&str; 5] = ["rf", "gbdt_hist", "gbdt_goss", "mlp", "lstm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    /// When absent, the test rows are a stratified share of `train`.
    pub test: Option<PathBuf>,
    /// Descriptor CSV; the bundled GeNIS taxonomy otherwise.
    pub taxonomy: Option<PathBuf>,
    pub max_unknown_columns: usize,
    pub test_fraction: f64,
    pub benign_class: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: None,
            test: None,
            taxonomy: None,
            max_unknown_columns: 0,
            test_fraction: 0.2,
            benign_class: "Benign".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionSettings {
    pub enabled: bool,
    pub k: usize,
    pub methods: Vec<String>,
    pub n_bins: usize,
    pub rfe_step: f64,
    pub rfe_max_rows: Option<usize>,
    pub dispersion_formula: DispersionFormula,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        let base = SelectionConfig::default();
        SelectionSettings {
            enabled: true,
            k: base.k,
            methods: base.methods,
            n_bins: base.binning.n_bins,
            rfe_step: base.rfe.step,
            rfe_max_rows: base.rfe.max_rows,
            dispersion_formula: base.dispersion_formula,
        }
    }
}

impl SelectionSettings {
    pub fn to_config(&self, seed: u64) -> SelectionConfig {
        let mut rfe = RfeConfig {
            step: self.rfe_step,
            max_rows: self.rfe_max_rows,
            ..RfeConfig::default()
        };
        rfe.forest.seed = seed;
        SelectionConfig {
            k: self.k,
            methods: self.methods.clone(),
            binning: BinningConfig { n_bins: self.n_bins },
            rfe,
            dispersion_formula: self.dispersion_formula,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningSettings {
    pub folds: usize,
    /// Stratified row cap for cross-validation; the final fit uses all rows.
    pub cv_max_rows: Option<usize>,
    pub tie_break: TieBreak,
}

impl Default for TuningSettings {
    fn default() -> Self {
        TuningSettings {
            folds: 5,
            cv_max_rows: None,
            tie_break: TieBreak::Lexicographic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributionSettings {
    pub enabled: bool,
    /// Test rows explained per model, drawn stratified by class.
    pub rows: usize,
    /// Training rows used as the reference distribution for networks.
    pub background: usize,
    pub permutations: usize,
}

impl Default for AttributionSettings {
    fn default() -> Self {
        AttributionSettings {
            enabled: true,
            rows: 100,
            background: 50,
            permutations: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub task: Task,
    pub seed: u64,
    pub models: Vec<String>,
    pub out: Option<PathBuf>,
    pub single_thread: bool,
    pub data: DataConfig,
    /// Inline synthetic data; takes precedence over files.
    pub synth: Option<SynthSpec>,
    pub selection: SelectionSettings,
    pub tuning: TuningSettings,
    pub explain: AttributionSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Binary,
            seed: 42,
            models: MODEL_NAMES.iter().map(|s| s.to_string()).collect(),
            out: None,
            single_thread: false,
            data: DataConfig::default(),
            synth: None,
            selection: SelectionSettings::default(),
            tuning: TuningSettings::default(),
            explain: AttributionSettings::default(),
        }
    }
}

/// Where the rows come from once the configuration is resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth(SynthSpec),
    Files {
        train: PathBuf,
        test: Option<PathBuf>,
        taxonomy: Option<PathBuf>,
    },
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        if self.selection.enabled && self.selection.k == 0 {
            return Err(Error::Config("select-k must be at least 1".into()));
        }
        if self.selection.enabled && self.selection.methods.is_empty() {
            return Err(Error::Config("selection needs at least one method".into()));
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.data.test_fraction
            )));
        }
        if self.tuning.folds < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        if let Some(spec) = &self.synth {
            spec.validate()?;
        }
        Ok(())
    }

    /// Synthetic data first, then explicit files, then `train.csv` and
    /// `test.csv` under `data_dir`. Relative file paths resolve against
    /// `data_dir` when one is given. A `taxonomy.csv` next to the training
    /// file is used when no taxonomy is configured.
    pub fn resolve_source(&self, data_dir: Option<&Path>) -> Result<DataSource> {
        if let Some(spec) = &self.synth {
            return Ok(DataSource::Synth(spec.clone()));
        }
        let resolve = |p: &Path| match data_dir {
            Some(dir) if p.is_relative() && !p.exists() => dir.join(p),
            _ => p.to_path_buf(),
        };
        let taxonomy_near = |train: &Path| {
            self.data.taxonomy.as_deref().map(resolve).or_else(|| {
                let t = train.with_file_name("taxonomy.csv");
                t.is_file().then_some(t)
            })
        };
        if let Some(train) = &self.data.train {
            let train = resolve(train);
            return Ok(DataSource::Files {
                taxonomy: taxonomy_near(&train),
                test: self.data.test.as_deref().map(resolve),
                train,
            });
        }
        if let Some(dir) = data_dir {
            let train = dir.join("train.csv");
            if train.is_file() {
                let test = dir.join("test.csv");
                return Ok(DataSource::Files {
                    taxonomy: taxonomy_near(&train),
                    test: test.is_file().then_some(test),
                    train,
                });
            }
        }
        Err(Error::Config(format!(
            "no data source: give a synth spec, data.train, or set {DATA_DIR_ENV} to a directory holding train.csv"
        )))
    }
}

/// Directory named by [`DATA_DIR_ENV`], if set.
pub fn data_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}
