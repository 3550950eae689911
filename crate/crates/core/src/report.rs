//! Run reports: a JSON document with every number at full precision and a
//! plain-text rendering laid out like the published result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{Category, Removal, Task};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, FeatureSet, GridResult};
use crate::explain::{render_group_table, GroupImportance, OutputKind};
use crate::featsel::SelectionResult;
use crate::models::{Params, Tuning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub source: String,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub classes: Vec<String>,
    pub benign_class: String,
    pub train_counts: BTreeMap<String, usize>,
    pub test_counts: BTreeMap<String, usize>,
    /// Model inputs after exclusion and encoding.
    pub features: Vec<String>,
    pub removed: Vec<Removal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub model: String,
    pub feature_set: FeatureSet,
    pub tuning: Tuning,
    pub winner: Params,
    pub grid: GridResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub model: String,
    pub feature_set: FeatureSet,
    pub rows: usize,
    pub output_kind: OutputKind,
    pub max_additivity_error: f64,
    pub dominant: Category,
    pub groups: GroupImportance,
}

/// Distinct rows a pipeline stage read, and how many of them were test rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub stage: String,
    pub rows_read: usize,
    pub test_rows_read: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub single_thread: bool,
    pub started_unix_seconds: u64,
    pub wall_seconds: f64,
}

impl Environment {
    pub fn capture(single_thread: bool) -> Self {
        Environment {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
            single_thread,
            started_unix_seconds: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_seconds: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: Task,
    pub seed: u64,
    pub models: Vec<String>,
    pub dataset: DatasetInfo,
    pub selection: Option<SelectionResult>,
    pub evaluations: Vec<EvalReport>,
    pub tuning: Vec<TuningRecord>,
    pub attributions: Vec<AttributionRecord>,
    pub audit: Vec<AuditEntry>,
    pub environment: Environment,
}

/// Paths written by [`Report::write`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub machine: PathBuf,
    pub human: PathBuf,
}

pub const MACHINE_FILE: &str = "report.json";
pub const HUMAN_FILE: &str = "report.txt";

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("_seconds"));
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Machine form with every `*_seconds` field removed, for comparing runs.
    pub fn without_timing(&self) -> Result<Value> {
        let mut v = serde_json::to_value(self)?;
        strip_timing(&mut v);
        Ok(v)
    }

    pub fn evaluation(&self, model: &str, feature_set: FeatureSet) -> Option<&EvalReport> {
        self.evaluations
            .iter()
            .find(|e| e.model == model && e.feature_set == feature_set)
    }

    pub fn render_human(&self) -> String {
        let mut out = String::new();
        let d = &self.dataset;
        let _ = writeln!(out, "task: {}  seed: {}  source: {}", self.task, self.seed, d.source);
        let _ = writeln!(
            out,
            "rows: {} train / {} test  features: {}  removed columns: {}",
            d.n_train,
            d.n_test,
            d.features.len(),
            d.removed.len()
        );
        let _ = writeln!(out, "\n== Results ==");
        out.push_str(&render_results_table(&self.evaluations));
        if let Some(sel) = &self.selection {
            let _ = writeln!(
                out,
                "\n== Feature selection (k = {}, cumulative importance {:.4}) ==",
                sel.k, sel.cumulative_importance
            );
            out.push_str(&sel.render_text());
        }
        if !self.attributions.is_empty() {
            let _ = writeln!(out, "\n== Mean |SHAP| by feature category ==");
            let rows: Vec<(String, GroupImportance)> = self
                .attributions
                .iter()
                .map(|a| (a.model.clone(), a.groups.clone()))
                .collect();
            out.push_str(&render_group_table(&rows));
        }
        if !self.tuning.is_empty() {
            let _ = writeln!(out, "\n== Tuning ==");
            for t in &self.tuning {
                let best = t.grid.best();
                let _ = writeln!(
                    out,
                    "{:<10} {:<9} {} of {} candidates, winner {} (objective {:.4})",
                    t.model,
                    t.feature_set.as_str(),
                    t.grid.candidates.iter().filter(|c| c.error.is_none()).count(),
                    t.grid.candidates.len(),
                    t.winner,
                    best.mean_score
                );
            }
        }
        if !self.audit.is_empty() {
            let _ = writeln!(out, "\n== Row access ==");
            for a in &self.audit {
                let _ = writeln!(out, "{:<10} {:>8} rows  {:>8} test rows", a.stage, a.rows_read, a.test_rows_read);
            }
        }
        out
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<ReportFiles> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let machine = dir.join(MACHINE_FILE);
        let human = dir.join(HUMAN_FILE);
        std::fs::write(&machine, self.to_json()?).map_err(|e| Error::io(&machine, e))?;
        std::fs::write(&human, self.render_human()).map_err(|e| Error::io(&human, e))?;
        Ok(ReportFiles { machine, human })
    }
}

/// One parsed line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub feature_set: FeatureSet,
    pub f1s: f64,
    pub acc: f64,
    pub rcl: f64,
    pub prc: f64,
    pub fpr: f64,
    pub tt: f64,
    pub te: Option<f64>,
    pub it: f64,
}

const HEADER: [&str; 10] = ["Model", "FS", "F1S", "ACC", "RCL", "PRC", "FPR", "TT", "TE", "IT"];

/// Percentages to four decimals and seconds to two; FS is `yes` for the
/// selected feature set and TE is `-` for models without epochs.
pub fn render_results_table(rows: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<3} {:>9} {:>9} {:>9} {:>9} {:>7} {:>9} {:>7} {:>7}",
        HEADER[0], HEADER[1], HEADER[2], HEADER[3], HEADER[4], HEADER[5], HEADER[6], HEADER[7], HEADER[8], HEADER[9]
    );
    for r in rows {
        let fs = match r.feature_set {
            FeatureSet::Full => "no",
            FeatureSet::Selected => "yes",
        };
        let te = r.te_seconds.map_or("-".to_string(), |t| format!("{t:.2}"));
        let _ = writeln!(
            out,
            "{:<10} {:<3} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>7.4} {:>9.2} {:>7} {:>7.2}",
            r.model, fs, r.f1s, r.acc, r.rcl, r.prc, r.fpr, r.tt_seconds, te, r.it_seconds
        );
    }
    out
}

/// Reads back the first results table found in `text`.
pub fn parse_results_table(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines().skip_while(|l| l.split_whitespace().collect::<Vec<_>>() != HEADER);
    if lines.next().is_none() {
        return Err(Error::invalid("no results table header found"));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::invalid(format!("not a number in results table: {s:?}")))
    };
    let mut rows = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.is_empty() {
            break;
        }
        if cells.len() != HEADER.len() {
            return Err(Error::invalid(format!("results row has {} cells: {line:?}", cells.len())));
        }
        let feature_set = match cells[1] {
            "no" => FeatureSet::Full,
            "yes" => FeatureSet::Selected,
            other => return Err(Error::invalid(format!("FS must be yes or no, got {other:?}"))),
        };
        rows.push(TableRow {
            model: cells[0].to_string(),
            feature_set,
            f1s: num(cells[2])?,
            acc: num(cells[3])?,
            rcl: num(cells[4])?,
            prc: num(cells[5])?,
            fpr: num(cells[6])?,
            tt: num(cells[7])?,
            te: if cells[8] == "-" { None } else { Some(num(cells[8])?) },
            it: num(cells[9])?,
        });
    }
    Ok(rows)
}
