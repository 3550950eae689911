use std::time::Instant;

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{objective, Classifier, ModelFamily, Params, TrainData};
use crate::preprocess::{stratified_holdout, FoldPlan};
use crate::rng::derive_seed;

/// How candidates with equal mean objective are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Faster training first, then the candidate's canonical name.
    #[default]
    TrainingTime,
    /// Canonical name only; keeps the outcome independent of the clock.
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub candidates: Vec<Params>,
    pub folds: usize,
    pub tie_break: TieBreak,
    /// Stratified row cap applied before building the folds.
    pub max_rows: Option<usize>,
}

impl GridSpec {
    pub fn new(candidates: Vec<Params>) -> Self {
        GridSpec {
            candidates,
            folds: 5,
            tie_break: TieBreak::default(),
            max_rows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: Params,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
    pub train_seconds: f64,
    pub error: Option<String>,
}

impl CandidateScore {
    fn failed(params: Params, err: &Error) -> Self {
        CandidateScore {
            params,
            fold_scores: vec![],
            mean_score: f64::NEG_INFINITY,
            train_seconds: 0.0,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub family: String,
    pub candidates: Vec<CandidateScore>,
    pub winner: usize,
}

impl GridResult {
    pub fn best(&self) -> &CandidateScore {
        &self.candidates[self.winner]
    }
}

fn pick_winner(candidates: &[CandidateScore], tie_break: TieBreak) -> Result<usize> {
    let ok: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].error.is_none()).collect();
    if ok.is_empty() {
        let reasons: Vec<String> = candidates
            .iter()
            .map(|c| format!("{}: {}", c.params, c.error.as_deref().unwrap_or("")))
            .collect();
        return Err(Error::AllCandidatesFailed(reasons.join("; ")));
    }
    let best = ok.iter().map(|&i| candidates[i].mean_score).fold(f64::NEG_INFINITY, f64::max);
    let mut tied: Vec<usize> = ok
        .into_iter()
        .filter(|&i| (candidates[i].mean_score - best).abs() <= 1e-12)
        .collect();
    tied.sort_by(|&a, &b| {
        let (ca, cb) = (&candidates[a], &candidates[b]);
        let by_time = match tie_break {
            TieBreak::TrainingTime => ca.train_seconds.total_cmp(&cb.train_seconds),
            TieBreak::Lexicographic => std::cmp::Ordering::Equal,
        };
        by_time.then_with(|| ca.params.key().cmp(&cb.params.key()))
    });
    Ok(tied[0])
}

/// Exhaustive grid search with stratified k-fold cross-validation. Each
/// candidate is fitted on k-1 folds and scored on the held-out fold; a
/// candidate whose fit fails is recorded and skipped.
pub fn grid_search(family: &dyn ModelFamily, spec: &GridSpec, data: &TrainData) -> Result<GridResult> {
    if spec.candidates.is_empty() {
        return Err(Error::invalid(format!("empty grid for {}", family.name())));
    }
    let rows: Vec<usize> = match spec.max_rows {
        Some(cap) if cap < data.y.len() => {
            stratified_holdout(data.y, cap as f64 / data.y.len() as f64, derive_seed(data.seed, 5))?.0
        }
        _ => (0..data.y.len()).collect(),
    };
    let x = data.x.select(Axis(0), &rows);
    let y: Vec<usize> = rows.iter().map(|&r| data.y[r]).collect();
    let plan = FoldPlan::stratified(&y, spec.folds, derive_seed(data.seed, 6))?;
    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..spec.folds).map(|i| plan.fold(i)).collect();

    let candidates: Vec<CandidateScore> = spec
        .candidates
        .iter()
        .map(|params| {
            let fits: Result<Vec<(f64, f64)>> = folds
                .par_iter()
                .map(|(tr, te)| {
                    let xtr = x.select(Axis(0), tr);
                    let ytr: Vec<usize> = tr.iter().map(|&r| y[r]).collect();
                    let fold_data = TrainData {
                        x: xtr.view(),
                        y: &ytr,
                        ..*data
                    };
                    let start = Instant::now();
                    let model = family.fit(params, &fold_data)?;
                    let secs = start.elapsed().as_secs_f64();
                    let xte = x.select(Axis(0), te);
                    let yte: Vec<usize> = te.iter().map(|&r| y[r]).collect();
                    let score = objective(&yte, &model.predict(xte.view())?, data.classes, data.benign)?;
                    Ok((score, secs))
                })
                .collect();
            match fits {
                Ok(f) => {
                    let fold_scores: Vec<f64> = f.iter().map(|p| p.0).collect();
                    CandidateScore {
                        params: params.clone(),
                        mean_score: fold_scores.iter().sum::<f64>() / fold_scores.len() as f64,
                        fold_scores,
                        train_seconds: f.iter().map(|p| p.1).sum(),
                        error: None,
                    }
                }
                Err(e) => CandidateScore::failed(params.clone(), &e),
            }
        })
        .collect();
    let winner = pick_winner(&candidates, spec.tie_break)?;
    Ok(GridResult {
        family: family.name().to_string(),
        candidates,
        winner,
    })
}

/// Fits every candidate on the full training rows and compares them on the
/// objective each model reports for its own holdout. Returns the comparison
/// and the winning model.
pub fn holdout_search(
    family: &dyn ModelFamily,
    candidates: &[Params],
    data: &TrainData,
    tie_break: TieBreak,
) -> Result<(GridResult, Box<dyn Classifier>)> {
    if candidates.is_empty() {
        return Err(Error::invalid(format!("empty grid for {}", family.name())));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut models = Vec::with_capacity(candidates.len());
    for params in candidates {
        let start = Instant::now();
        match family.fit(params, data) {
            Ok(model) => {
                let secs = start.elapsed().as_secs_f64();
                let score = model
                    .validation_score()
                    .ok_or_else(|| Error::invalid(format!("{} reports no holdout score", family.name())))?;
                scores.push(CandidateScore {
                    params: params.clone(),
                    fold_scores: vec![score],
                    mean_score: score,
                    train_seconds: secs,
                    error: None,
                });
                models.push(Some(model));
            }
            Err(e) => {
                scores.push(CandidateScore::failed(params.clone(), &e));
                models.push(None);
            }
        }
    }
    let winner = pick_winner(&scores, tie_break)?;
    let model = models.swap_remove(winner).expect("winner trained successfully");
    Ok((
        GridResult {
            family: family.name().to_string(),
            candidates: scores,
            winner,
        },
        model,
    ))
}
