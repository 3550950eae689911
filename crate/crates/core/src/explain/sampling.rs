use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{Attribution, OutputKind, ProbabilityModel, Target};
use crate::error::{Error, Result};
use crate::preprocess::stratified_holdout;
use crate::rng::stream_rng;

/// Attributions from the permutation estimator, with the standard error of
/// each entry.
#[derive(Debug, Clone)]
pub struct SampledAttribution {
    pub attribution: Attribution,
    pub std_error: Array2<f64>,
    pub n_permutations: usize,
}

/// Monte-Carlo permutation Shapley values.
///
/// Each draw pairs a random feature order with a random background row,
/// starts from the background row and switches features to the explained
/// row's values one at a time, crediting each feature with the change in the
/// target probability. The per-row base value is the mean output at the
/// drawn background rows, so `base + sum(phi)` equals the model output.
pub fn sampled_shapley<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: ArrayView2<f64>,
    background: ArrayView2<f64>,
    target: Target,
    n_permutations: usize,
    seed: u64,
) -> Result<SampledAttribution> {
    if background.nrows() == 0 {
        return Err(Error::NotEnoughData("empty background set".into()));
    }
    if n_permutations == 0 {
        return Err(Error::invalid("at least one permutation is required"));
    }
    let d = model.n_features();
    for cols in [x.ncols(), background.ncols()] {
        if cols != d {
            return Err(Error::DimensionMismatch { expected: d, got: cols });
        }
    }
    let proba = model.predict_proba(x)?;
    let targets = target.resolve(x.nrows(), proba.ncols(), || Ok(crate::trees::argmax_rows(&proba)))?;

    type RowResult = (Vec<f64>, Vec<f64>, f64, f64);
    let rows: Vec<RowResult> = (0..x.nrows())
        .into_par_iter()
        .map(|r| -> Result<RowResult> {
            let mut rng = stream_rng(seed, r as u64);
            let t = targets[r];
            let xr = x.row(r);
            let mut order: Vec<usize> = (0..d).collect();
            let mut sum = vec![0.0; d];
            let mut sum_sq = vec![0.0; d];
            let mut base = 0.0;
            let mut chain = Array2::zeros((d + 1, d));
            for _ in 0..n_permutations {
                order.shuffle(&mut rng);
                let b = background.row(rng.gen_range(0..background.nrows()));
                chain.row_mut(0).assign(&b);
                for (step, &j) in order.iter().enumerate() {
                    let prev = chain.row(step).to_owned();
                    let mut next = chain.row_mut(step + 1);
                    next.assign(&prev);
                    next[j] = xr[j];
                }
                let p = model.predict_proba(chain.view())?;
                base += p[[0, t]];
                for (step, &j) in order.iter().enumerate() {
                    let delta = p[[step + 1, t]] - p[[step, t]];
                    sum[j] += delta;
                    sum_sq[j] += delta * delta;
                }
            }
            let n = n_permutations as f64;
            let phi: Vec<f64> = sum.iter().map(|s| s / n).collect();
            let se: Vec<f64> = if n_permutations > 1 {
                sum_sq
                    .iter()
                    .zip(&phi)
                    .map(|(sq, m)| ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
                    .collect()
            } else {
                vec![f64::INFINITY; d]
            };
            Ok((phi, se, base / n, proba[[r, t]]))
        })
        .collect::<Result<_>>()?;

    let mut values = Array2::zeros((x.nrows(), d));
    let mut std_error = Array2::zeros((x.nrows(), d));
    let mut base_values = Vec::with_capacity(x.nrows());
    let mut outputs = Vec::with_capacity(x.nrows());
    for (r, (phi, se, base, out)) in rows.into_iter().enumerate() {
        values.row_mut(r).assign(&ndarray::Array1::from(phi));
        std_error.row_mut(r).assign(&ndarray::Array1::from(se));
        base_values.push(base);
        outputs.push(out);
    }
    Ok(SampledAttribution {
        attribution: Attribution {
            feature_names: model.feature_names().to_vec(),
            values,
            base_values,
            outputs,
            targets,
            output_kind: OutputKind::Probability,
        },
        std_error,
        n_permutations,
    })
}

/// Up to `n` row indices drawn in proportion to the classes in `y`.
pub fn stratified_background(y: &[usize], n: usize, seed: u64) -> Result<Vec<usize>> {
    if y.is_empty() || n == 0 {
        return Err(Error::NotEnoughData("empty background set".into()));
    }
    if n >= y.len() {
        return Ok((0..y.len()).collect());
    }
    match stratified_holdout(y, n as f64 / y.len() as f64, seed) {
        Ok((rows, _)) => Ok(rows),
        // Classes with a single row cannot be split; fall back to a plain draw.
        Err(_) => {
            let mut rows: Vec<usize> = (0..y.len()).collect();
            rows.shuffle(&mut stream_rng(seed, 0));
            rows.truncate(n);
            rows.sort_unstable();
            Ok(rows)
        }
    }
}
