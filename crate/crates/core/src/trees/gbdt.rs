//! Second-order gradient boosting over histogram-binned features.
//!
//! Two growth modes share one tree builder:
//! - `Histogram`: depth-limited growth on every row.
//! - `Goss`: leaf-limited best-first growth on a gradient-based one-side
//!   sample of rows (large gradients kept, a random share of the rest
//!   re-weighted by `(1 - a) / b`).
//!
//! Split gain is `GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)`; a split is kept only
//! when its gain reaches `min_loss_reduction`. Leaf weights are `-G/(H+l)`.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::columns_of;
use super::model::{check_training_input, sigmoid, softmax_in_place, EnsembleKind, ModelConfig, TreeEnsembleModel};
use super::tree::{midpoint, Node, Tree};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostMode {
    Histogram,
    Goss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub mode: BoostMode,
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub min_loss_reduction: f64,
    pub max_depth: Option<usize>,
    pub max_leaves: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_child_weight: f64,
    pub feature_subsample: f64,
    pub n_histogram_bins: usize,
    pub l2_regularization: f64,
    pub goss_a: f64,
    pub goss_b: f64,
    pub seed: u64,
}

impl GbdtConfig {
    /// Depth-wise histogram boosting, learning rate 0.2.
    pub fn histogram() -> Self {
        GbdtConfig {
            mode: BoostMode::Histogram,
            n_estimators: 100,
            learning_rate: 0.2,
            min_loss_reduction: 0.01,
            max_depth: Some(8),
            max_leaves: None,
            min_samples_leaf: 1,
            min_child_weight: 1e-3,
            feature_subsample: 0.8,
            n_histogram_bins: 256,
            l2_regularization: 1.0,
            goss_a: 0.2,
            goss_b: 0.1,
            seed: 0,
        }
    }

    /// Leaf-wise GOSS boosting, learning rate 0.05, at most 15 leaves.
    pub fn goss() -> Self {
        GbdtConfig {
            mode: BoostMode::Goss,
            learning_rate: 0.05,
            max_depth: None,
            max_leaves: Some(15),
            min_samples_leaf: 2,
            feature_subsample: 0.8,
            ..Self::histogram()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.n_histogram_bins < 2 || self.n_histogram_bins > 256 {
            return Err(Error::invalid("n_histogram_bins must lie in [2, 256]"));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(Error::invalid("feature_subsample must lie in (0, 1]"));
        }
        if self.min_samples_leaf == 0 || self.max_depth == Some(0) || self.max_leaves.is_some_and(|l| l < 2) {
            return Err(Error::invalid("tree size limits must be positive"));
        }
        if self.l2_regularization < 0.0 || self.min_loss_reduction < 0.0 {
            return Err(Error::invalid("regularization terms must be non-negative"));
        }
        if self.mode == BoostMode::Goss
            && !(self.goss_a >= 0.0 && self.goss_b > 0.0 && self.goss_a + self.goss_b <= 1.0)
        {
            return Err(Error::invalid("GOSS needs a >= 0, b > 0 and a + b <= 1"));
        }
        Ok(())
    }
}

/// Per-feature bin boundaries. A value falls in bin `b` when it exceeds
/// exactly `b` of the feature's cuts; cuts sit midway between consecutive
/// distinct training values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub cuts: Vec<Vec<f64>>,
}

impl BinMapper {
    pub fn fit(x: ArrayView2<f64>, n_bins: usize) -> Self {
        let cuts = x
            .columns()
            .into_iter()
            .map(|col| {
                let mut vals = col.to_vec();
                vals.sort_unstable_by(f64::total_cmp);
                feature_cuts(&vals, n_bins)
            })
            .collect();
        BinMapper { cuts }
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, v: f64) -> u8 {
        self.cuts[feature].partition_point(|&c| c < v) as u8
    }

    /// Column-major bin codes.
    pub fn transform(&self, x: ArrayView2<f64>) -> Vec<Vec<u8>> {
        columns_of(x)
            .into_iter()
            .enumerate()
            .map(|(f, col)| col.into_iter().map(|v| self.bin(f, v)).collect())
            .collect()
    }
}

fn feature_cuts(sorted: &[f64], n_bins: usize) -> Vec<f64> {
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in sorted {
        match distinct.last_mut() {
            Some((d, c)) if *d == v => *c += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= n_bins {
        return distinct.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
    }
    let n = sorted.len() as f64;
    let mut cuts = Vec::with_capacity(n_bins - 1);
    let mut cum = 0usize;
    let mut q = 1usize;
    for j in 0..distinct.len() - 1 {
        cum += distinct[j].1;
        let target = q as f64 * n / n_bins as f64;
        if cum as f64 >= target {
            cuts.push(midpoint(distinct[j].0, distinct[j + 1].0));
            while q < n_bins && cum as f64 >= q as f64 * n / n_bins as f64 {
                q += 1;
            }
            if cuts.len() == n_bins - 1 {
                break;
            }
        }
    }
    cuts
}

/// Rows retained by one GOSS draw and their gradient multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct GossSample {
    pub rows: Vec<usize>,
    pub weights: Vec<f64>,
    pub n_top: usize,
    pub n_sampled: usize,
    pub amplification: f64,
}

/// Keeps the `round(a*n)` rows with the largest gradient magnitude, draws
/// `round(b*n)` of the remaining rows uniformly, and weights the drawn rows by
/// `(1 - a) / b`. Ties in magnitude are broken by row index.
pub fn goss_sample(abs_grad: &[f64], a: f64, b: f64, rng: &mut ChaCha8Rng) -> GossSample {
    let n = abs_grad.len();
    let n_top = ((a * n as f64).round() as usize).min(n);
    let n_sampled = ((b * n as f64).round() as usize).min(n - n_top);
    let amplification = (1.0 - a) / b;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| abs_grad[j].total_cmp(&abs_grad[i]).then(i.cmp(&j)));
    let rest = &order[n_top..];
    let mut rows: Vec<usize> = order[..n_top].to_vec();
    let mut weights = vec![1.0; n_top];
    for i in sample(rng, rest.len(), n_sampled).into_iter() {
        rows.push(rest[i]);
        weights.push(amplification);
    }
    GossSample {
        rows,
        weights,
        n_top,
        n_sampled,
        amplification,
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Bin {
    g: f64,
    h: f64,
    n: u32,
}

type Hist = Vec<Vec<Bin>>;

#[derive(Debug, Clone, Copy)]
struct Totals {
    g: f64,
    h: f64,
    n: usize,
}

#[derive(Debug, Clone, Copy)]
struct BoostSplit {
    feature: usize,
    bin: u8,
    gain: f64,
}

struct Pending {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
    hist: Hist,
    totals: Totals,
    split: Option<BoostSplit>,
}

/// Gradient statistics and bins for one tree.
struct TreeBuilder<'a> {
    bins: &'a [Vec<u8>],
    mapper: &'a BinMapper,
    grad: &'a [f64],
    hess: &'a [f64],
    features: &'a [usize],
    cfg: &'a GbdtConfig,
}

impl TreeBuilder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.l2_regularization)
    }

    fn leaf_weight(&self, t: Totals) -> f64 {
        -t.g / (t.h + self.cfg.l2_regularization)
    }

    fn totals(&self, rows: &[usize]) -> Totals {
        let mut t = Totals { g: 0.0, h: 0.0, n: rows.len() };
        for &r in rows {
            t.g += self.grad[r];
            t.h += self.hess[r];
        }
        t
    }

    fn build_hist(&self, rows: &[usize]) -> Hist {
        let one = |&f: &usize| {
            let mut h = vec![Bin::default(); self.mapper.n_bins(f)];
            let col = &self.bins[f];
            for &r in rows {
                let b = &mut h[col[r] as usize];
                b.g += self.grad[r];
                b.h += self.hess[r];
                b.n += 1;
            }
            h
        };
        if rows.len() * self.features.len() > 50_000 {
            self.features.par_iter().map(one).collect()
        } else {
            self.features.iter().map(one).collect()
        }
    }

    fn subtract(parent: &Hist, child: &Hist) -> Hist {
        parent
            .iter()
            .zip(child)
            .map(|(p, c)| {
                p.iter()
                    .zip(c)
                    .map(|(a, b)| Bin {
                        g: a.g - b.g,
                        h: a.h - b.h,
                        n: a.n - b.n,
                    })
                    .collect()
            })
            .collect()
    }

    fn best_split(&self, hist: &Hist, t: Totals) -> Option<BoostSplit> {
        let parent = self.score(t.g, t.h);
        let min_leaf = self.cfg.min_samples_leaf;
        let mut best: Option<BoostSplit> = None;
        for (slot, fh) in hist.iter().enumerate() {
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
            for (b, bin) in fh.iter().enumerate().take(fh.len().saturating_sub(1)) {
                gl += bin.g;
                hl += bin.h;
                nl += bin.n as usize;
                let nr = t.n - nl;
                if nl == 0 || nr == 0 || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let (gr, hr) = (t.g - gl, t.h - hl);
                if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(gr, hr) - parent;
                if gain >= self.cfg.min_loss_reduction
                    && gain > 0.0
                    && best.map_or(true, |s| gain > s.gain)
                {
                    best = Some(BoostSplit {
                        feature: self.features[slot],
                        bin: b as u8,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn can_split(&self, p: &Pending) -> bool {
        !self.cfg.max_depth.is_some_and(|d| p.depth >= d) && p.split.is_some()
    }

    /// Grows one tree over `rows`. Without a leaf limit nodes are expanded
    /// depth-first (memory bounded by depth); with one, the pending leaf
    /// with the largest gain is expanded first.
    fn grow(&self, mut rows: Vec<usize>) -> Tree {
        let root_totals = self.totals(&rows);
        let hist = self.build_hist(&rows);
        let split = self.best_split(&hist, root_totals);
        let mut nodes = vec![Node::Leaf {
            value: vec![self.leaf_weight(root_totals)],
            cover: rows.len() as f64,
        }];
        let mut pending = vec![Pending {
            node: 0,
            start: 0,
            end: rows.len(),
            depth: 0,
            hist,
            totals: root_totals,
            split,
        }];
        let mut n_leaves = 1usize;
        let best_first = self.cfg.max_leaves.is_some();

        loop {
            if self.cfg.max_leaves.is_some_and(|l| n_leaves >= l) {
                break;
            }
            let pick = if best_first {
                pending
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| self.can_split(p))
                    .max_by(|(i, a), (j, b)| {
                        let (ga, gb) = (a.split.unwrap().gain, b.split.unwrap().gain);
                        ga.partial_cmp(&gb).unwrap_or(Ordering::Equal).then(j.cmp(i))
                    })
                    .map(|(i, _)| i)
            } else {
                loop {
                    match pending.last() {
                        None => break None,
                        Some(p) if self.can_split(p) => break Some(pending.len() - 1),
                        Some(_) => {
                            pending.pop();
                        }
                    }
                }
            };
            let Some(idx) = pick else { break };
            let p = pending.swap_remove(idx);
            let split = p.split.expect("can_split checked");

            let col = &self.bins[split.feature];
            let slice = &mut rows[p.start..p.end];
            let mut mid = 0;
            for i in 0..slice.len() {
                if col[slice[i]] <= split.bin {
                    slice.swap(i, mid);
                    mid += 1;
                }
            }
            let (left_rows, right_rows) = slice.split_at(mid);
            let (lt, rt) = (self.totals(left_rows), self.totals(right_rows));
            let (lh, rh) = if left_rows.len() <= right_rows.len() {
                let l = self.build_hist(left_rows);
                let r = Self::subtract(&p.hist, &l);
                (l, r)
            } else {
                let r = self.build_hist(right_rows);
                let l = Self::subtract(&p.hist, &r);
                (l, r)
            };
            drop(p.hist);

            let left_id = nodes.len();
            nodes.push(Node::Leaf {
                value: vec![self.leaf_weight(lt)],
                cover: lt.n as f64,
            });
            nodes.push(Node::Leaf {
                value: vec![self.leaf_weight(rt)],
                cover: rt.n as f64,
            });
            nodes[p.node] = Node::Split {
                feature: split.feature,
                threshold: self.mapper.cuts[split.feature][split.bin as usize],
                left: left_id,
                right: left_id + 1,
                cover: p.totals.n as f64,
                gain: split.gain,
            };
            n_leaves += 1;

            let mid_abs = p.start + mid;
            let right = Pending {
                node: left_id + 1,
                start: mid_abs,
                end: p.end,
                depth: p.depth + 1,
                split: self.best_split(&rh, rt),
                hist: rh,
                totals: rt,
            };
            let left = Pending {
                node: left_id,
                start: p.start,
                end: mid_abs,
                depth: p.depth + 1,
                split: self.best_split(&lh, lt),
                hist: lh,
                totals: lt,
            };
            pending.push(right);
            pending.push(left);
        }
        Tree { nodes }
    }
}

/// Fits a single tree to externally supplied gradients and hessians, using
/// every feature.
pub fn fit_tree_on_gradients(
    x: ArrayView2<f64>,
    grad: &[f64],
    hess: &[f64],
    config: &GbdtConfig,
) -> Result<Tree> {
    config.validate()?;
    if grad.len() != x.nrows() || hess.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: grad.len().min(hess.len()),
        });
    }
    let mapper = BinMapper::fit(x, config.n_histogram_bins);
    let bins = mapper.transform(x);
    let features: Vec<usize> = (0..x.ncols()).collect();
    let builder = TreeBuilder {
        bins: &bins,
        mapper: &mapper,
        grad,
        hess,
        features: &features,
        cfg: config,
    };
    Ok(builder.grow((0..x.nrows()).collect()))
}

fn log_loss(margins: &Array2<f64>, y: &[usize]) -> f64 {
    let n = y.len() as f64;
    let k = margins.ncols();
    let mut total = 0.0;
    for (r, &c) in y.iter().enumerate() {
        if k == 1 {
            let m = margins[[r, 0]];
            // softplus(m) - y*m
            let sp = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            total += sp - if c == 1 { m } else { 0.0 };
        } else {
            let row = margins.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[c];
        }
    }
    total / n
}

fn gradients(margins: &Array2<f64>, y: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = margins.ncols();
    let n = y.len();
    let mut g = vec![vec![0.0; n]; k];
    let mut h = vec![vec![0.0; n]; k];
    let mut z = vec![0.0; k];
    for r in 0..n {
        if k == 1 {
            let p = sigmoid(margins[[r, 0]]);
            g[0][r] = p - if y[r] == 1 { 1.0 } else { 0.0 };
            h[0][r] = (p * (1.0 - p)).max(1e-16);
        } else {
            z.iter_mut().zip(margins.row(r)).for_each(|(a, b)| *a = *b);
            softmax_in_place(&mut z);
            for c in 0..k {
                g[c][r] = z[c] - if y[r] == c { 1.0 } else { 0.0 };
                h[c][r] = (z[c] * (1.0 - z[c])).max(1e-16);
            }
        }
    }
    (g, h)
}

pub fn fit_gbdt(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    feature_names: &[String],
    config: &GbdtConfig,
) -> Result<TreeEnsembleModel> {
    config.validate()?;
    check_training_input(x, y, n_classes, feature_names)?;
    let n = x.nrows();
    let d = x.ncols();
    let n_outputs = if n_classes == 2 { 1 } else { n_classes };

    let mut counts = vec![0usize; n_classes];
    y.iter().for_each(|&c| counts[c] += 1);
    let prior = |c: usize| (counts[c] as f64 / n as f64).clamp(1e-15, 1.0 - 1e-15);
    let base_score: Vec<f64> = if n_outputs == 1 {
        let p = prior(1);
        vec![(p / (1.0 - p)).ln()]
    } else {
        (0..n_classes).map(|c| prior(c).ln()).collect()
    };

    let mapper = BinMapper::fit(x, config.n_histogram_bins);
    let bins = mapper.transform(x);
    let n_sub = ((config.feature_subsample * d as f64).round() as usize).clamp(1, d);

    let mut margins = Array2::from_shape_fn((n, n_outputs), |(_, k)| base_score[k]);
    let mut train_loss = vec![log_loss(&margins, y)];
    let mut trees = Vec::with_capacity(config.n_estimators * n_outputs);
    let mut tree_output = Vec::with_capacity(config.n_estimators * n_outputs);
    let xs = x.as_standard_layout();

    for round in 0..config.n_estimators {
        let (g, h) = gradients(&margins, y);
        let (rows, weights) = match config.mode {
            BoostMode::Histogram => ((0..n).collect::<Vec<_>>(), None),
            BoostMode::Goss => {
                let abs: Vec<f64> = (0..n).map(|r| g.iter().map(|gk| gk[r].abs()).sum()).collect();
                let mut rng = stream_rng(config.seed, u64::MAX - round as u64);
                let s = goss_sample(&abs, config.goss_a, config.goss_b, &mut rng);
                let mut w = vec![0.0; n];
                for (&r, &wt) in s.rows.iter().zip(&s.weights) {
                    w[r] = wt;
                }
                let mut rows = s.rows;
                rows.sort_unstable();
                (rows, Some(w))
            }
        };

        let round_trees: Vec<Tree> = (0..n_outputs)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(config.seed, (round * n_outputs + k) as u64);
                let mut features: Vec<usize> = sample(&mut rng, d, n_sub).into_vec();
                features.sort_unstable();
                let (gk, hk) = match &weights {
                    None => (g[k].clone(), h[k].clone()),
                    Some(w) => (
                        g[k].iter().zip(w).map(|(a, b)| a * b).collect(),
                        h[k].iter().zip(w).map(|(a, b)| a * b).collect(),
                    ),
                };
                TreeBuilder {
                    bins: &bins,
                    mapper: &mapper,
                    grad: &gk,
                    hess: &hk,
                    features: &features,
                    cfg: config,
                }
                .grow(rows.clone())
            })
            .collect();

        for (k, tree) in round_trees.into_iter().enumerate() {
            for (r, row) in xs.rows().into_iter().enumerate() {
                let row = row.as_slice().expect("standard layout");
                margins[[r, k]] += config.learning_rate * tree.predict(row)[0];
            }
            trees.push(tree);
            tree_output.push(k);
        }
        train_loss.push(log_loss(&margins, y));
    }

    Ok(TreeEnsembleModel {
        kind: EnsembleKind::Gbdt,
        n_classes,
        feature_names: feature_names.to_vec(),
        trees,
        tree_output,
        base_score,
        learning_rate: config.learning_rate,
        config: ModelConfig::Gbdt(config.clone()),
        train_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn blobs(n: usize, d: usize, k: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<usize> = (0..n).map(|i| i % k).collect();
        let x = Array2::from_shape_fn((n, d), |(r, c)| {
            let shift = if c < 2 { y[r] as f64 * 1.5 } else { 0.0 };
            shift + rng.gen_range(-1.0..1.0)
        });
        (x, y)
    }

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn cuts_cover_distinct_values_when_few() {
        let m = BinMapper::fit(ndarray::array![[1.0], [3.0], [3.0], [7.0]].view(), 256);
        assert_eq!(m.cuts[0], vec![2.0, 5.0]);
        assert_eq!(m.bin(0, 1.0), 0);
        assert_eq!(m.bin(0, 2.0), 0);
        assert_eq!(m.bin(0, 3.0), 1);
        assert_eq!(m.bin(0, 100.0), 2);
    }

    #[test]
    fn quantile_cuts_are_bounded() {
        let x = Array2::from_shape_fn((5000, 1), |(r, _)| (r as f64).sqrt());
        let m = BinMapper::fit(x.view(), 16);
        assert!(m.n_bins(0) <= 16);
        assert!(m.n_bins(0) >= 15);
        let b = m.transform(x.view());
        let mut counts = vec![0usize; m.n_bins(0)];
        b[0].iter().for_each(|&v| counts[v as usize] += 1);
        assert!(counts.iter().all(|&c| c > 200 && c < 450), "{counts:?}");
    }

    #[test]
    fn goss_amplification() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64).collect();
        let s = goss_sample(&g, 0.2, 0.1, &mut rng);
        assert_eq!(s.n_top, 200);
        assert_eq!(s.n_sampled, 100);
        assert_eq!(s.rows.len(), 300);
        assert!((s.amplification - 8.0).abs() < 1e-12);
        let min_top = s.rows[..200].iter().map(|&r| g[r]).fold(f64::INFINITY, f64::min);
        assert!(s.rows[200..].iter().all(|&r| g[r] <= min_top));
    }

    #[test]
    fn zero_rounds_predict_prior() {
        let (x, y) = blobs(90, 3, 3, 1);
        let cfg = GbdtConfig {
            n_estimators: 0,
            ..GbdtConfig::histogram()
        };
        let m = fit_gbdt(x.view(), &y, 3, &names(3), &cfg).unwrap();
        let p = m.predict_proba(x.view()).unwrap();
        for row in p.rows() {
            for c in 0..3 {
                assert!((row[c] - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        let yb: Vec<usize> = (0..90).map(|i| usize::from(i % 3 == 0)).collect();
        let mb = fit_gbdt(x.view(), &yb, 2, &names(3), &cfg).unwrap();
        let pb = mb.predict_proba(x.view()).unwrap();
        assert!((pb[[0, 1]] - 30.0 / 90.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_mode_respects_depth() {
        let (x, y) = blobs(300, 4, 3, 2);
        let cfg = GbdtConfig {
            n_estimators: 5,
            max_depth: Some(3),
            ..GbdtConfig::histogram()
        };
        let m = fit_gbdt(x.view(), &y, 3, &names(4), &cfg).unwrap();
        assert_eq!(m.trees.len(), 15);
        assert!(m.trees.iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn goss_mode_respects_leaves() {
        let (x, y) = blobs(400, 4, 2, 3);
        let cfg = GbdtConfig {
            n_estimators: 10,
            max_leaves: Some(5),
            min_samples_leaf: 4,
            ..GbdtConfig::goss()
        };
        let m = fit_gbdt(x.view(), &y, 2, &names(4), &cfg).unwrap();
        for t in &m.trees {
            assert!(t.n_leaves() <= 5);
            assert!(t.leaves().all(|(_, c)| c >= 4.0));
        }
        let acc = m
            .predict(x.view())
            .unwrap()
            .iter()
            .zip(&y)
            .filter(|(a, b)| a == b)
            .count() as f64
            / 400.0;
        assert!(acc > 0.8, "{acc}");
    }

    #[test]
    fn config_validation() {
        let mut c = GbdtConfig::goss();
        c.goss_a = 0.95;
        assert!(c.validate().is_err());
        let mut c = GbdtConfig::histogram();
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        c = GbdtConfig::histogram();
        c.n_histogram_bins = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, y) = blobs(200, 5, 3, 4);
        let cfg = GbdtConfig {
            n_estimators: 5,
            seed: 9,
            ..GbdtConfig::goss()
        };
        let a = fit_gbdt(x.view(), &y, 3, &names(5), &cfg).unwrap();
        let b = fit_gbdt(x.view(), &y, 3, &names(5), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
