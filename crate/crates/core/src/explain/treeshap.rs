//! Path-dependent TreeSHAP (Lundberg et al., Algorithm 2).

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::{Attribution, OutputKind, Target};
use crate::error::{Error, Result};
use crate::trees::{EnsembleKind, Node, Tree, TreeEnsembleModel};

const NO_FEATURE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: usize) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let denom = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / denom;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let PathElement { zero, one, .. } = path[index];
    let mut next_one = path[depth].weight;
    let denom = (depth + 1) as f64;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one * denom / ((i + 1) as f64 * one);
            next_one = tmp - path[i].weight * zero * (depth - i) as f64 / denom;
        } else {
            path[i].weight = path[i].weight * denom / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

/// Total weight of `path` with element `index` unwound, without modifying it.
fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElement { zero, one, .. } = path[index];
    let denom = (depth + 1) as f64;
    let mut next_one = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one * denom / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].weight - tmp * zero * (depth - i) as f64 / denom;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / denom);
        }
    }
    total
}

struct Walk<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    output: usize,
    phi: &'a mut [f64],
}

impl Walk<'_> {
    fn recurse(&mut self, node: usize, mut path: Vec<PathElement>, zero: f64, one: f64, feature: usize) {
        extend_path(&mut path, zero, one, feature);
        match &self.tree.nodes[node] {
            Node::Leaf { value, .. } => {
                let v = value[self.output];
                for i in 1..path.len() {
                    let w = unwound_path_sum(&path, i);
                    let el = path[i];
                    self.phi[el.feature] += w * (el.one - el.zero) * v;
                }
            }
            Node::Split {
                feature: split,
                threshold,
                left,
                right,
                cover,
                ..
            } => {
                let (hot, cold) = if self.x[*split] <= *threshold {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                let mut in_zero = 1.0;
                let mut in_one = 1.0;
                if let Some(k) = (1..path.len()).find(|&k| path[k].feature == *split) {
                    in_zero = path[k].zero;
                    in_one = path[k].one;
                    unwind_path(&mut path, k);
                }
                let hot_zero = self.tree.nodes[hot].cover() / cover;
                let cold_zero = self.tree.nodes[cold].cover() / cover;
                self.recurse(hot, path.clone(), hot_zero * in_zero, in_one, *split);
                self.recurse(cold, path, cold_zero * in_zero, 0.0, *split);
            }
        }
    }
}

/// Adds the TreeSHAP values of one tree output for row `x` into `phi`.
pub fn tree_shap_row(tree: &Tree, x: &[f64], output: usize, phi: &mut [f64]) {
    let mut walk = Walk { tree, x, output, phi };
    walk.recurse(0, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, NO_FEATURE);
}

/// Cover-weighted mean leaf value of one tree output.
pub fn expected_value(tree: &Tree, output: usize) -> f64 {
    fn go(t: &Tree, i: usize, output: usize) -> f64 {
        match &t.nodes[i] {
            Node::Leaf { value, .. } => value[output],
            Node::Split { left, right, cover, .. } => {
                (t.nodes[*left].cover() * go(t, *left, output) + t.nodes[*right].cover() * go(t, *right, output))
                    / cover
            }
        }
    }
    go(tree, 0, output)
}

fn check_covers(model: &TreeEnsembleModel) -> Result<()> {
    let ok = model
        .trees
        .iter()
        .flat_map(|t| &t.nodes)
        .all(|n| n.cover() > 0.0 && n.cover().is_finite());
    if ok {
        Ok(())
    } else {
        Err(Error::invalid("tree model lacks positive cover counts"))
    }
}

/// Per-tree contributions to the explained output of class `class`: the
/// tree output slot, a scale and, for boosting, a constant offset.
struct Plan {
    terms: Vec<(usize, usize, f64)>,
    offset: f64,
}

fn plan(model: &TreeEnsembleModel, class: usize) -> Plan {
    match model.kind {
        EnsembleKind::Forest => {
            let s = 1.0 / model.trees.len() as f64;
            Plan {
                terms: (0..model.trees.len()).map(|t| (t, class, s)).collect(),
                offset: 0.0,
            }
        }
        EnsembleKind::Gbdt if model.n_outputs() == 1 => {
            // Binary margin is the log-odds of class 1; class 0 is its negation.
            let sign = if class == 1 { 1.0 } else { -1.0 };
            Plan {
                terms: (0..model.trees.len()).map(|t| (t, 0, sign * model.learning_rate)).collect(),
                offset: sign * model.base_score[0],
            }
        }
        EnsembleKind::Gbdt => Plan {
            terms: (0..model.trees.len())
                .filter(|&t| model.tree_output[t] == class)
                .map(|t| (t, 0, model.learning_rate))
                .collect(),
            offset: model.base_score[class],
        },
    }
}

/// Exact TreeSHAP attributions. Forests explain the class probability;
/// boosted models explain the class margin.
pub fn tree_shap(model: &TreeEnsembleModel, x: ArrayView2<f64>, target: Target) -> Result<Attribution> {
    check_covers(model)?;
    if x.ncols() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: x.ncols(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rows to explain".into()));
    }
    let (kind, outputs) = match model.kind {
        EnsembleKind::Forest => (OutputKind::Probability, model.predict_proba(x)?),
        EnsembleKind::Gbdt => (OutputKind::Margin, model.predict_margin(x)?),
    };
    let targets = target.resolve(x.nrows(), model.n_classes, || model.predict(x))?;
    let plans: Vec<Plan> = (0..model.n_classes).map(|c| plan(model, c)).collect();
    let expected: Vec<f64> = plans
        .iter()
        .map(|p| {
            p.offset
                + p.terms
                    .iter()
                    .map(|&(t, o, s)| s * expected_value(&model.trees[t], o))
                    .sum::<f64>()
        })
        .collect();

    let d = x.ncols();
    let rows: Vec<(Vec<f64>, f64)> = (0..x.nrows())
        .into_par_iter()
        .map(|r| {
            let row = x.row(r).to_vec();
            let plan = &plans[targets[r]];
            let mut phi = vec![0.0; d];
            let mut tmp = vec![0.0; d];
            for &(t, o, s) in &plan.terms {
                tmp.iter_mut().for_each(|v| *v = 0.0);
                tree_shap_row(&model.trees[t], &row, o, &mut tmp);
                phi.iter_mut().zip(&tmp).for_each(|(p, v)| *p += s * v);
            }
            let out = match (model.kind, outputs.ncols()) {
                (EnsembleKind::Gbdt, 1) if targets[r] == 0 => -outputs[[r, 0]],
                (EnsembleKind::Gbdt, 1) => outputs[[r, 0]],
                _ => outputs[[r, targets[r]]],
            };
            (phi, out)
        })
        .collect();

    let mut values = Array2::zeros((x.nrows(), d));
    let mut output = Vec::with_capacity(x.nrows());
    for (r, (phi, out)) in rows.into_iter().enumerate() {
        values.row_mut(r).assign(&ndarray::Array1::from(phi));
        output.push(out);
    }
    Ok(Attribution {
        feature_names: model.feature_names.clone(),
        values,
        base_values: targets.iter().map(|&t| expected[t]).collect(),
        outputs: output,
        targets,
        output_kind: kind,
    })
}
