//! Bagged random forests and SAMME AdaBoost over [`Tree`]s.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{bootstrap_counts, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::rng::{rng_from_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Forest,
    AdaBoost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub kind: EnsembleKind,
    pub trees: Vec<Tree>,
    /// Per-tree vote weights; all ones for forests.
    pub tree_weights: Vec<f64>,
    pub n_classes: usize,
    pub max_depth: Option<usize>,
    pub n_estimators: usize,
    pub feature_names: Vec<String>,
}

impl TreeEnsemble {
    /// Weighted mean of the trees' leaf distributions.
    pub fn predict_row(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let total: f64 = self.tree_weights.iter().sum();
        for (t, &w) in self.trees.iter().zip(&self.tree_weights) {
            for (o, p) in out.iter_mut().zip(t.leaf_probs(x)) {
                *o += w * p;
            }
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }
}

/// Bootstrap forest. Trees are grown in parallel, each from its own derived
/// seed, and collected in index order, so the result does not depend on
/// scheduling.
pub fn fit_forest(
    x: &Matrix<f64>,
    y: &[usize],
    class_weights: &[f64],
    n_classes: usize,
    n_estimators: usize,
    params: TreeParams,
    seed: u64,
    feature_names: Vec<String>,
) -> TreeEnsemble {
    let n = x.n_rows();
    let trees: Vec<Tree> = (0..n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, "forest/tree", t as u64);
            let counts = bootstrap_counts(n, &mut rng);
            let w: Vec<f64> = counts
                .iter()
                .zip(y)
                .map(|(&c, &label)| f64::from(c) * class_weights[label])
                .collect();
            Tree::fit(x, y, &w, n_classes, &params, &mut rng)
        })
        .collect();
    TreeEnsemble {
        kind: EnsembleKind::Forest,
        tree_weights: vec![1.0; trees.len()],
        trees,
        n_classes,
        max_depth: params.max_depth,
        n_estimators,
        feature_names,
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Multiclass SAMME. Class weights seed the initial sample weights; each round
/// fits a tree on the current weights and gets vote
/// `ln((1 - err) / err) + ln(K - 1)`.
pub fn fit_adaboost(
    x: &Matrix<f64>,
    y: &[usize],
    class_weights: &[f64],
    n_classes: usize,
    n_estimators: usize,
    params: TreeParams,
    seed: u64,
    feature_names: Vec<String>,
) -> TreeEnsemble {
    let n = x.n_rows();
    let mut w: Vec<f64> = y.iter().map(|&c| class_weights[c]).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    let k_term = ((n_classes as f64) - 1.0).max(1.0).ln();
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    for round in 0..n_estimators {
        let mut rng = rng_from_seed(crate::rng::derive_seed(seed, "adaboost/round", round as u64));
        let tree = Tree::fit(x, y, &w, n_classes, &params, &mut rng);
        let wrong: Vec<bool> = (0..n).map(|i| argmax(tree.leaf_probs(x.row(i))) != y[i]).collect();
        let total: f64 = w.iter().sum();
        let err: f64 = w
            .iter()
            .zip(&wrong)
            .filter(|(_, &bad)| bad)
            .map(|(v, _)| v)
            .sum::<f64>()
            / total;
        if err <= 0.0 {
            trees.push(tree);
            alphas.push(1.0);
            break;
        }
        let alpha = ((1.0 - err) / err).ln() + k_term;
        if alpha <= 0.0 {
            // no better than chance; keep the first tree so the model is usable
            if trees.is_empty() {
                trees.push(tree);
                alphas.push(1.0);
            }
            break;
        }
        for (v, &bad) in w.iter_mut().zip(&wrong) {
            if bad {
                *v *= alpha.exp();
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        trees.push(tree);
        alphas.push(alpha);
    }
    TreeEnsemble {
        kind: EnsembleKind::AdaBoost,
        trees,
        tree_weights: alphas,
        n_classes,
        max_depth: params.max_depth,
        n_estimators,
        feature_names,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Matrix<f64>, Vec<usize>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..90 {
            let t = i as f64;
            let c = i % 3;
            rows.push([c as f64 * 2.0 + (t * 0.77).sin() * 0.8, (t * 1.31).cos() * 0.8 - c as f64]);
            y.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn params(depth: Option<usize>, mf: Option<usize>) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_samples_leaf: 1,
            max_features: mf,
        }
    }

    #[test]
    fn forest_is_reproducible_and_normalized() {
        let (x, y) = blobs();
        let cw = [1.0; 3];
        let a = fit_forest(&x, &y, &cw, 3, 25, params(None, Some(1)), 9, vec![]);
        let b = fit_forest(&x, &y, &cw, 3, 25, params(None, Some(1)), 9, vec![]);
        assert_eq!(a, b);
        let mut p = [0.0; 3];
        let mut hits = 0;
        for i in 0..x.n_rows() {
            a.predict_row(x.row(i), &mut p);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            hits += usize::from(argmax(&p) == y[i]);
        }
        assert!(hits >= 85);
    }

    #[test]
    fn identical_leaves_forest() {
        let f = TreeEnsemble {
            kind: EnsembleKind::Forest,
            trees: vec![Tree::leaf(vec![0.3, 0.7]); 4],
            tree_weights: vec![1.0; 4],
            n_classes: 2,
            max_depth: Some(0),
            n_estimators: 4,
            feature_names: vec!["a".into()],
        };
        let mut p = [0.0; 2];
        f.predict_row(&[12.0], &mut p);
        assert!((p[0] - 0.3).abs() < 1e-12 && (p[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn adaboost_weights_nonnegative_and_fit() {
        let (x, y) = blobs();
        let m = fit_adaboost(&x, &y, &[1.0; 3], 3, 40, params(Some(2), None), 1, vec![]);
        assert!(m.tree_weights.iter().all(|&a| a >= 0.0));
        let mut p = [0.0; 3];
        let mut hits = 0;
        for i in 0..x.n_rows() {
            m.predict_row(x.row(i), &mut p);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            hits += usize::from(argmax(&p) == y[i]);
        }
        assert!(hits >= 80, "{hits}");
    }
}
