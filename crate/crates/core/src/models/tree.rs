//! Weighted CART classification trees (gini impurity).

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probs: Vec<f64>,
    },
}

/// Binary split tree; node 0 is the root. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features drawn per split; `None` uses all of them.
    pub max_features: Option<usize>,
}

impl Tree {
    /// A single leaf; handy for hand-built models.
    pub fn leaf(probs: Vec<f64>) -> Self {
        Tree {
            nodes: vec![Node::Leaf { probs }],
        }
    }

    pub fn leaf_probs(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probs } => return probs,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    /// Fits a tree on the rows with positive weight. `rng` is only consulted
    /// when `max_features` restricts the candidate features.
    pub fn fit(
        x: &Matrix<f64>,
        y: &[usize],
        weights: &[f64],
        n_classes: usize,
        params: &TreeParams,
        rng: &mut Rng,
    ) -> Tree {
        let rows: Vec<usize> = (0..x.n_rows()).filter(|&i| weights[i] > 0.0).collect();
        let mut b = Builder {
            x,
            y,
            w: weights,
            k: n_classes,
            params,
            nodes: Vec::new(),
            scratch: Vec::with_capacity(rows.len()),
        };
        b.grow(rows, 0, rng);
        Tree { nodes: b.nodes }
    }
}

struct Builder<'a> {
    x: &'a Matrix<f64>,
    y: &'a [usize],
    w: &'a [f64],
    k: usize,
    params: &'a TreeParams,
    nodes: Vec<Node>,
    scratch: Vec<(f64, usize)>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

impl Builder<'_> {
    fn class_weights(&self, rows: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.k];
        for &i in rows {
            c[self.y[i]] += self.w[i];
        }
        c
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let counts = self.class_weights(&rows);
        let total: f64 = counts.iter().sum();
        let id = self.nodes.len();
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
        let too_small = rows.len() < 2 * self.params.min_samples_leaf.max(1);
        let split = if pure || depth_capped || too_small {
            None
        } else {
            self.best_split(&rows, &counts, total, rng)
        };
        let Some((feature, threshold)) = split else {
            let probs = if total > 0.0 {
                counts.iter().map(|c| c / total).collect()
            } else {
                vec![1.0 / self.k as f64; self.k]
            };
            self.nodes.push(Node::Leaf { probs });
            return id;
        };
        self.nodes.push(Node::Leaf { probs: Vec::new() });
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x.get(i, feature) <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(
        &mut self,
        rows: &[usize],
        counts: &[f64],
        total: f64,
        rng: &mut Rng,
    ) -> Option<(usize, f64)> {
        let d = self.x.n_cols();
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < d => {
                let mut f = sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let min_leaf = self.params.min_samples_leaf.max(1);
        let parent = gini(counts, total);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut left = vec![0.0; self.k];
        for f in features {
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&i| (self.x.get(i, f), i)));
            self.scratch
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            left.iter_mut().for_each(|c| *c = 0.0);
            let mut wl = 0.0;
            let n = self.scratch.len();
            for pos in 0..n - 1 {
                let (v, i) = self.scratch[pos];
                left[self.y[i]] += self.w[i];
                wl += self.w[i];
                let next = self.scratch[pos + 1].0;
                if next <= v || pos + 1 < min_leaf || n - pos - 1 < min_leaf {
                    continue;
                }
                let wr = total - wl;
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                // w * gini = w - sum(c^2) / w on each side
                let (mut sl, mut sr) = (0.0, 0.0);
                for (c, l) in counts.iter().zip(&left) {
                    sl += l * l;
                    sr += (c - l) * (c - l);
                }
                let impurity = (wl - sl / wl + wr - sr / wr) / total;
                let gain = parent - impurity;
                if best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    let mid = v + (next - v) / 2.0;
                    // midpoint can round up to `next` for adjacent floats
                    let thr = if mid < next { mid } else { v };
                    best = Some((gain, f, thr));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Draws `n` row indices with replacement and returns per-row counts.
pub(crate) fn bootstrap_counts(n: usize, rng: &mut Rng) -> Vec<u32> {
    let mut c = vec![0u32; n];
    for _ in 0..n {
        c[rng.random_range(0..n)] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn fit(x: &Matrix<f64>, y: &[usize], depth: Option<usize>) -> Tree {
        let w = vec![1.0; y.len()];
        let p = TreeParams {
            max_depth: depth,
            min_samples_leaf: 1,
            max_features: None,
        };
        Tree::fit(x, y, &w, 2, &p, &mut rng_from_seed(0))
    }

    fn argmax(p: &[f64]) -> usize {
        let mut b = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[b] {
                b = i;
            }
        }
        b
    }

    #[test]
    fn xor_depth_two_is_perfect() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let y = [0, 0, 1, 1];
        let t = fit(&x, &y, Some(2));
        assert!(t.depth() <= 2);
        for i in 0..4 {
            assert_eq!(argmax(t.leaf_probs(x.row(i))), y[i]);
        }
        // a single axis split cannot do better than 3/4 on XOR
        let stump = fit(&x, &y, Some(1));
        let hits = (0..4).filter(|&i| argmax(stump.leaf_probs(x.row(i))) == y[i]).count();
        assert!(hits <= 3);
    }

    #[test]
    fn hand_built_tree_returns_leaf_vector() {
        let t = Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    probs: vec![0.9, 0.1],
                },
                Node::Leaf {
                    probs: vec![0.2, 0.8],
                },
            ],
        };
        assert_eq!(t.leaf_probs(&[0.5]), &[0.9, 0.1]);
        assert_eq!(t.leaf_probs(&[0.6]), &[0.2, 0.8]);
    }

    #[test]
    fn leaves_are_distributions() {
        let rows: Vec<[f64; 2]> = (0..60)
            .map(|i| [(i as f64 * 0.7).sin(), (i as f64 * 1.9).cos()])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] + r[1] > 0.2)).collect();
        let t = fit(&x, &y, None);
        for n in &t.nodes {
            if let Node::Leaf { probs } = n {
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        for i in 0..60 {
            assert_eq!(argmax(t.leaf_probs(x.row(i))), y[i]);
        }
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let y = [0, 1, 1];
        let p = TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        };
        let t = Tree::fit(&x, &y, &[0.0, 1.0, 1.0], 2, &p, &mut rng_from_seed(0));
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.leaf_probs(&[0.0]), &[0.0, 1.0]);
    }
}
