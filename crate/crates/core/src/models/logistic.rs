//! Multinomial logistic regression trained by full-batch gradient descent on
//! the weighted softmax cross-entropy.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    /// `n_classes x n_features`, row-major.
    pub weights: Matrix<f64>,
    pub bias: Vec<f64>,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once the loss changes by less than this between iterations.
    pub tolerance: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

impl LinearClassifier {
    pub fn zeros(n_classes: usize, feature_names: Vec<String>) -> Self {
        let d = feature_names.len();
        Self {
            weights: Matrix::filled(n_classes, d, 0.0),
            bias: vec![0.0; n_classes],
            feature_names,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn predict_row(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let w = self.weights.row(c);
            *o = self.bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        softmax_in_place(out);
    }

    /// Weighted mean cross-entropy plus `l2/2 * |W|^2`, and its gradient with
    /// respect to `(weights, bias)`.
    pub fn loss_and_gradient(
        &self,
        x: &Matrix<f64>,
        y: &[usize],
        sample_weights: &[f64],
        l2: f64,
    ) -> (f64, Matrix<f64>, Vec<f64>) {
        let k = self.n_classes();
        let d = x.n_cols();
        let mut gw = Matrix::filled(k, d, 0.0);
        let mut gb = vec![0.0; k];
        let mut p = vec![0.0; k];
        let wsum: f64 = sample_weights.iter().sum();
        let mut loss = 0.0;
        for i in 0..x.n_rows() {
            let xi = x.row(i);
            self.predict_row(xi, &mut p);
            let w = sample_weights[i] / wsum;
            loss -= w * p[y[i]].max(f64::MIN_POSITIVE).ln();
            for c in 0..k {
                let r = w * (p[c] - if c == y[i] { 1.0 } else { 0.0 });
                gb[c] += r;
                for (g, &xv) in gw.row_mut(c).iter_mut().zip(xi) {
                    *g += r * xv;
                }
            }
        }
        if l2 > 0.0 {
            for c in 0..k {
                let wr = self.weights.row(c).to_vec();
                for (g, w) in gw.row_mut(c).iter_mut().zip(&wr) {
                    *g += l2 * w;
                    loss += 0.5 * l2 * w * w;
                }
            }
        }
        (loss, gw, gb)
    }

    /// Gradient descent from zero weights. A step that would raise the loss
    /// is retried at half the rate, so the recorded losses never increase.
    pub fn fit(
        x: &Matrix<f64>,
        y: &[usize],
        sample_weights: &[f64],
        n_classes: usize,
        feature_names: Vec<String>,
        params: &LogisticParams,
    ) -> (Self, FitTrace) {
        let mut model = Self::zeros(n_classes, feature_names);
        let mut lr = params.learning_rate;
        let (mut loss, mut gw, mut gb) = model.loss_and_gradient(x, y, sample_weights, params.l2);
        let mut losses = vec![loss];
        let mut converged = false;
        let mut it = 0;
        while it < params.max_iterations {
            it += 1;
            let mut trial = model.clone();
            for (w, g) in trial.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                *w -= lr * g;
            }
            for (b, g) in trial.bias.iter_mut().zip(&gb) {
                *b -= lr * g;
            }
            let (tl, tgw, tgb) = trial.loss_and_gradient(x, y, sample_weights, params.l2);
            if !(tl <= loss) {
                lr *= 0.5;
                if lr < params.learning_rate * 1e-12 {
                    converged = true;
                    break;
                }
                continue;
            }
            let change = loss - tl;
            model = trial;
            loss = tl;
            gw = tgw;
            gb = tgb;
            losses.push(loss);
            if change < params.tolerance {
                converged = true;
                break;
            }
        }
        (
            model,
            FitTrace {
                losses,
                iterations: it,
                converged,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("x{j}")).collect()
    }

    fn params() -> LogisticParams {
        LogisticParams {
            learning_rate: 0.5,
            max_iterations: 2000,
            tolerance: 1e-10,
            l2: 0.0,
        }
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let m = LinearClassifier::zeros(3, names(2));
        let mut p = [0.0; 3];
        m.predict_row(&[4.0, -1.0], &mut p);
        for v in p {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn separates_two_points() {
        let x = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let y = [0, 1];
        let (m, trace) = LinearClassifier::fit(&x, &y, &[1.0, 1.0], 2, names(1), &params());
        let mut p = [0.0; 2];
        m.predict_row(&[-1.0], &mut p);
        assert!(p[0] > 0.5);
        m.predict_row(&[1.0], &mut p);
        assert!(p[1] > 0.5);
        assert!(trace.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x = Matrix::from_rows(&[
            [0.3, -1.2],
            [1.1, 0.4],
            [-0.7, 0.9],
            [0.2, 0.2],
            [-1.5, -0.3],
        ])
        .unwrap();
        let y = [0, 1, 2, 1, 0];
        let sw = [1.0, 2.0, 0.5, 1.0, 1.5];
        let mut m = LinearClassifier::zeros(3, names(2));
        let init = [0.2, -0.4, 0.1, 0.3, -0.2, 0.5];
        m.weights = Matrix::new(3, 2, init.to_vec()).unwrap();
        m.bias = vec![0.05, -0.1, 0.2];
        let l2 = 0.1;
        let (_, gw, gb) = m.loss_and_gradient(&x, &y, &sw, l2);
        let h = 1e-6;
        for idx in 0..6 {
            let (c, j) = (idx / 2, idx % 2);
            let mut up = m.clone();
            up.weights.set(c, j, up.weights.get(c, j) + h);
            let mut dn = m.clone();
            dn.weights.set(c, j, dn.weights.get(c, j) - h);
            let fd = (up.loss_and_gradient(&x, &y, &sw, l2).0 - dn.loss_and_gradient(&x, &y, &sw, l2).0)
                / (2.0 * h);
            assert_relative_eq!(fd, gw.get(c, j), max_relative = 1e-4);
        }
        for c in 0..3 {
            let mut up = m.clone();
            up.bias[c] += h;
            let mut dn = m.clone();
            dn.bias[c] -= h;
            let fd = (up.loss_and_gradient(&x, &y, &sw, l2).0 - dn.loss_and_gradient(&x, &y, &sw, l2).0)
                / (2.0 * h);
            assert_relative_eq!(fd, gb[c], max_relative = 1e-4);
        }
    }
}
