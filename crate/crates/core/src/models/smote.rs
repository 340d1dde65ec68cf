//! SMOTE: synthetic minority oversampling by interpolation toward one of the
//! k nearest same-class neighbours.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Oversamples every class present in `y` up to the majority count. The
/// original rows come first, unchanged and in order; synthetics follow, grouped
/// by class.
pub fn smote_oversample(
    x: &Matrix<f64>,
    y: &[usize],
    k_neighbors: usize,
    seed: u64,
) -> Result<(Matrix<f64>, Vec<usize>)> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    if k_neighbors == 0 {
        return Err(Error::Config("SMOTE needs k_neighbors >= 1".into()));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        members[c].push(i);
    }
    let majority = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut out_x = x.clone();
    let mut out_y = y.to_vec();
    for (c, rows) in members.iter().enumerate() {
        if rows.is_empty() || rows.len() == majority {
            continue;
        }
        if rows.len() < k_neighbors + 1 {
            return Err(Error::Data(format!(
                "class {c} has {} rows; SMOTE with k = {k_neighbors} needs at least {}",
                rows.len(),
                k_neighbors + 1
            )));
        }
        // k nearest same-class neighbours, ties by row order
        let neighbours: Vec<Vec<usize>> = rows
            .iter()
            .map(|&i| {
                let mut d: Vec<(f64, usize)> = rows
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (sq_dist(x.row(i), x.row(j)), j))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d.into_iter().take(k_neighbors).map(|(_, j)| j).collect()
            })
            .collect();
        let mut rng = stream_rng(seed, "smote/class", c as u64);
        let mut buf = vec![0.0; x.n_cols()];
        for _ in 0..majority - rows.len() {
            let a = rng.random_range(0..rows.len());
            let b = neighbours[a][rng.random_range(0..k_neighbors)];
            let u: f64 = rng.random();
            let (xa, xb) = (x.row(rows[a]), x.row(b));
            for ((o, p), q) in buf.iter_mut().zip(xa).zip(xb) {
                *o = p + u * (q - p);
            }
            out_x.push_row(&buf)?;
            out_y.push(c);
        }
    }
    Ok((out_x, out_y))
}
