//! Small dense linear algebra on row-major square matrices.
//!
//! Decompositions go through nalgebra in f64; dimensions are feature counts,
//! so the round trip costs nothing that matters.

use nalgebra::DMatrix;

use crate::scalar::Real;

#[inline]
pub fn identity<T: Real>(d: usize) -> Vec<T> {
    let mut m = vec![T::zero(); d * d];
    for i in 0..d {
        m[i * d + i] = T::one();
    }
    m
}

/// `v^T A v` for a row-major `d x d` matrix.
#[inline]
pub fn quad_form<T: Real>(a: &[T], v: &[T]) -> T {
    let d = v.len();
    let mut acc = T::zero();
    for i in 0..d {
        let row = &a[i * d..(i + 1) * d];
        let mut r = T::zero();
        for j in 0..d {
            r = r + row[j] * v[j];
        }
        acc = acc + v[i] * r;
    }
    acc
}

pub fn trace<T: Real>(a: &[T], d: usize) -> T {
    (0..d).map(|i| a[i * d + i]).sum()
}

/// Replaces `a` with `(a + a^T) / 2`.
pub fn symmetrize<T: Real>(a: &mut [T], d: usize) {
    let half = T::lit(0.5);
    for i in 0..d {
        for j in (i + 1)..d {
            let m = (a[i * d + j] + a[j * d + i]) * half;
            a[i * d + j] = m;
            a[j * d + i] = m;
        }
    }
}

/// Largest absolute asymmetry `max |a_ij - a_ji|`.
pub fn asymmetry<T: Real>(a: &[T], d: usize) -> T {
    let mut worst = T::zero();
    for i in 0..d {
        for j in (i + 1)..d {
            worst = worst.max((a[i * d + j] - a[j * d + i]).abs());
        }
    }
    worst
}

fn to_na<T: Real>(a: &[T], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_iterator(d, d, a.iter().map(|x| x.to_f64_lossy()))
}

fn from_na<T: Real>(m: &DMatrix<f64>) -> Vec<T> {
    // nalgebra is column-major; transpose walks rows
    m.transpose().iter().map(|&x| T::lit(x)).collect()
}

/// Matrix inverse, `None` when singular.
pub fn invert<T: Real>(a: &[T], d: usize) -> Option<Vec<T>> {
    let m = to_na(a, d);
    let sv = m.singular_values();
    if sv.min() <= sv.max() * f64::EPSILON * d as f64 {
        return None;
    }
    m.try_inverse().map(|inv| from_na(&inv))
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &[T], d: usize) -> Option<Vec<T>> {
    to_na(a, d).cholesky().map(|c| from_na(&c.l()))
}

/// Eigen-decomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` where eigenvector `k` is column `k`
/// of the row-major matrix.
pub fn symmetric_eigen<T: Real>(a: &[T], d: usize) -> (Vec<T>, Vec<T>) {
    let e = to_na(a, d).symmetric_eigen();
    (
        e.eigenvalues.iter().map(|&x| T::lit(x)).collect(),
        from_na(&e.eigenvectors),
    )
}

/// Projects a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues at zero.
pub fn clip_to_psd<T: Real>(a: &mut [T], d: usize) {
    let (vals, vecs) = symmetric_eigen(a, d);
    if vals.iter().all(|&x| x >= T::zero()) {
        return;
    }
    for i in 0..d {
        for j in 0..d {
            let mut acc = T::zero();
            for k in 0..d {
                let lam = vals[k].max(T::zero());
                acc = acc + vecs[i * d + k] * lam * vecs[j * d + k];
            }
            a[i * d + j] = acc;
        }
    }
    symmetrize(a, d);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
        let mut c = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] = (0..d).map(|k| a[i * d + k] * b[k * d + j]).sum();
            }
        }
        c
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let inv = invert(&a, 3).unwrap();
        let p = matmul(&a, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(p[i * 3 + j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
        assert!(invert(&[0.0f64; 4], 2).is_none());
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = [2.0, -1.0, 0.3, -1.0, 1.0, 0.0, 0.3, 0.0, -0.5];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| vecs[i * 3 + k] * vals[k] * vecs[j * 3 + k]).sum();
                assert_abs_diff_eq!(r, a[i * 3 + j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn psd_clip_removes_negative_eigenvalues() {
        let mut a = [1.0, 2.0, 2.0, 1.0];
        clip_to_psd(&mut a, 2);
        let (vals, _) = symmetric_eigen(&a, 2);
        assert!(vals.iter().all(|&v| v > -1e-12));
        // eigenvalues 3 and -1 with vectors (1,1)/√2 and (1,-1)/√2
        assert_abs_diff_eq!(a[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_factor() {
        let a = [0.3, 0.2, 0.2, 0.3];
        let l = cholesky(&a, 2).unwrap();
        assert_abs_diff_eq!(l[0] * l[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(l[2] * l[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(l[2] * l[2] + l[3] * l[3], 0.3, epsilon = 1e-15);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn quad_form_matches_hand_value() {
        assert_eq!(quad_form(&[2.0, 0.0, 0.0, 1.0], &[1.0, 1.0]), 3.0);
        assert_eq!(quad_form(&identity::<f32>(2), &[3.0, 4.0]), 25.0);
    }
}
