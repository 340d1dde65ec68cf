//! Statistical primitives: normal and Student-t distribution functions,
//! paired and two-sample t-tests, the shared percentile convention, and the
//! folded-normal law of the absolute difference of two group means.

use serde::{Deserialize, Serialize};

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::scalar::{cmp_total, Real};

/// Standard normal density.
pub fn normal_pdf<T: Real>(x: T) -> T {
    (-(x * x) * T::lit(0.5)).exp() / (T::TAU()).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5 * erfc(-x.to_f64_lossy() / std::f64::consts::SQRT_2))
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    T::lit(statrs::function::gamma::ln_gamma(x.to_f64_lossy()))
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta<T: Real>(a: T, b: T, x: T) -> T {
    let x = x.to_f64_lossy().clamp(0.0, 1.0);
    T::lit(beta_reg(a.to_f64_lossy(), b.to_f64_lossy(), x))
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf<T: Real>(t: T, df: T) -> T {
    if t.is_infinite() {
        return if t > T::zero() { T::one() } else { T::zero() };
    }
    let x = df / (df + t * t);
    let tail = T::lit(0.5) * regularized_incomplete_beta(df * T::lit(0.5), T::lit(0.5), x);
    if t > T::zero() {
        T::one() - tail
    } else {
        tail
    }
}

/// Two-sided p-value `P(|T| >= |t|)`.
pub fn student_t_two_sided_p<T: Real>(t: T, df: T) -> T {
    if t.is_infinite() {
        return T::zero();
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df * T::lit(0.5), T::lit(0.5), x)
        .max(T::zero())
        .min(T::one())
}

pub fn mean<T: Real>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_count(xs.len())
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance<T: Real>(xs: &[T]) -> T {
    let n = xs.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_count(n - 1)
}

/// Percentile by linear interpolation between closest ranks (inclusive):
/// rank `h = (n - 1) q / 100`, value `v[floor h] + frac(h) (v[floor h + 1] - v[floor h])`.
pub fn percentile<T: Real>(values: &[T], q: T) -> Result<T> {
    let mut v = values.to_vec();
    percentile_in_place(&mut v, q)
}

/// Same convention as [`percentile`], reordering `values` instead of copying.
/// Runs in expected linear time.
pub fn percentile_in_place<T: Real>(values: &mut [T], q: T) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Empty("percentile of an empty sequence".into()));
    }
    if !(q >= T::zero() && q <= T::lit(100.0)) {
        return Err(Error::Config(format!("percentile {q} outside [0, 100]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("percentile input contains NaN".into()));
    }
    let n = values.len();
    let h = T::from_count(n - 1) * q / T::lit(100.0);
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let frac = h - T::from_count(lo);
    let (_, lo_val, upper) = values.select_nth_unstable_by(lo, |a, b| cmp_total(*a, *b));
    let lo_val = *lo_val;
    if frac == T::zero() || upper.is_empty() {
        return Ok(lo_val);
    }
    let hi_val = upper
        .iter()
        .copied()
        .fold(T::infinity(), |acc, x| acc.min(x));
    Ok(lo_val + frac * (hi_val - lo_val))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestFlavor {
    Paired,
    Student,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult<T> {
    pub statistic: T,
    pub degrees_of_freedom: T,
    pub p_value: T,
    pub flavor: TTestFlavor,
    /// Zero standard error; `p_value` is 1 when the means agree, 0 otherwise.
    pub degenerate: bool,
}

impl<T: Real> TTestResult<T> {
    fn degenerate(flavor: TTestFlavor, df: T, mean_diff: T) -> Self {
        let (statistic, p_value) = if mean_diff == T::zero() {
            (T::zero(), T::one())
        } else {
            (mean_diff.signum() * T::infinity(), T::zero())
        };
        TTestResult {
            statistic,
            degrees_of_freedom: df,
            p_value,
            flavor,
            degenerate: true,
        }
    }
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_ttest<T: Real>(a: &[T], b: &[T]) -> Result<TTestResult<T>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Empty(format!("paired t-test needs >= 2 pairs, got {n}")));
    }
    let d: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let m = mean(&d);
    let sd = sample_variance(&d).sqrt();
    let df = T::from_count(n - 1);
    if sd == T::zero() {
        return Ok(TTestResult::degenerate(TTestFlavor::Paired, df, m));
    }
    let t = m / (sd / T::from_count(n).sqrt());
    Ok(TTestResult {
        statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_two_sided_p(t, df),
        flavor: TTestFlavor::Paired,
        degenerate: false,
    })
}

/// Two-sided two-sample t-test, pooled variance (`Student`) or
/// Welch-Satterthwaite (`Welch`).
pub fn two_sample_ttest<T: Real>(a: &[T], b: &[T], flavor: TTestFlavor) -> Result<TTestResult<T>> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(Error::Empty(format!(
            "two-sample t-test needs >= 2 observations per sample, got {na} and {nb}"
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let (fa, fb) = (T::from_count(na), T::from_count(nb));
    let (se, df) = match flavor {
        TTestFlavor::Student | TTestFlavor::Paired => {
            let df = fa + fb - T::lit(2.0);
            let pooled = ((fa - T::one()) * va + (fb - T::one()) * vb) / df;
            ((pooled * (T::one() / fa + T::one() / fb)).sqrt(), df)
        }
        TTestFlavor::Welch => {
            let qa = va / fa;
            let qb = vb / fb;
            let se2 = qa + qb;
            let denom = qa * qa / (fa - T::one()) + qb * qb / (fb - T::one());
            let df = if denom > T::zero() {
                se2 * se2 / denom
            } else {
                fa + fb - T::lit(2.0)
            };
            (se2.sqrt(), df)
        }
    };
    let flavor = if flavor == TTestFlavor::Paired {
        TTestFlavor::Student
    } else {
        flavor
    };
    if se == T::zero() {
        return Ok(TTestResult::degenerate(flavor, df, ma - mb));
    }
    let t = (ma - mb) / se;
    Ok(TTestResult {
        statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_two_sided_p(t, df),
        flavor,
        degenerate: false,
    })
}

/// Normal law of `Ȳ0 - Ȳ1`: mean `delta_nu`, standard deviation `sigma1`,
/// with `sigma1^2 = sigma^2 / N0 + sigma^2 / N1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldedNormalParams<T> {
    pub delta_nu: T,
    pub sigma1: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldedNormalStats<T> {
    pub params: FoldedNormalParams<T>,
    pub mean: T,
    pub variance: T,
    /// `dE/dΔν = 1 - 2Φ(-Δν/σ1)`.
    pub mean_derivative: T,
}

impl<T: Real> FoldedNormalParams<T> {
    pub fn new(delta_nu: T, sigma1: T) -> Result<Self> {
        if !(sigma1 > T::zero()) || !sigma1.is_finite() {
            return Err(Error::Config(format!("sigma1 must be positive, got {sigma1}")));
        }
        if !delta_nu.is_finite() {
            return Err(Error::Config("delta_nu must be finite".into()));
        }
        Ok(Self { delta_nu, sigma1 })
    }

    /// `sigma1` from a common outcome standard deviation and the group sizes.
    pub fn from_groups(delta_nu: T, sigma: T, n0: usize, n1: usize) -> Result<Self> {
        if n0 == 0 || n1 == 0 {
            return Err(Error::Empty("group sizes must be positive".into()));
        }
        let var = sigma * sigma * (T::one() / T::from_count(n0) + T::one() / T::from_count(n1));
        Self::new(delta_nu, var.sqrt())
    }

    /// Density of `|Ȳ0 - Ȳ1|` (zero for negative `x`).
    pub fn pdf(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        let s = self.sigma1;
        (normal_pdf((x - self.delta_nu) / s) + normal_pdf((x + self.delta_nu) / s)) / s
    }

    pub fn stats(&self) -> FoldedNormalStats<T> {
        let (dn, s) = (self.delta_nu, self.sigma1);
        let r = dn / s;
        let phi_neg = normal_cdf(-r);
        let mean = (T::lit(2.0) / T::PI()).sqrt() * s * (-(r * r) * T::lit(0.5)).exp()
            + dn * (T::one() - T::lit(2.0) * phi_neg);
        let variance = (dn * dn + s * s - mean * mean).max(T::zero());
        FoldedNormalStats {
            params: *self,
            mean,
            variance,
            mean_derivative: T::one() - T::lit(2.0) * phi_neg,
        }
    }
}

/// Convenience wrapper returning the summary; see [`FoldedNormalParams::pdf`]
/// for the density.
pub fn folded_normal_stats<T: Real>(params: FoldedNormalParams<T>) -> FoldedNormalStats<T> {
    params.stats()
}
