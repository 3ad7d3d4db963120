//! Kolmogorov-Smirnov tests with asymptotic p-values, and qq pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rmt::mp::MpParams;
use crate::scalar::Real;

/// Outcome of a KS test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KsResult<T = f64> {
    /// Supremum distance between the distribution functions.
    pub statistic: T,
    pub p_value: T,
    /// `n` for one sample, `n m / (n + m)` for two.
    pub n_effective: T,
}

impl<T: Real> KsResult<T> {
    pub fn rejects_at(&self, level: T) -> bool {
        self.p_value < level
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_survival<T: Real>(x: T) -> T {
    if !(x > T::zero()) {
        return T::one();
    }
    let x = x.as_f64();
    let p = if x < 1.18 {
        // P(K <= x) = √(2π)/x Σ exp(-(2k-1)² π² / (8x²))
        let pi = std::f64::consts::PI;
        let y = -pi * pi / (8.0 * x * x);
        let s: f64 = (1..=8).map(|k| ((2 * k - 1) as f64).powi(2) * y).map(f64::exp).sum();
        1.0 - (2.0 * pi).sqrt() / x * s
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * x * x).exp()
            })
            .sum();
        2.0 * s
    };
    T::lit(p.clamp(0.0, 1.0))
}

fn sorted<T: Real>(sample: &[T]) -> Result<Vec<T>> {
    if sample.is_empty() {
        return Err(Error::Domain("KS test needs a non-empty sample".into()));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    Ok(s)
}

/// One-sample test of `sample` against an arbitrary continuous cdf.
pub fn ks_one_sample_with<T: Real>(sample: &[T], cdf: impl Fn(T) -> T) -> Result<KsResult<T>> {
    let s = sorted(sample)?;
    let n = T::count(s.len());
    let mut d = T::zero();
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        let above = T::count(i + 1) / n - f;
        let below = f - T::count(i) / n;
        d = d.max(above).max(below);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(n.sqrt() * d),
        n_effective: n,
    })
}

/// One-sample test of `sample` against the Marčenko-Pastur law.
pub fn ks_one_sample<T: Real>(sample: &[T], params: &MpParams<T>) -> Result<KsResult<T>> {
    ks_one_sample_with(sample, |x| params.cdf(x))
}

/// Two-sample test.
pub fn ks_two_sample<T: Real>(a: &[T], b: &[T]) -> Result<KsResult<T>> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (n, m) = (a.len(), b.len());
    let (nf, mf) = (T::count(n), T::count(m));
    let (mut i, mut j) = (0, 0);
    let mut d = T::zero();
    while i < n && j < m {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((T::count(i) / nf - T::count(j) / mf).abs());
    }
    let n_eff = nf * mf / (nf + mf);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(n_eff.sqrt() * d),
        n_effective: n_eff,
    })
}

/// Quantile-quantile pairs: point `i` (1-based) couples the Marčenko-Pastur
/// quantile at `(i - 0.5) / n` with the `i`-th order statistic of `sample`.
pub fn qq_points<T: Real>(sample: &[T], params: &MpParams<T>) -> Result<Vec<(T, T)>> {
    let s = sorted(sample)?;
    let n = T::count(s.len());
    let levels: Vec<T> = (0..s.len())
        .map(|i| (T::count(i) + T::lit(0.5)) / n)
        .collect();
    let reference = params.quantiles(&levels)?;
    Ok(reference.into_iter().zip(s).collect())
}
