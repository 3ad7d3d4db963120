use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::rmt::CorrelationMatrix;
use crate::scalar::Real;

/// Which correlation estimate a covariance matrix was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorrelationSource {
    pub cleaned: bool,
    pub residual: bool,
}

impl CorrelationSource {
    pub fn label(&self) -> &'static str {
        match (self.cleaned, self.residual) {
            (false, false) => "raw-original",
            (false, true) => "raw-residual",
            (true, false) => "cleaned-original",
            (true, true) => "cleaned-residual",
        }
    }
}

/// Eigenvalues of the correlation factor in `[-PSD_CLAMP, 0)` are clamped
/// to zero; anything more negative is rejected.
pub const PSD_CLAMP: f64 = 1e-8;

/// `Σ = diag(σ) C diag(σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAssembly<T = f64> {
    pub values: Matrix<T>,
    pub source: CorrelationSource,
    pub sigma: Vec<T>,
    pub tickers: Vec<String>,
    /// Smallest eigenvalue of the correlation factor before any repair.
    pub min_eigenvalue: T,
    /// Whether slightly negative eigenvalues were clamped.
    pub repaired: bool,
}

impl<T: Real> CovarianceAssembly<T> {
    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    pub fn with_source(mut self, source: CorrelationSource) -> Self {
        self.source = source;
        self
    }

    /// Same matrix scaled by `c`, used by scale-consistency checks.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            values: self.values.scale(c),
            ..self.clone()
        }
    }

    /// Wraps an explicit covariance matrix (used for hand-built instances).
    pub fn from_matrix(values: Matrix<T>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::Dimension("covariance must be square".into()));
        }
        let n = values.rows();
        let sigma: Vec<T> = values.diagonal().into_iter().map(|v| v.max(T::zero()).sqrt()).collect();
        let min_eigenvalue = *symmetric_eigen(&values)?.values.last().unwrap_or(&T::zero());
        let scale = values.diagonal().into_iter().fold(T::zero(), T::max);
        if min_eigenvalue < -T::tol(PSD_CLAMP, 1e3) * scale.max(T::one()) {
            return Err(Error::NotPsd {
                min_eigenvalue: min_eigenvalue.as_f64(),
            });
        }
        Ok(Self {
            values,
            source: CorrelationSource::default(),
            sigma,
            tickers: (0..n).map(|i| format!("A{:03}", i + 1)).collect(),
            min_eigenvalue,
            repaired: false,
        })
    }
}

/// Scales a correlation matrix by per-asset standard deviations.
pub fn assemble_covariance<T: Real>(corr: &CorrelationMatrix<T>, sigma: &[T]) -> Result<CovarianceAssembly<T>> {
    let n = corr.dim();
    if sigma.len() != n {
        return Err(Error::Dimension(format!("{} standard deviations for {n} assets", sigma.len())));
    }
    if let Some(i) = sigma.iter().position(|s| !(*s > T::zero()) || !s.is_finite()) {
        return Err(Error::NonPositiveSigma {
            ticker: corr.tickers()[i].clone(),
        });
    }
    let eig = symmetric_eigen(corr.values())?;
    let min_eigenvalue = eig.values.last().copied().unwrap_or(T::zero());
    let clamp = T::tol(PSD_CLAMP, 1e3);
    if min_eigenvalue < -clamp {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eigenvalue.as_f64(),
        });
    }
    let repaired = min_eigenvalue < T::zero();
    let c = if repaired {
        let clamped: Vec<T> = eig.values.iter().map(|&l| l.max(T::zero())).collect();
        Matrix::reconstruct(&eig.vectors, &clamped)
    } else {
        corr.values().clone()
    };
    let values = Matrix::from_fn(n, n, |i, j| sigma[i] * c[(i, j)] * sigma[j]);
    Ok(CovarianceAssembly {
        values,
        source: CorrelationSource::default(),
        sigma: sigma.to_vec(),
        tickers: corr.tickers().to_vec(),
        min_eigenvalue,
        repaired,
    })
}
