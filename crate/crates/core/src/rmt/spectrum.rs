//! Pearson correlation, spectral decomposition against the noise band, and
//! eigenvalue cleaning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::marketdata::ReturnPanel;
use crate::rmt::mp::MpParams;
use crate::scalar::Real;

/// Symmetric matrix of pairwise correlations.
///
/// Matrices produced by [`pearson_correlation`] have an exact unit diagonal.
/// Cleaned matrices keep their trace but not necessarily a unit diagonal; use
/// [`CorrelationMatrix::diagonal_deviation`] to inspect it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CorrelationMatrix<T = f64> {
    tickers: Vec<String>,
    values: Matrix<T>,
}

impl<T: Real> CorrelationMatrix<T> {
    /// Validates symmetry, a unit diagonal and off-diagonals in `[-1, 1]`.
    pub fn new(tickers: Vec<String>, values: Matrix<T>) -> Result<Self> {
        let m = Self::unchecked_shape(tickers, values)?;
        let tol = T::tol(1e-12, 16.0);
        if m.values.asymmetry() > tol {
            return Err(Error::Domain("correlation matrix is not symmetric".into()));
        }
        let n = m.dim();
        for i in 0..n {
            if m.values[(i, i)] != T::one() {
                return Err(Error::Domain(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                if m.values[(i, j)].abs() > T::one() {
                    return Err(Error::Domain(format!("entry ({i}, {j}) outside [-1, 1]")));
                }
            }
        }
        Ok(m)
    }

    /// Wraps a symmetric matrix without the unit-diagonal check (cleaned output).
    pub fn from_cleaned(tickers: Vec<String>, mut values: Matrix<T>) -> Result<Self> {
        values.symmetrize();
        Self::unchecked_shape(tickers, values)
    }

    fn unchecked_shape(tickers: Vec<String>, values: Matrix<T>) -> Result<Self> {
        if !values.is_square() || values.rows() != tickers.len() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for {} tickers",
                values.rows(),
                values.cols(),
                tickers.len()
            )));
        }
        Ok(Self { tickers, values })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[(i, j)]
    }

    /// Largest `|C_ii - 1|`.
    pub fn diagonal_deviation(&self) -> T {
        self.values
            .diagonal()
            .into_iter()
            .map(|d| (d - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Strictly-upper-triangular entries in row order.
    pub fn upper_triangle(&self) -> Vec<T> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.values[(i, j)]);
            }
        }
        out
    }
}

/// Pearson correlation of the columns of a return panel.
pub fn pearson_correlation<T: Real>(returns: &ReturnPanel<T>) -> Result<CorrelationMatrix<T>> {
    let l = returns.len();
    let n = returns.n_assets();
    if l < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 2 observations, got {l}"
        )));
    }
    let means = returns.means();
    let r = returns.returns();
    let centred = Matrix::from_fn(l, n, |t, i| r[(t, i)] - means[i]);
    let mut ss = vec![T::zero(); n];
    for t in 0..l {
        for (i, s) in ss.iter_mut().enumerate() {
            let x = centred[(t, i)];
            *s = *s + x * x;
        }
    }
    for (i, &s) in ss.iter().enumerate() {
        // a constant column leaves only rounding residue after centring
        let scale: T = r.column(i).iter().map(|x| x.abs()).fold(T::zero(), T::max);
        if !(s > T::zero()) || s.sqrt() <= T::epsilon() * scale * T::count(l) {
            return Err(Error::ZeroVariance {
                ticker: returns.tickers()[i].clone(),
            });
        }
    }
    let norms: Vec<T> = ss.iter().map(|s| s.sqrt()).collect();
    let mut values = Matrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut cross = T::zero();
            for t in 0..l {
                cross = cross + centred[(t, i)] * centred[(t, j)];
            }
            let c = (cross / (norms[i] * norms[j])).max(-T::one()).min(T::one());
            values[(i, j)] = c;
            values[(j, i)] = c;
        }
    }
    CorrelationMatrix::new(returns.tickers().to_vec(), values)
}

/// Position of an eigenvalue relative to the noise band `[λ₋, λ₊]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    BelowNoise,
    Noise,
    AboveNoise,
}

impl Band {
    pub fn classify<T: Real>(lambda: T, lower: T, upper: T) -> Self {
        if lambda > upper {
            Band::AboveNoise
        } else if lambda >= lower {
            Band::Noise
        } else {
            Band::BelowNoise
        }
    }
}

/// Eigen-structure of a correlation matrix together with its band labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition<T = f64> {
    tickers: Vec<String>,
    eigenvalues: Vec<T>,
    eigenvectors: Matrix<T>,
    bands: Vec<Band>,
    params: MpParams<T>,
    mean_noise: Option<T>,
}

impl<T: Real> SpectralDecomposition<T> {
    /// Eigenvalues, largest first.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, column `k` paired with eigenvalue `k`.
    pub fn eigenvectors(&self) -> &Matrix<T> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> Vec<T> {
        self.eigenvectors.column(k)
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn params(&self) -> &MpParams<T> {
        &self.params
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn count(&self, band: Band) -> usize {
        self.bands.iter().filter(|&&b| b == band).count()
    }

    /// Average of the noise-band eigenvalues.
    pub fn mean_noise(&self) -> Result<T> {
        self.mean_noise.ok_or_else(|| {
            let (lower, upper) = self.params.bounds();
            Error::EmptyNoiseBand {
                lower: lower.as_f64(),
                upper: upper.as_f64(),
            }
        })
    }
}

/// Eigendecomposition of `corr` with noise-band labels from `params`.
pub fn decompose<T: Real>(corr: &CorrelationMatrix<T>, params: &MpParams<T>) -> Result<SpectralDecomposition<T>> {
    let eig = symmetric_eigen(corr.values())?;
    let (lower, upper) = params.bounds();
    let bands: Vec<Band> = eig
        .values
        .iter()
        .map(|&l| Band::classify(l, lower, upper))
        .collect();
    let noise: Vec<T> = eig
        .values
        .iter()
        .zip(&bands)
        .filter(|(_, &b)| b == Band::Noise)
        .map(|(&l, _)| l)
        .collect();
    let mean_noise = (!noise.is_empty()).then(|| noise.iter().copied().sum::<T>() / T::count(noise.len()));
    Ok(SpectralDecomposition {
        tickers: corr.tickers().to_vec(),
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        bands,
        params: *params,
        mean_noise,
    })
}

/// Replaces every noise-band eigenvalue by the band average and rebuilds
/// `V D Vᵀ`. Eigenvalues outside the band are kept as they are.
pub fn clean<T: Real>(decomp: &SpectralDecomposition<T>) -> Result<CorrelationMatrix<T>> {
    let avg = decomp.mean_noise()?;
    let d: Vec<T> = decomp
        .eigenvalues
        .iter()
        .zip(&decomp.bands)
        .map(|(&l, &b)| if b == Band::Noise { avg } else { l })
        .collect();
    let values = Matrix::reconstruct(&decomp.eigenvectors, &d);
    CorrelationMatrix::from_cleaned(decomp.tickers.clone(), values)
}
