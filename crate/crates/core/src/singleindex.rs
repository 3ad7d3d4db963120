//! Single-index regression: each asset's returns regressed on a market
//! index, `R_t = a + b I_t + E_t`, to strip out the market mode.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::marketdata::ReturnPanel;
use crate::rmt::SpectralDecomposition;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexSource {
    /// Returns of the portfolio weighted by the top eigenvector.
    EigenPortfolio,
    /// Supplied by the user (e.g. a published market index).
    External,
}

/// Market index returns aligned with a return panel.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSeries<T = f64> {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<T>,
    pub source: IndexSource,
}

impl<T: Real> IndexSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<T>, source: IndexSource) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} dates for {} index values",
                dates.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("index has non-finite values".into()));
        }
        Ok(Self { dates, values, source })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reads a `date,return` CSV.
    pub fn read_csv<R: std::io::Read>(source: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(source);
        let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header != ["date", "return"] {
            return Err(Error::Parse {
                line: 1,
                column: String::new(),
                message: "expected header `date,return`".into(),
            });
        }
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let date = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
                line,
                column: "date".into(),
                message: e.to_string(),
            })?;
            let v = rec[1].trim().parse::<T>().map_err(|_| Error::Parse {
                line,
                column: "return".into(),
                message: format!("invalid return `{}`", &rec[1]),
            })?;
            dates.push(date);
            values.push(v);
        }
        Self::new(dates, values, IndexSource::External)
    }

    /// Aligns the index to the panel's dates.
    pub fn align_to(&self, returns: &ReturnPanel<T>) -> Result<Self> {
        let lookup: std::collections::HashMap<NaiveDate, T> =
            self.dates.iter().copied().zip(self.values.iter().copied()).collect();
        let values = returns
            .dates()
            .iter()
            .map(|d| {
                lookup
                    .get(d)
                    .copied()
                    .ok_or_else(|| Error::MissingData { ticker: "index".into(), row: 0 })
            })
            .collect::<Result<Vec<T>>>()?;
        Self::new(returns.dates().to_vec(), values, self.source)
    }
}

/// OLS coefficients and residuals for every ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit<T = f64> {
    pub intercepts: Vec<T>,
    pub slopes: Vec<T>,
    pub residuals: Matrix<T>,
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
}

impl<T: Real> RegressionFit<T> {
    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }
}

/// `I_t = Σ_i e₁[i] R_t[i]` with `e₁` the unit top eigenvector.
pub fn eigen_market_index<T: Real>(
    returns: &ReturnPanel<T>,
    decomp: &SpectralDecomposition<T>,
) -> Result<IndexSeries<T>> {
    if decomp.dim() != returns.n_assets() {
        return Err(Error::Dimension(format!(
            "decomposition of size {} for {} assets",
            decomp.dim(),
            returns.n_assets()
        )));
    }
    if decomp.dim() == 0 {
        return Err(Error::Dimension("empty decomposition".into()));
    }
    let e1 = decomp.eigenvector(0);
    let r = returns.returns();
    let values = (0..returns.len()).map(|t| dot(r.row(t), &e1)).collect();
    IndexSeries::new(returns.dates().to_vec(), values, IndexSource::EigenPortfolio)
}

/// Per-ticker simple linear regression on the index.
pub fn fit_single_index<T: Real>(returns: &ReturnPanel<T>, index: &IndexSeries<T>) -> Result<RegressionFit<T>> {
    let l = returns.len();
    if index.len() != l {
        return Err(Error::Dimension(format!("index has {} values for {l} observations", index.len())));
    }
    if l < 2 {
        return Err(Error::InsufficientData("regression needs two observations".into()));
    }
    let lf = T::count(l);
    let mean_i = index.values.iter().copied().sum::<T>() / lf;
    let dev_i: Vec<T> = index.values.iter().map(|&x| x - mean_i).collect();
    let var_i: T = dev_i.iter().map(|&d| d * d).sum();
    let scale = index.values.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if !(var_i.sqrt() > T::epsilon() * scale * lf) {
        return Err(Error::Domain("index series is constant".into()));
    }
    let n = returns.n_assets();
    let mut intercepts = Vec::with_capacity(n);
    let mut slopes = Vec::with_capacity(n);
    let mut residuals = Matrix::zeros(l, n);
    for j in 0..n {
        let col = returns.column(j);
        let mean_r = col.iter().copied().sum::<T>() / lf;
        let cov: T = col.iter().zip(&dev_i).map(|(&r, &d)| (r - mean_r) * d).sum();
        let b = cov / var_i;
        let a = mean_r - b * mean_i;
        for t in 0..l {
            // computed from centred quantities so residuals sum to zero to rounding
            residuals[(t, j)] = (col[t] - mean_r) - b * dev_i[t];
        }
        intercepts.push(a);
        slopes.push(b);
    }
    Ok(RegressionFit {
        intercepts,
        slopes,
        residuals,
        dates: returns.dates().to_vec(),
        tickers: returns.tickers().to_vec(),
    })
}

/// The residuals as a return panel with the original labels.
pub fn residual_panel<T: Real>(fit: &RegressionFit<T>) -> Result<ReturnPanel<T>> {
    ReturnPanel::new(fit.dates.clone(), fit.tickers.clone(), fit.residuals.clone())
}
