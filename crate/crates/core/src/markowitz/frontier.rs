use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markowitz::covariance::CovarianceAssembly;
use crate::markowitz::qp::{minimize_variance, WeightBounds};
use crate::scalar::Real;

/// Smallest grid start, so that no target return is non-positive.
pub const MIN_POSITIVE_RETURN: f64 = 1e-8;

/// One solved point of a frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FrontierPoint<T = f64> {
    pub target_return: T,
    /// Portfolio variance `wᵀ Σ w`.
    pub risk: T,
    pub weights: Vec<T>,
    pub kkt_residual: T,
}

/// Minimum-risk portfolios over an increasing grid of target returns.
/// Infeasible grid entries are kept as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Frontier<T = f64> {
    pub tickers: Vec<String>,
    pub grid: Vec<T>,
    pub points: Vec<Option<FrontierPoint<T>>>,
}

/// Flat row used by the CSV and JSON emitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FrontierRow<T = f64> {
    pub target_return: T,
    pub risk: Option<T>,
    pub feasible: bool,
    pub weights: Vec<T>,
}

impl<T: Real> Frontier<T> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn feasible_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_some()).count()
    }

    /// Risks of the feasible points, in grid order.
    pub fn risks(&self) -> Vec<T> {
        self.points.iter().flatten().map(|p| p.risk).collect()
    }

    pub fn rows(&self) -> Vec<FrontierRow<T>> {
        self.grid
            .iter()
            .zip(&self.points)
            .map(|(&t, p)| FrontierRow {
                target_return: t,
                risk: p.as_ref().map(|p| p.risk),
                feasible: p.is_some(),
                weights: p.as_ref().map(|p| p.weights.clone()).unwrap_or_default(),
            })
            .collect()
    }

    /// `target_return,risk,feasible,w_1..w_N`; infeasible rows leave risk and
    /// weights empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.tickers.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["target_return".to_string(), "risk".into(), "feasible".into()];
        header.extend((1..=n).map(|i| format!("w_{i}")));
        w.write_record(&header)?;
        for row in self.rows() {
            let mut rec = vec![row.target_return.to_string()];
            rec.push(row.risk.map(|r| r.to_string()).unwrap_or_default());
            rec.push(row.feasible.to_string());
            if row.feasible {
                rec.extend(row.weights.iter().map(|x| x.to_string()));
            } else {
                rec.extend(std::iter::repeat_n(String::new(), n));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.rows()).map_err(|e| Error::Io(e.to_string()))
    }
}

fn check_inputs<T: Real>(cov: &CovarianceAssembly<T>, means: &[T]) -> Result<()> {
    if cov.dim() != means.len() {
        return Err(Error::Dimension(format!(
            "{} mean returns for a {}-asset covariance",
            means.len(),
            cov.dim()
        )));
    }
    Ok(())
}

fn point<T: Real>(target: T, sol: crate::markowitz::qp::QpSolution<T>) -> FrontierPoint<T> {
    FrontierPoint {
        target_return: target,
        risk: sol.variance,
        weights: sol.weights,
        kkt_residual: sol.kkt_residual,
    }
}

/// Minimum-variance portfolio with return `target_return`.
pub fn min_risk_weights<T: Real>(
    cov: &CovarianceAssembly<T>,
    mean_returns: &[T],
    target_return: T,
    bounds: &WeightBounds<T>,
) -> Result<FrontierPoint<T>> {
    check_inputs(cov, mean_returns)?;
    let sol = minimize_variance(&cov.values, mean_returns, Some(target_return), bounds)?;
    Ok(point(target_return, sol))
}

/// Global minimum-variance portfolio; its `target_return` is the return it
/// earns.
pub fn gmv<T: Real>(cov: &CovarianceAssembly<T>, mean_returns: &[T], bounds: &WeightBounds<T>) -> Result<FrontierPoint<T>> {
    check_inputs(cov, mean_returns)?;
    let sol = minimize_variance(&cov.values, mean_returns, None, bounds)?;
    let ret = sol.weights.iter().zip(mean_returns).map(|(&w, &m)| w * m).sum();
    Ok(point(ret, sol))
}

/// `n` equally spaced targets from `lo` to `hi`, or just `hi` when the
/// interval is empty or `n == 1`.
pub fn frontier_grid<T: Real>(lo: T, hi: T, n: usize) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::Domain("grid needs at least one point".into()));
    }
    let width = hi - lo;
    if n == 1 || !(width > T::tol(1e-14, 64.0) * hi.abs().max(T::min_positive_value())) {
        return Ok(vec![hi]);
    }
    let last = T::count(n - 1);
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo + width * T::count(i) / last })
        .collect())
}

pub(crate) fn highest_mean<T: Real>(means: &[T]) -> Result<T> {
    let hi = means.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi > T::zero()) {
        return Err(Error::NoPositiveReturn);
    }
    Ok(hi)
}

/// Solves every grid target; infeasible targets become `None`.
pub fn trace_on_grid<T: Real>(
    cov: &CovarianceAssembly<T>,
    mean_returns: &[T],
    bounds: &WeightBounds<T>,
    grid: &[T],
) -> Result<Frontier<T>> {
    check_inputs(cov, mean_returns)?;
    let points = grid
        .par_iter()
        .map(|&t| match min_risk_weights(cov, mean_returns, t, bounds) {
            Ok(p) => Ok(Some(p)),
            Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Frontier {
        tickers: cov.tickers.clone(),
        grid: grid.to_vec(),
        points,
    })
}

/// Efficient frontier from the larger of a tiny positive return and the GMV
/// return up to the best single-asset mean.
pub fn trace_frontier<T: Real>(
    cov: &CovarianceAssembly<T>,
    mean_returns: &[T],
    bounds: &WeightBounds<T>,
    n_points: usize,
) -> Result<Frontier<T>> {
    check_inputs(cov, mean_returns)?;
    let hi = highest_mean(mean_returns)?;
    let g = gmv(cov, mean_returns, bounds)?;
    let lo = g.target_return.max(T::lit(MIN_POSITIVE_RETURN));
    let grid = frontier_grid(lo, hi, n_points)?;
    trace_on_grid(cov, mean_returns, bounds, &grid)
}
