//! Predicted versus realized frontiers for one (previous, target) pair of
//! return windows. Both frontiers use the target window's mean returns and
//! standard deviations, so only the correlation estimates differ.

use crate::error::{Error, Result};
use crate::marketdata::ReturnPanel;
use crate::markowitz::covariance::{assemble_covariance, CorrelationSource, CovarianceAssembly};
use crate::markowitz::frontier::{frontier_grid, gmv, highest_mean, trace_on_grid, Frontier, MIN_POSITIVE_RETURN};
use crate::metrics::MethodConfig;
use crate::rmt::{clean, decompose, pearson_correlation, CorrelationMatrix, MpParams, SpectralDecomposition};
use crate::scalar::Real;
use crate::singleindex::{eigen_market_index, fit_single_index, residual_panel, RegressionFit};

/// The correlation estimate of one window under a method.
#[derive(Debug, Clone)]
pub struct SideModel<T = f64> {
    /// Final correlation matrix (residual-based and/or cleaned).
    pub correlation: CorrelationMatrix<T>,
    /// Spectrum of the matrix before cleaning.
    pub spectrum: SpectralDecomposition<T>,
    pub regression: Option<RegressionFit<T>>,
    /// Returns the correlation was estimated from: the window itself, or its
    /// regression residuals.
    pub basis: ReturnPanel<T>,
    pub source: CorrelationSource,
}

/// Builds the correlation matrix of `returns` as prescribed by `method`.
pub fn side_model<T: Real>(returns: &ReturnPanel<T>, method: &MethodConfig<T>) -> Result<SideModel<T>> {
    let params = MpParams::from_shape(returns.len(), returns.n_assets())?;
    let (basis, regression) = if method.regression {
        let corr = pearson_correlation(returns)?;
        let index = eigen_market_index(returns, &decompose(&corr, &params)?)?;
        let fit = fit_single_index(returns, &index)?;
        (residual_panel(&fit)?, Some(fit))
    } else {
        (returns.clone(), None)
    };
    let raw = pearson_correlation(&basis)?;
    let spectrum = decompose(&raw, &params)?;
    let correlation = if method.cleaning { clean(&spectrum)? } else { raw };
    Ok(SideModel {
        correlation,
        spectrum,
        regression,
        basis,
        source: CorrelationSource {
            cleaned: method.cleaning,
            residual: method.regression,
        },
    })
}

/// Everything computed for one window pair.
#[derive(Debug, Clone)]
pub struct PairSetup<T = f64> {
    pub previous: SideModel<T>,
    pub target: SideModel<T>,
    pub means: Vec<T>,
    pub sigma: Vec<T>,
    pub predicted_cov: CovarianceAssembly<T>,
    pub realized_cov: CovarianceAssembly<T>,
    pub predicted: Frontier<T>,
    pub realized: Frontier<T>,
}

/// Runs the perfect-forecast protocol on one window pair.
///
/// The shared grid starts at the larger of the two GMV returns (and a tiny
/// positive floor) so that both frontiers are non-decreasing over it.
pub fn prepare_pair<T: Real>(
    previous: &ReturnPanel<T>,
    target: &ReturnPanel<T>,
    method: &MethodConfig<T>,
) -> Result<PairSetup<T>> {
    method.validate()?;
    if previous.tickers() != target.tickers() {
        return Err(Error::TickerMismatch);
    }
    let prev = side_model(previous, method)?;
    let tgt = side_model(target, method)?;
    let means = target.means();
    let sigma = tgt.basis.std_devs();
    let predicted_cov = assemble_covariance(&prev.correlation, &sigma)?.with_source(prev.source);
    let realized_cov = assemble_covariance(&tgt.correlation, &sigma)?.with_source(tgt.source);

    // No positive-mean asset leaves an empty grid; the comparison flags it.
    let grid = match highest_mean(&means) {
        Ok(hi) => {
            let lo = gmv(&predicted_cov, &means, &method.bounds)?
                .target_return
                .max(gmv(&realized_cov, &means, &method.bounds)?.target_return)
                .max(T::lit(MIN_POSITIVE_RETURN));
            frontier_grid(lo, hi, method.grid_size)?
        }
        Err(Error::NoPositiveReturn) => Vec::new(),
        Err(e) => return Err(e),
    };
    let predicted = trace_on_grid(&predicted_cov, &means, &method.bounds, &grid)?;
    let realized = trace_on_grid(&realized_cov, &means, &method.bounds, &grid)?;
    Ok(PairSetup {
        previous: prev,
        target: tgt,
        means,
        sigma,
        predicted_cov,
        realized_cov,
        predicted,
        realized,
    })
}

/// Predicted and realized frontiers on a shared grid.
pub fn frontier_pair<T: Real>(
    previous: &ReturnPanel<T>,
    target: &ReturnPanel<T>,
    method: &MethodConfig<T>,
) -> Result<(Frontier<T>, Frontier<T>)> {
    let setup = prepare_pair(previous, target, method)?;
    Ok((setup.predicted, setup.realized))
}
