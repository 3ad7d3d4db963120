//! Null spectra from independently permuted return series, and random
//! draws from the Marčenko-Pastur law.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::marketdata::ReturnPanel;
use crate::rmt::mp::MpParams;
use crate::rmt::spectrum::pearson_correlation;
use crate::rng;
use crate::scalar::Real;

/// Eigenvalues of the correlation matrix of `returns` after permuting each
/// column independently, once per simulation.
///
/// Simulation `s` draws from stream `s` of `seed`, so the output is identical
/// whatever the thread count.
pub fn shuffle_eigenvalue_sample<T: Real>(
    returns: &ReturnPanel<T>,
    n_sims: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    if n_sims == 0 {
        return Err(Error::Domain("need at least one simulation".into()));
    }
    let columns: Vec<Vec<T>> = (0..returns.n_assets()).map(|j| returns.column(j)).collect();
    (0..n_sims)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::indexed(seed, s as u64);
            let mut cols = columns.clone();
            for col in cols.iter_mut() {
                col.shuffle(&mut rng);
            }
            let m = Matrix::from_fn(returns.len(), cols.len(), |t, i| cols[i][t]);
            let shuffled = returns.with_returns(m)?;
            let corr = pearson_correlation(&shuffled)?;
            Ok(symmetric_eigen(corr.values())?.values)
        })
        .collect()
}

/// Pools per-simulation eigenvalues into one sample.
pub fn pool<T: Clone>(samples: &[Vec<T>]) -> Vec<T> {
    samples.iter().flatten().cloned().collect()
}

/// `n` independent draws from the law by inverse-cdf sampling.
pub fn mp_sample<T: Real>(params: &MpParams<T>, n: usize, seed: u64) -> Result<Vec<T>> {
    let mut rng = rng::named(seed, "mp-reference");
    let levels: Vec<T> = (0..n)
        .map(|_| {
            // open interval (0, 1)
            let u: f64 = rng.random::<f64>();
            T::lit(u.max(f64::MIN_POSITIVE))
        })
        .collect();
    params.quantiles(&levels)
}
