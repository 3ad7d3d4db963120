//! Seeded one-factor markets for experiments and tests.
//!
//! `r[t][i] = μ + s_t (β_i b_t m_t + η ε[t][i])` where `m` and `ε` are
//! independent standard normals, `s_t` is the volatility scale and `b_t` the
//! beta scale of the regime in force on day `t`.

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::marketdata::{PricePanel, ReturnPanel};
use crate::rng;
use crate::scalar::Real;

/// A change of regime from day `start` (inclusive) onwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime<T = f64> {
    pub start: usize,
    /// Multiplies every return's random part; variance scales by its square.
    pub vol_scale: T,
    /// Multiplies every beta, changing the correlation structure.
    pub beta_scale: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket<T = f64> {
    pub n_assets: usize,
    pub n_days: usize,
    pub drift: T,
    pub market_vol: T,
    pub idio_vol: T,
    /// Betas are drawn uniformly from this interval.
    pub beta_range: (T, T),
    pub regimes: Vec<Regime<T>>,
    pub seed: u64,
}

impl<T: Real> SyntheticMarket<T> {
    pub fn new(n_assets: usize, n_days: usize, seed: u64) -> Self {
        Self {
            n_assets,
            n_days,
            drift: T::lit(5e-4),
            market_vol: T::lit(0.01),
            idio_vol: T::lit(0.015),
            beta_range: (T::lit(0.5), T::lit(1.5)),
            regimes: Vec::new(),
            seed,
        }
    }

    /// Independent assets: no market factor.
    pub fn independent(mut self) -> Self {
        self.market_vol = T::zero();
        self
    }

    pub fn with_regime(mut self, regime: Regime<T>) -> Self {
        self.regimes.push(regime);
        self.regimes.sort_by_key(|r| r.start);
        self
    }

    /// Variance ×`factor` on days `[start, end)`.
    pub fn with_burst(self, start: usize, end: usize, variance_factor: T) -> Self {
        self.with_regime(Regime {
            start,
            vol_scale: variance_factor.sqrt(),
            beta_scale: T::one(),
        })
        .with_regime(Regime {
            start: end,
            vol_scale: T::one(),
            beta_scale: T::one(),
        })
    }

    fn regime_at(&self, t: usize) -> (T, T) {
        self.regimes
            .iter()
            .rev()
            .find(|r| r.start <= t)
            .map_or((T::one(), T::one()), |r| (r.vol_scale, r.beta_scale))
    }

    pub fn betas(&self) -> Vec<T> {
        let mut rng = rng::named(self.seed, "synthetic-betas");
        let (lo, hi) = self.beta_range;
        (0..self.n_assets)
            .map(|_| lo + (hi - lo) * T::lit(rng.random::<f64>()))
            .collect()
    }

    pub fn tickers(&self) -> Vec<String> {
        (0..self.n_assets).map(|i| format!("S{:03}", i + 1)).collect()
    }

    fn dates(&self, n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
        (0..n).map(|d| start + Days::new(d as u64)).collect()
    }

    pub fn returns(&self) -> Result<ReturnPanel<T>> {
        if self.n_assets == 0 || self.n_days == 0 {
            return Err(Error::Domain("synthetic market needs assets and days".into()));
        }
        let betas = self.betas();
        let mut market = rng::named(self.seed, "synthetic-market");
        let mut idio = rng::named(self.seed, "synthetic-idiosyncratic");
        let mut m = Matrix::zeros(self.n_days, self.n_assets);
        for t in 0..self.n_days {
            let (s, b) = self.regime_at(t);
            let f: f64 = StandardNormal.sample(&mut market);
            for i in 0..self.n_assets {
                let e: f64 = StandardNormal.sample(&mut idio);
                m[(t, i)] = self.drift + s * (betas[i] * b * self.market_vol * T::lit(f) + self.idio_vol * T::lit(e));
            }
        }
        ReturnPanel::new(self.dates(self.n_days + 1)[1..].to_vec(), self.tickers(), m)
    }

    /// Closing prices starting at 100 whose log-returns are [`Self::returns`].
    pub fn prices(&self) -> Result<PricePanel<T>> {
        let r = self.returns()?;
        let n = self.n_assets;
        let mut prices = Vec::with_capacity((self.n_days + 1) * n);
        let mut level = vec![T::lit(100.0).ln(); n];
        prices.extend(level.iter().map(|l| Some(l.exp())));
        for t in 0..self.n_days {
            for i in 0..n {
                level[i] = level[i] + r.returns()[(t, i)];
                prices.push(Some(level[i].exp()));
            }
        }
        PricePanel::new(self.dates(self.n_days + 1), self.tickers(), prices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::log_returns;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = SyntheticMarket::<f64>::new(4, 50, 7).returns().unwrap();
        let b = SyntheticMarket::<f64>::new(4, 50, 7).returns().unwrap();
        let c = SyntheticMarket::<f64>::new(4, 50, 8).returns().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn prices_round_trip_to_returns() {
        let mkt = SyntheticMarket::<f64>::new(3, 30, 1);
        let r = log_returns(&mkt.prices().unwrap()).unwrap();
        let direct = mkt.returns().unwrap();
        assert_eq!(r.dates(), direct.dates());
        assert!(r.returns().max_abs_diff(direct.returns()) < 1e-12);
    }

    #[test]
    fn burst_scales_variance() {
        let mkt = SyntheticMarket::<f64>::new(5, 3000, 3).with_burst(1000, 2000, 4.0);
        let r = mkt.returns().unwrap();
        let var = |rows: std::ops::Range<usize>| {
            let p = r.rows(rows).unwrap();
            p.std_devs().iter().map(|s| s * s).sum::<f64>()
        };
        let ratio = var(1000..2000) / var(0..1000);
        assert!((ratio - 4.0).abs() < 0.6, "{ratio}");
    }
}
