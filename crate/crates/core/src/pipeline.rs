//! Year-pair and rolling-window experiments over the method matrix.

use std::ops::RangeInclusive;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{filter_fully_liquid, log_returns, sample_std, PricePanel, ReturnPanel};
use crate::markowitz::{prepare_pair, Frontier};
use crate::metrics::{compare, ComparisonReport, MethodConfig};
use crate::rmt::{decompose, ks_one_sample, pearson_correlation, Band, KsResult, MpParams};
use crate::scalar::Real;
use crate::singleindex::IndexSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowMode {
    YearPair,
    Rolling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_length: usize,
    pub step: usize,
    pub mode: WindowMode,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window_length: 100,
            step: 5,
            mode: WindowMode::Rolling,
        }
    }
}

impl WindowSpec {
    pub fn rolling(window_length: usize, step: usize) -> Result<Self> {
        let spec = Self {
            window_length,
            step,
            mode: WindowMode::Rolling,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::Domain("window step must be at least 1".into()));
        }
        if self.window_length < 2 {
            return Err(Error::Domain("windows need at least two observations".into()));
        }
        Ok(())
    }

    /// Number of (estimation, evaluation) pairs in `len` observations.
    pub fn pair_count(&self, len: usize) -> usize {
        let w = self.window_length;
        if len < 2 * w {
            0
        } else {
            (len - 2 * w) / self.step + 1
        }
    }

    /// Number of single windows in `len` observations.
    pub fn window_count(&self, len: usize) -> usize {
        if len < self.window_length {
            0
        } else {
            (len - self.window_length) / self.step + 1
        }
    }
}

/// Extreme risks over the feasible points of a frontier pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RiskEnvelope<T = f64> {
    pub min_predicted: T,
    pub max_predicted: T,
    pub min_realized: T,
    pub max_realized: T,
}

impl<T: Real> RiskEnvelope<T> {
    pub fn of(predicted: &Frontier<T>, realized: &Frontier<T>) -> Option<Self> {
        let span = |v: Vec<T>| -> Option<(T, T)> {
            let lo = v.iter().copied().reduce(T::min)?;
            let hi = v.iter().copied().reduce(T::max)?;
            Some((lo, hi))
        };
        let (min_predicted, max_predicted) = span(predicted.risks())?;
        let (min_realized, max_realized) = span(realized.risks())?;
        Some(Self {
            min_predicted,
            max_predicted,
            min_realized,
            max_realized,
        })
    }
}

/// One method applied to one window pair.
#[derive(Debug, Clone)]
pub struct PairRun<T = f64> {
    pub report: ComparisonReport<T>,
    pub envelope: Option<RiskEnvelope<T>>,
    pub predicted: Frontier<T>,
    pub realized: Frontier<T>,
}

/// Runs every method on one (previous, target) pair of return panels.
pub fn run_pair<T: Real>(
    previous: &ReturnPanel<T>,
    target: &ReturnPanel<T>,
    methods: &[MethodConfig<T>],
) -> Result<Vec<PairRun<T>>> {
    methods
        .par_iter()
        .map(|m| {
            let setup = prepare_pair(previous, target, m)?;
            let report = compare(
                &setup.predicted,
                &setup.realized,
                &setup.previous.correlation,
                &setup.target.correlation,
                m,
            )?;
            Ok(PairRun {
                report,
                envelope: RiskEnvelope::of(&setup.predicted, &setup.realized),
                predicted: setup.predicted,
                realized: setup.realized,
            })
        })
        .collect()
}

/// Eigenvalue summary of one window in the layout of a yearly spectrum table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectrumSummary<T = f64> {
    pub label: String,
    pub n_stocks: usize,
    pub n_observations: usize,
    pub q: T,
    pub lambda_minus: T,
    pub lambda_plus: T,
    pub lambda_1: T,
    pub lambda_2: T,
    /// Mean of the noise-band eigenvalues.
    pub lambda_bar: Option<T>,
    pub below_noise: usize,
    pub noise: usize,
    pub above_noise: usize,
    pub ks: KsResult<T>,
    /// Whether the KS test rejects at the 1% level.
    pub rejects: bool,
}

impl<T: Real> SpectrumSummary<T> {
    pub const CSV_HEADER: [&'static str; 14] = [
        "label",
        "n_stocks",
        "n_observations",
        "q",
        "lambda_minus",
        "lambda_plus",
        "lambda_1",
        "lambda_2",
        "lambda_bar",
        "below",
        "noise",
        "above",
        "ks_distance",
        "p_value",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.label.clone(),
            self.n_stocks.to_string(),
            self.n_observations.to_string(),
            self.q.to_string(),
            self.lambda_minus.to_string(),
            self.lambda_plus.to_string(),
            self.lambda_1.to_string(),
            self.lambda_2.to_string(),
            self.lambda_bar.map(|v| v.to_string()).unwrap_or_default(),
            self.below_noise.to_string(),
            self.noise.to_string(),
            self.above_noise.to_string(),
            self.ks.statistic.to_string(),
            self.ks.p_value.to_string(),
        ]
    }
}

/// Spectrum of the Pearson correlation of `returns`, with the KS test of
/// its eigenvalues against the Marčenko-Pastur law of the same shape.
pub fn spectrum_summary<T: Real>(label: &str, returns: &ReturnPanel<T>) -> Result<SpectrumSummary<T>> {
    let params = MpParams::from_shape(returns.len(), returns.n_assets())?;
    let d = decompose(&pearson_correlation(returns)?, &params)?;
    let ev = d.eigenvalues();
    let (lambda_minus, lambda_plus) = params.bounds();
    let ks = ks_one_sample(ev, &params)?;
    Ok(SpectrumSummary {
        label: label.to_string(),
        n_stocks: returns.n_assets(),
        n_observations: returns.len(),
        q: params.q(),
        lambda_minus,
        lambda_plus,
        lambda_1: ev[0],
        lambda_2: ev.get(1).copied().unwrap_or(T::nan()),
        lambda_bar: d.mean_noise().ok(),
        below_noise: d.count(Band::BelowNoise),
        noise: d.count(Band::Noise),
        above_noise: d.count(Band::AboveNoise),
        rejects: ks.rejects_at(T::lit(0.01)),
        ks,
    })
}

/// Result of a year-pair experiment.
#[derive(Debug, Clone)]
pub struct YearPairOutcome<T = f64> {
    pub tickers: Vec<String>,
    pub previous: SpectrumSummary<T>,
    pub target: SpectrumSummary<T>,
    pub runs: Vec<PairRun<T>>,
}

impl<T: Real> YearPairOutcome<T> {
    pub fn reports(&self) -> Vec<ComparisonReport<T>> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }
}

fn rows_in<T: Real>(returns: &ReturnPanel<T>, range: &RangeInclusive<NaiveDate>) -> Result<ReturnPanel<T>> {
    let dates = returns.dates();
    let start = dates.partition_point(|d| d < range.start());
    let end = dates.partition_point(|d| d <= range.end());
    if end <= start + 1 {
        return Err(Error::InsufficientData(format!(
            "fewer than two returns between {} and {}",
            range.start(),
            range.end()
        )));
    }
    returns.rows(start..end)
}

/// Forecasts `target_range` from `previous_range` for every method, on the
/// tickers traded on every date of both ranges.
pub fn run_year_pair<T: Real>(
    prices: &PricePanel<T>,
    previous_range: RangeInclusive<NaiveDate>,
    target_range: RangeInclusive<NaiveDate>,
    methods: &[MethodConfig<T>],
) -> Result<YearPairOutcome<T>> {
    let union = (*previous_range.start()).min(*target_range.start())..=(*previous_range.end()).max(*target_range.end());
    let liquid = filter_fully_liquid(&prices.restrict_dates(&union))?;
    let returns = log_returns(&liquid)?;
    let previous = rows_in(&returns, &previous_range)?;
    let target = rows_in(&returns, &target_range)?;
    Ok(YearPairOutcome {
        tickers: returns.tickers().to_vec(),
        previous: spectrum_summary(&format!("{}..{}", previous_range.start(), previous_range.end()), &previous)?,
        target: spectrum_summary(&format!("{}..{}", target_range.start(), target_range.end()), &target)?,
        runs: run_pair(&previous, &target, methods)?,
    })
}

/// One (estimation, evaluation) window pair of a rolling run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RollingWindow<T = f64> {
    pub index: usize,
    pub estimation: (NaiveDate, NaiveDate),
    pub evaluation: (NaiveDate, NaiveDate),
    pub q: T,
    pub reports: Vec<ComparisonReport<T>>,
    pub envelopes: Vec<Option<RiskEnvelope<T>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RollingOutcome<T = f64> {
    pub tickers: Vec<String>,
    pub spec: WindowSpec,
    /// The evaluation window is taken to be the `W` observations right after
    /// the estimation window.
    pub assumption: String,
    pub windows: Vec<RollingWindow<T>>,
}

impl<T: Real> RollingOutcome<T> {
    /// MSE of method `m` per window (`None` where undefined).
    pub fn mse_series(&self, m: usize) -> Vec<Option<T>> {
        self.windows.iter().map(|w| w.reports[m].mse).collect()
    }
}

pub const EVALUATION_ASSUMPTION: &str = "evaluation window = the window_length observations following the estimation window";

/// Rolling forecasts over a return panel: estimation window `i` covers
/// observations `[i step, i step + W)` and is evaluated on the next `W`.
pub fn run_rolling_returns<T: Real>(
    returns: &ReturnPanel<T>,
    spec: &WindowSpec,
    methods: &[MethodConfig<T>],
) -> Result<RollingOutcome<T>> {
    spec.validate()?;
    let count = spec.pair_count(returns.len());
    if count == 0 {
        return Err(Error::InsufficientData(format!(
            "{} observations cannot hold two windows of {}",
            returns.len(),
            spec.window_length
        )));
    }
    let w = spec.window_length;
    let dates = returns.dates();
    let windows = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = i * spec.step;
            let est = returns.rows(s..s + w)?;
            let eval = returns.rows(s + w..s + 2 * w)?;
            let runs = run_pair(&est, &eval, methods)?;
            Ok(RollingWindow {
                index: i,
                estimation: (dates[s], dates[s + w - 1]),
                evaluation: (dates[s + w], dates[s + 2 * w - 1]),
                q: T::count(w) / T::count(returns.n_assets()),
                envelopes: runs.iter().map(|r| r.envelope).collect(),
                reports: runs.into_iter().map(|r| r.report).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RollingOutcome {
        tickers: returns.tickers().to_vec(),
        spec: *spec,
        assumption: EVALUATION_ASSUMPTION.to_string(),
        windows,
    })
}

/// Rolling forecasts on the tickers traded on every date of `prices`.
pub fn run_rolling<T: Real>(
    prices: &PricePanel<T>,
    spec: &WindowSpec,
    methods: &[MethodConfig<T>],
) -> Result<RollingOutcome<T>> {
    let liquid = filter_fully_liquid(prices)?;
    run_rolling_returns(&log_returns(&liquid)?, spec, methods)
}

/// Sample standard deviation of the index over each window.
pub fn ibovespa_style_volatility<T: Real>(index: &IndexSeries<T>, spec: &WindowSpec) -> Result<Vec<T>> {
    spec.validate()?;
    let count = spec.window_count(index.len());
    if count == 0 {
        return Err(Error::InsufficientData(format!(
            "{} index values for a window of {}",
            index.len(),
            spec.window_length
        )));
    }
    Ok((0..count)
        .map(|i| {
            let s = i * spec.step;
            sample_std(&index.values[s..s + spec.window_length])
        })
        .collect())
}
