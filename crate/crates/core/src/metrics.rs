//! Agreement between predicted and realized frontiers, and distances between
//! correlation matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markowitz::{Frontier, WeightBounds};
use crate::rmt::CorrelationMatrix;
use crate::scalar::Real;

/// Default number of histogram bins over `[-1, 1]`.
pub const DEFAULT_BINS: usize = 50;
/// Default number of frontier targets.
pub const DEFAULT_GRID: usize = 100;

/// One cell of the cleaning × regression × bounds method matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MethodConfig<T = f64> {
    pub cleaning: bool,
    pub regression: bool,
    pub bounds: WeightBounds<T>,
    pub grid_size: usize,
    pub bin_count: usize,
    pub seed: u64,
}

impl<T: Real> Default for MethodConfig<T> {
    fn default() -> Self {
        Self {
            cleaning: false,
            regression: false,
            bounds: WeightBounds::no_short(),
            grid_size: DEFAULT_GRID,
            bin_count: DEFAULT_BINS,
            seed: 0,
        }
    }
}

impl<T: Real> MethodConfig<T> {
    pub fn new(cleaning: bool, regression: bool, bounds: WeightBounds<T>) -> Self {
        Self {
            cleaning,
            regression,
            bounds,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bin_count < 2 {
            return Err(Error::Domain(format!("bin_count must be at least 2, got {}", self.bin_count)));
        }
        if self.grid_size == 0 {
            return Err(Error::Domain("grid size must be positive".into()));
        }
        WeightBounds::new(self.bounds.lower, self.bounds.upper).map(|_| ())
    }

    /// The four cleaning × regression combinations with shared settings.
    pub fn matrix(base: &Self) -> Vec<Self> {
        [(false, false), (true, false), (false, true), (true, true)]
            .into_iter()
            .map(|(cleaning, regression)| Self {
                cleaning,
                regression,
                ..*base
            })
            .collect()
    }

    /// Short label such as `clean+regress` or `raw`.
    pub fn label(&self) -> String {
        let mut s = match (self.cleaning, self.regression) {
            (false, false) => "raw".to_string(),
            (true, false) => "clean".to_string(),
            (false, true) => "regress".to_string(),
            (true, true) => "clean+regress".to_string(),
        };
        s.push_str(&format!("[{},{}]", self.bounds.lower, self.bounds.upper));
        s
    }
}

/// All five metrics plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ComparisonReport<T = f64> {
    pub label: String,
    pub method: MethodConfig<T>,
    pub tickers: Vec<String>,
    /// `None` when no grid point is feasible on both sides or a predicted
    /// risk is zero.
    pub ag: Option<T>,
    pub mse: Option<T>,
    pub angle_deg: Option<T>,
    pub dist: T,
    pub d_kl: T,
    /// Grid points feasible on both sides.
    pub n_points: usize,
    pub grid_size: usize,
    pub bin_count: usize,
    /// Bins where one histogram is empty and the other is not; their terms
    /// are dropped from `d_kl`.
    pub kl_masked_bins: usize,
    pub kl_negative: bool,
    pub notes: Vec<String>,
}

impl<T: Real> ComparisonReport<T> {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Io(e.to_string()))
    }

    pub const CSV_HEADER: [&'static str; 13] = [
        "window",
        "method",
        "cleaning",
        "regression",
        "lower",
        "upper",
        "ag",
        "mse",
        "angle_deg",
        "dist",
        "d_kl",
        "n_points",
        "bin_count",
    ];

    /// One batch CSV row, matching [`Self::CSV_HEADER`].
    pub fn csv_record(&self, window: &str) -> Vec<String> {
        let opt = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            window.to_string(),
            self.label.clone(),
            self.method.cleaning.to_string(),
            self.method.regression.to_string(),
            self.method.bounds.lower.to_string(),
            self.method.bounds.upper.to_string(),
            opt(self.ag),
            opt(self.mse),
            opt(self.angle_deg),
            self.dist.to_string(),
            self.d_kl.to_string(),
            self.n_points.to_string(),
            self.bin_count.to_string(),
        ]
    }
}

// Risks at grid points feasible on both sides.
fn paired_risks<T: Real>(pred: &Frontier<T>, real: &Frontier<T>) -> Result<(Vec<T>, Vec<T>)> {
    if pred.grid != real.grid {
        return Err(Error::Dimension("frontiers do not share a grid".into()));
    }
    Ok(pred
        .points
        .iter()
        .zip(&real.points)
        .filter_map(|(p, r)| Some((p.as_ref()?.risk, r.as_ref()?.risk)))
        .unzip())
}

fn nonempty<T>(v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InsufficientData("no grid point is feasible on both sides".into()));
    }
    Ok(())
}

/// Mean relative risk gap `(1/n) Σ (real − pred) / pred`.
pub fn agreement<T: Real>(pred: &Frontier<T>, real: &Frontier<T>) -> Result<T> {
    let (p, r) = paired_risks(pred, real)?;
    agreement_of(&p, &r)
}

pub fn agreement_of<T: Real>(pred: &[T], real: &[T]) -> Result<T> {
    nonempty(pred)?;
    let mut s = T::zero();
    for (i, (&p, &r)) in pred.iter().zip(real).enumerate() {
        if p == T::zero() {
            return Err(Error::ZeroPredictedRisk { index: i });
        }
        s = s + (r - p) / p;
    }
    Ok(s / T::count(pred.len()))
}

/// `(1/n) Σ (real − pred)²`.
pub fn mean_squared_error<T: Real>(pred: &Frontier<T>, real: &Frontier<T>) -> Result<T> {
    let (p, r) = paired_risks(pred, real)?;
    mean_squared_error_of(&p, &r)
}

pub fn mean_squared_error_of<T: Real>(pred: &[T], real: &[T]) -> Result<T> {
    nonempty(pred)?;
    let s: T = pred.iter().zip(real).map(|(&p, &r)| (r - p) * (r - p)).sum();
    Ok(s / T::count(pred.len()))
}

/// Angle in degrees between the two risk vectors.
pub fn risk_angle<T: Real>(pred: &Frontier<T>, real: &Frontier<T>) -> Result<T> {
    let (p, r) = paired_risks(pred, real)?;
    risk_angle_of(&p, &r)
}

pub fn risk_angle_of<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Dimension("risk vectors differ in length".into()));
    }
    let na = crate::linalg::norm2(a);
    let nb = crate::linalg::norm2(b);
    if !(na > T::zero()) || !(nb > T::zero()) {
        return Err(Error::Domain("angle of a zero vector".into()));
    }
    // 2 atan2(|â − b̂|, |â + b̂|) equals arccos(â·b̂) but stays accurate near 0°
    let (mut diff, mut sum) = (T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff = diff + (u - v) * (u - v);
        sum = sum + (u + v) * (u + v);
    }
    let theta = T::lit(2.0) * diff.sqrt().atan2(sum.sqrt());
    Ok(theta.to_degrees())
}

/// Squared Frobenius norm of `a − b`.
pub fn matrix_distance<T: Real>(a: &CorrelationMatrix<T>, b: &CorrelationMatrix<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{}x{} vs {}x{}", a.dim(), a.dim(), b.dim(), b.dim())));
    }
    Ok(a.values()
        .as_slice()
        .iter()
        .zip(b.values().as_slice())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum())
}

/// Binned Kullback-Leibler divergence and the number of bins dropped by
/// the skip-zero rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlOutcome<T = f64> {
    pub divergence: T,
    pub masked_bins: usize,
}

/// Probability histogram of the strictly upper-triangular entries over
/// `bins` equal-width bins of `[-1, 1]`; values outside are clamped into the
/// end bins and `1` falls in the last bin.
pub fn correlation_histogram<T: Real>(m: &CorrelationMatrix<T>, bins: usize) -> Vec<T> {
    let entries = m.upper_triangle();
    let mut counts = vec![0usize; bins];
    let k = T::count(bins);
    for x in &entries {
        let pos = ((*x + T::one()) / T::lit(2.0) * k).floor();
        let idx = if pos < T::zero() {
            0
        } else {
            pos.to_usize().unwrap_or(bins).min(bins - 1)
        };
        counts[idx] += 1;
    }
    let total = T::count(entries.len().max(1));
    counts.into_iter().map(|c| T::count(c) / total).collect()
}

pub fn kl_divergence<T: Real>(a: &CorrelationMatrix<T>, b: &CorrelationMatrix<T>, bins: usize) -> Result<KlOutcome<T>> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{}x{} vs {}x{}", a.dim(), a.dim(), b.dim(), b.dim())));
    }
    if a.dim() < 2 {
        return Err(Error::Dimension("histograms need at least two assets".into()));
    }
    if bins < 2 {
        return Err(Error::Domain(format!("bin_count must be at least 2, got {bins}")));
    }
    let p = correlation_histogram(a, bins);
    let q = correlation_histogram(b, bins);
    let mut d = T::zero();
    let mut masked_bins = 0;
    for (&pi, &qi) in p.iter().zip(&q) {
        if pi > T::zero() && qi > T::zero() {
            d = d + pi * (pi / qi).ln();
        } else if pi > T::zero() || qi > T::zero() {
            masked_bins += 1;
        }
    }
    Ok(KlOutcome {
        divergence: d,
        masked_bins,
    })
}

/// `Σ Pᵢ ln(Pᵢ/Qᵢ)` over bins where both are non-zero.
pub fn kl_distance<T: Real>(a: &CorrelationMatrix<T>, b: &CorrelationMatrix<T>, bin_count: usize) -> Result<T> {
    Ok(kl_divergence(a, b, bin_count)?.divergence)
}

/// Assembles the five metrics.
pub fn compare<T: Real>(
    pred_frontier: &Frontier<T>,
    real_frontier: &Frontier<T>,
    pred_corr: &CorrelationMatrix<T>,
    real_corr: &CorrelationMatrix<T>,
    config: &MethodConfig<T>,
) -> Result<ComparisonReport<T>> {
    config.validate()?;
    if pred_corr.tickers() != real_corr.tickers() || pred_frontier.tickers != real_frontier.tickers {
        return Err(Error::TickerMismatch);
    }
    let (p, r) = paired_risks(pred_frontier, real_frontier)?;
    let mut notes = Vec::new();
    if pred_frontier.grid.is_empty() {
        notes.push("empty return grid: no asset has a positive mean return".to_string());
    }
    let mut keep = |res: Result<T>, name: &str| match res {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            None
        }
    };
    let ag = keep(agreement_of(&p, &r), "ag");
    let mse = keep(mean_squared_error_of(&p, &r), "mse");
    let angle_deg = keep(risk_angle_of(&p, &r), "angle");
    let infeasible = pred_frontier.len() - p.len();
    if infeasible > 0 {
        notes.push(format!("{infeasible} grid points excluded as infeasible"));
    }
    let dist = matrix_distance(pred_corr, real_corr)?;
    let kl = kl_divergence(pred_corr, real_corr, config.bin_count)?;
    if kl.masked_bins > 0 {
        notes.push(format!("{} histogram bins skipped by the zero rule", kl.masked_bins));
    }
    let kl_negative = kl.divergence < T::zero();
    if kl_negative {
        notes.push("negative Kullback-Leibler value".into());
    }
    Ok(ComparisonReport {
        label: config.label(),
        method: *config,
        tickers: pred_corr.tickers().to_vec(),
        ag,
        mse,
        angle_deg,
        dist,
        d_kl: kl.divergence,
        n_points: p.len(),
        grid_size: pred_frontier.len(),
        bin_count: config.bin_count,
        kl_masked_bins: kl.masked_bins,
        kl_negative,
        notes,
    })
}
