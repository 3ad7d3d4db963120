//! Price ingestion, liquidity filtering and log-return panels.
//!
//! Two CSV layouts are understood:
//!
//! * long form, header `date,ticker,close`, one observation per row;
//! * wide form, header `date,<ticker1>,<ticker2>,...`, one date per row.
//!
//! Dates are ISO-8601 (`YYYY-MM-DD`). A cell is missing when it is empty or
//! equals the configured sentinel token. Dates on which the market was closed
//! are simply absent; nothing is ever imputed.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::ops::RangeInclusive;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// On-disk price file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    #[default]
    Long,
    Wide,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(Layout::Long),
            "wide" => Ok(Layout::Wide),
            other => Err(Error::Domain(format!("unknown layout `{other}`"))),
        }
    }
}

/// How to read a price stream.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PriceFormat {
    pub layout: Layout,
    /// Token marking a missing price in addition to the empty cell.
    pub missing_sentinel: Option<String>,
}

impl PriceFormat {
    pub fn new(layout: Layout) -> Self {
        Self {
            layout,
            missing_sentinel: None,
        }
    }

    fn is_missing(&self, cell: &str) -> bool {
        cell.is_empty() || self.missing_sentinel.as_deref() == Some(cell)
    }
}

/// Daily closing prices, rows = dates, columns = tickers.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel<T = f64> {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: Vec<Option<T>>,
}

impl<T: Real> PricePanel<T> {
    /// Validates and wraps a row-major price buffer.
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: Vec<Option<T>>) -> Result<Self> {
        if prices.len() != dates.len() * tickers.len() {
            return Err(Error::Dimension(format!(
                "{} prices for {} dates x {} tickers",
                prices.len(),
                dates.len(),
                tickers.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        let n = tickers.len();
        for (k, p) in prices.iter().enumerate() {
            if let Some(p) = p {
                if !(*p > T::zero()) || !p.is_finite() {
                    return Err(Error::Parse {
                        line: 0,
                        column: tickers[k % n].clone(),
                        message: format!("non-positive price {p} on {}", dates[k / n]),
                    });
                }
            }
        }
        Ok(Self {
            dates,
            tickers,
            prices,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.prices[row * self.tickers.len() + col]
    }

    pub fn column(&self, col: usize) -> Vec<Option<T>> {
        (0..self.dates.len()).map(|r| self.get(r, col)).collect()
    }

    pub fn is_fully_liquid(&self) -> bool {
        self.prices.iter().all(Option::is_some)
    }

    /// Keeps the rows whose date falls inside `range`.
    pub fn restrict_dates(&self, range: &RangeInclusive<NaiveDate>) -> Self {
        let n = self.tickers.len();
        let mut dates = Vec::new();
        let mut prices = Vec::new();
        for (r, d) in self.dates.iter().enumerate() {
            if range.contains(d) {
                dates.push(*d);
                prices.extend_from_slice(&self.prices[r * n..(r + 1) * n]);
            }
        }
        Self {
            dates,
            tickers: self.tickers.clone(),
            prices,
        }
    }

    /// Keeps the named tickers, in the given order.
    pub fn select_tickers(&self, names: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .tickers
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let cols: Vec<usize> = names
            .iter()
            .map(|t| index.get(t.as_str()).copied().ok_or(Error::TickerMismatch))
            .collect::<Result<_>>()?;
        let mut prices = Vec::with_capacity(self.dates.len() * cols.len());
        for r in 0..self.dates.len() {
            prices.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        Ok(Self {
            dates: self.dates.clone(),
            tickers: names.to_vec(),
            prices,
        })
    }

    /// Writes the panel back out in `format`.
    ///
    /// Numbers use the shortest representation that parses back to the same
    /// binary value, so parse → serialize → parse is lossless.
    pub fn write_csv<W: Write>(&self, out: W, format: &PriceFormat) -> Result<()> {
        let missing = format.missing_sentinel.clone().unwrap_or_default();
        let mut w = csv::WriterBuilder::new().from_writer(out);
        match format.layout {
            Layout::Long => {
                w.write_record(["date", "ticker", "close"])?;
                for (r, d) in self.dates.iter().enumerate() {
                    let date = d.format("%Y-%m-%d").to_string();
                    for (c, t) in self.tickers.iter().enumerate() {
                        let cell = self.get(r, c).map_or(missing.clone(), |p| p.to_string());
                        w.write_record([date.as_str(), t.as_str(), cell.as_str()])?;
                    }
                }
            }
            Layout::Wide => {
                let mut header = vec!["date".to_string()];
                header.extend(self.tickers.iter().cloned());
                w.write_record(&header)?;
                for (r, d) in self.dates.iter().enumerate() {
                    let mut rec = vec![d.format("%Y-%m-%d").to_string()];
                    rec.extend(
                        (0..self.tickers.len())
                            .map(|c| self.get(r, c).map_or(missing.clone(), |p| p.to_string())),
                    );
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_date(cell: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(cell.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        line,
        column: "date".into(),
        message: format!("invalid date `{cell}`: {e}"),
    })
}

fn parse_price<T: Real>(cell: &str, format: &PriceFormat, line: u64, column: &str) -> Result<Option<T>> {
    let cell = cell.trim();
    if format.is_missing(cell) {
        return Ok(None);
    }
    match cell.parse::<T>() {
        Ok(p) if p > T::zero() && p.is_finite() => Ok(Some(p)),
        Ok(p) if p.is_nan() || p.is_infinite() => Err(Error::Parse {
            line,
            column: column.to_string(),
            message: format!("non-finite price `{cell}`"),
        }),
        Ok(_) => Err(Error::Parse {
            line,
            column: column.to_string(),
            message: format!("non-positive price `{cell}`"),
        }),
        Err(_) => Err(Error::Parse {
            line,
            column: column.to_string(),
            message: format!("invalid price `{cell}`"),
        }),
    }
}

/// Reads a price panel from a CSV stream.
pub fn parse_prices<T: Real, R: Read>(source: R, format: &PriceFormat) -> Result<PricePanel<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    match format.layout {
        Layout::Long => parse_long(&mut reader, &header, format),
        Layout::Wide => parse_wide(&mut reader, &header, format),
    }
}

fn parse_long<T: Real, R: Read>(
    reader: &mut csv::Reader<R>,
    header: &[String],
    format: &PriceFormat,
) -> Result<PricePanel<T>> {
    if header != ["date", "ticker", "close"] {
        return Err(Error::Parse {
            line: 1,
            column: String::new(),
            message: format!("expected header `date,ticker,close`, found `{}`", header.join(",")),
        });
    }
    let mut tickers: Vec<String> = Vec::new();
    let mut ticker_index: HashMap<String, usize> = HashMap::new();
    let mut cells: BTreeMap<NaiveDate, HashMap<usize, Option<T>>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let date = parse_date(&rec[0], line)?;
        let ticker = rec[1].trim().to_string();
        if ticker.is_empty() {
            return Err(Error::Parse {
                line,
                column: "ticker".into(),
                message: "empty ticker".into(),
            });
        }
        let col = *ticker_index.entry(ticker.clone()).or_insert_with(|| {
            tickers.push(ticker.clone());
            tickers.len() - 1
        });
        let price = parse_price::<T>(&rec[2], format, line, &ticker)?;
        if cells.entry(date).or_default().insert(col, price).is_some() {
            return Err(Error::Parse {
                line,
                column: ticker,
                message: format!("duplicate observation for {date}"),
            });
        }
    }
    let n = tickers.len();
    let mut dates = Vec::with_capacity(cells.len());
    let mut prices = Vec::with_capacity(cells.len() * n);
    for (d, row) in cells {
        dates.push(d);
        prices.extend((0..n).map(|c| row.get(&c).copied().flatten()));
    }
    PricePanel::new(dates, tickers, prices)
}

fn parse_wide<T: Real, R: Read>(
    reader: &mut csv::Reader<R>,
    header: &[String],
    format: &PriceFormat,
) -> Result<PricePanel<T>> {
    if header.first().map(String::as_str) != Some("date") || header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            column: String::new(),
            message: "expected header `date,<ticker>,...`".into(),
        });
    }
    let tickers: Vec<String> = header[1..].to_vec();
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = tickers.iter().find(|t| !seen.insert(t.as_str())) {
        return Err(Error::Parse {
            line: 1,
            column: dup.clone(),
            message: "duplicate ticker column".into(),
        });
    }
    let mut rows: BTreeMap<NaiveDate, Vec<Option<T>>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let date = parse_date(&rec[0], line)?;
        let row = tickers
            .iter()
            .enumerate()
            .map(|(c, t)| parse_price::<T>(&rec[c + 1], format, line, t))
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(date, row).is_some() {
            return Err(Error::Parse {
                line,
                column: "date".into(),
                message: format!("duplicate observation for {date}"),
            });
        }
    }
    let dates: Vec<NaiveDate> = rows.keys().copied().collect();
    let prices = rows.into_values().flatten().collect();
    PricePanel::new(dates, tickers, prices)
}

/// Drops every ticker with at least one missing price.
pub fn filter_fully_liquid<T: Real>(panel: &PricePanel<T>) -> Result<PricePanel<T>> {
    let keep: Vec<String> = panel
        .tickers
        .iter()
        .enumerate()
        .filter(|(c, _)| (0..panel.n_dates()).all(|r| panel.get(r, *c).is_some()))
        .map(|(_, t)| t.clone())
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyUniverse);
    }
    panel.select_tickers(&keep)
}

/// Log-returns, `L` rows by `N` assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ReturnPanel<T = f64> {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: Matrix<T>,
}

impl<T: Real> ReturnPanel<T> {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, returns: Matrix<T>) -> Result<Self> {
        if returns.rows() != dates.len() || returns.cols() != tickers.len() {
            return Err(Error::Dimension(format!(
                "{}x{} returns for {} dates and {} tickers",
                returns.rows(),
                returns.cols(),
                dates.len(),
                tickers.len()
            )));
        }
        if let Some(k) = returns.as_slice().iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite return for ticker {} on row {}",
                tickers[k % tickers.len()],
                k / tickers.len()
            )));
        }
        Ok(Self {
            dates,
            tickers,
            returns,
        })
    }

    /// Panel with synthetic sequential dates, handy for generated data.
    pub fn from_matrix(returns: Matrix<T>) -> Result<Self> {
        let base = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = (0..returns.rows())
            .map(|i| base + chrono::Days::new(i as u64))
            .collect();
        let tickers = (0..returns.cols()).map(|i| format!("A{:03}", i + 1)).collect();
        Self::new(dates, tickers, returns)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn returns(&self) -> &Matrix<T> {
        &self.returns
    }

    /// Number of observations `L`.
    pub fn len(&self) -> usize {
        self.returns.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of assets `N`.
    pub fn n_assets(&self) -> usize {
        self.returns.cols()
    }

    /// Aspect ratio `Q = L / N`.
    pub fn q(&self) -> T {
        T::count(self.len()) / T::count(self.n_assets())
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.returns.column(j)
    }

    pub fn means(&self) -> Vec<T> {
        let l = T::count(self.len());
        (0..self.n_assets())
            .map(|j| self.column(j).into_iter().sum::<T>() / l)
            .collect()
    }

    /// Sample standard deviations (`L - 1` normalization).
    pub fn std_devs(&self) -> Vec<T> {
        (0..self.n_assets()).map(|j| sample_std(&self.column(j))).collect()
    }

    /// Rows `range` as a new panel.
    pub fn rows(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::InsufficientData(format!(
                "rows {range:?} out of {} observations",
                self.len()
            )));
        }
        let n = self.n_assets();
        let data = self.returns.as_slice()[range.start * n..range.end * n].to_vec();
        Ok(Self {
            dates: self.dates[range.clone()].to_vec(),
            tickers: self.tickers.clone(),
            returns: Matrix::from_vec(range.len(), n, data)?,
        })
    }

    /// Replaces the return matrix, keeping labels.
    pub fn with_returns(&self, returns: Matrix<T>) -> Result<Self> {
        Self::new(self.dates.clone(), self.tickers.clone(), returns)
    }
}

/// Sample standard deviation with two-pass mean removal.
pub fn sample_std<T: Real>(xs: &[T]) -> T {
    let n = xs.len();
    if n < 2 {
        return T::zero();
    }
    // shifted by the first value so a constant series gives exactly zero
    let d: Vec<T> = xs.iter().map(|&x| x - xs[0]).collect();
    let mean = d.iter().copied().sum::<T>() / T::count(n);
    let ss: T = d.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (ss / T::count(n - 1)).sqrt()
}

/// `R_t = ln P_t - ln P_{t-1}` for every ticker.
pub fn log_returns<T: Real>(panel: &PricePanel<T>) -> Result<ReturnPanel<T>> {
    let n = panel.n_tickers();
    for c in 0..n {
        if let Some(r) = (0..panel.n_dates()).find(|&r| panel.get(r, c).is_none()) {
            return Err(Error::MissingData {
                ticker: panel.tickers[c].clone(),
                row: r,
            });
        }
    }
    if panel.n_dates() < 2 {
        return Err(Error::InsufficientData("log-returns need at least two dates".into()));
    }
    let l = panel.n_dates() - 1;
    let returns = Matrix::from_fn(l, n, |t, i| {
        let now = panel.get(t + 1, i).expect("checked liquid");
        let before = panel.get(t, i).expect("checked liquid");
        now.ln() - before.ln()
    });
    ReturnPanel::new(panel.dates[1..].to_vec(), panel.tickers.clone(), returns)
}
