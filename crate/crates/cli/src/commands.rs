//! One function per subcommand. Each reads its inputs through the run so
//! their digests reach the manifest.

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde_json::json;

use rmtfolio::markowitz::{gmv, side_model};
use rmtfolio::metrics::{ComparisonReport, MethodConfig};
use rmtfolio::pipeline::{ibovespa_style_volatility, run_rolling, run_year_pair, SpectrumSummary, WindowSpec};
use rmtfolio::rmt::{
    clean as clean_spectrum, decompose, ks_one_sample, ks_two_sample, mp_sample, pearson_correlation, pool, qq_points,
    shuffle_eigenvalue_sample, CorrelationMatrix, MpParams,
};
use rmtfolio::singleindex::{eigen_market_index, fit_single_index, residual_panel, IndexSeries, RegressionFit};
use rmtfolio::{
    assemble_covariance, filter_fully_liquid, log_returns, parse_prices, trace_frontier, Layout, PriceFormat,
    PricePanel, ReturnPanel,
};

use crate::config::Settings;
use crate::output::Run;

fn load_prices(s: &Settings, run: &mut Run) -> Result<PricePanel<f64>> {
    let bytes = run.read_input(s.input()?)?;
    Ok(parse_prices(bytes.as_slice(), &s.format).with_context(|| format!("parsing {}", s.input().unwrap().display()))?)
}

fn in_range(s: &Settings, prices: &PricePanel<f64>) -> PricePanel<f64> {
    prices.restrict_dates(&(s.from.unwrap_or(NaiveDate::MIN)..=s.to.unwrap_or(NaiveDate::MAX)))
}

/// Log-returns of the fully liquid tickers in the `from`/`to` range.
fn window_returns(s: &Settings, run: &mut Run) -> Result<ReturnPanel<f64>> {
    let prices = in_range(s, &load_prices(s, run)?);
    let liquid = filter_fully_liquid(&prices)?;
    let dropped = prices.n_tickers() - liquid.n_tickers();
    if dropped > 0 {
        run.note(format!("{dropped} tickers dropped by the liquidity filter"));
    }
    Ok(log_returns(&liquid)?)
}

fn load_index(s: &Settings, run: &mut Run, returns: &ReturnPanel<f64>) -> Result<Option<IndexSeries<f64>>> {
    let Some(path) = &s.index else {
        return Ok(None);
    };
    let bytes = run.read_input(path)?;
    Ok(Some(IndexSeries::read_csv(bytes.as_slice())?.align_to(returns)?))
}

fn eigen_index(returns: &ReturnPanel<f64>) -> Result<IndexSeries<f64>> {
    let params = MpParams::from_shape(returns.len(), returns.n_assets())?;
    Ok(eigen_market_index(returns, &decompose(&pearson_correlation(returns)?, &params)?)?)
}

fn regression(returns: &ReturnPanel<f64>, index: &IndexSeries<f64>) -> Result<(ReturnPanel<f64>, RegressionFit<f64>)> {
    let fit = fit_single_index(returns, index)?;
    Ok((residual_panel(&fit)?, fit))
}

fn span(returns: &ReturnPanel<f64>) -> String {
    let d = returns.dates();
    format!("{}..{}", d[0], d[d.len() - 1])
}

fn slug(m: &MethodConfig<f64>) -> &'static str {
    match (m.cleaning, m.regression) {
        (false, false) => "raw",
        (true, false) => "clean",
        (false, true) => "regress",
        (true, true) => "clean-regress",
    }
}

fn write_matrix(run: &mut Run, name: &str, c: &CorrelationMatrix<f64>) -> Result<()> {
    let mut header = vec!["ticker"];
    header.extend(c.tickers().iter().map(String::as_str));
    let rows = (0..c.dim()).map(|i| {
        let mut r = vec![c.tickers()[i].clone()];
        r.extend((0..c.dim()).map(|j| c.get(i, j).to_string()));
        r
    });
    run.write_csv(name, &header, rows)
}

fn write_returns(run: &mut Run, name: &str, r: &ReturnPanel<f64>) -> Result<()> {
    let mut header = vec!["date"];
    header.extend(r.tickers().iter().map(String::as_str));
    let rows = (0..r.len()).map(|t| {
        let mut row = vec![r.dates()[t].to_string()];
        row.extend(r.returns().row(t).iter().map(f64::to_string));
        row
    });
    run.write_csv(name, &header, rows)
}

fn write_prices(run: &mut Run, name: &str, p: &PricePanel<f64>) -> Result<()> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf, &PriceFormat::new(Layout::Wide))?;
    run.write(name, &buf)
}

fn write_density(run: &mut Run, params: &MpParams<f64>, top: f64) -> Result<()> {
    let n = 400;
    let hi = top.max(params.bounds().1) * 1.05;
    let rows = (0..=n).map(|k| {
        let x = hi * k as f64 / n as f64;
        [x.to_string(), params.density(x).to_string()]
    });
    run.write_csv("mp_density.csv", &["lambda", "density"], rows)
}

fn write_qq(run: &mut Run, sample: &[f64], params: &MpParams<f64>) -> Result<()> {
    let pts = qq_points(sample, params)?;
    run.write_csv("qq.csv", &["reference", "sample"], pts.iter().map(|(x, y)| [x.to_string(), y.to_string()]))
}

pub fn ingest(s: &Settings, run: &mut Run) -> Result<()> {
    let prices = in_range(s, &load_prices(s, run)?);
    write_prices(run, "prices.csv", &prices)?;
    let liquid = filter_fully_liquid(&prices)?;
    write_prices(run, "liquid.csv", &liquid)?;
    let returns = log_returns(&liquid)?;
    write_returns(run, "returns.csv", &returns)?;
    let dropped: Vec<&String> = prices.tickers().iter().filter(|t| !liquid.tickers().contains(t)).collect();
    run.write_json(
        "summary.json",
        &json!({
            "dates": prices.n_dates(),
            "first_date": prices.dates().first().map(|d| d.to_string()),
            "last_date": prices.dates().last().map(|d| d.to_string()),
            "tickers": prices.n_tickers(),
            "liquid_tickers": liquid.n_tickers(),
            "dropped": dropped,
            "observations": returns.len(),
            "q": returns.q(),
        }),
    )
}

pub fn spectrum(s: &Settings, run: &mut Run) -> Result<()> {
    let mut returns = window_returns(s, run)?;
    if s.regress {
        let index = match load_index(s, run, &returns)? {
            Some(i) => i,
            None => eigen_index(&returns)?,
        };
        returns = regression(&returns, &index)?.0;
        run.note("spectrum of single-index regression residuals");
    }
    let params = MpParams::from_shape(returns.len(), returns.n_assets())?;
    let d = decompose(&pearson_correlation(&returns)?, &params)?;
    let ev = d.eigenvalues();
    run.write_csv(
        "eigenvalues.csv",
        &["rank", "eigenvalue", "band"],
        ev.iter().zip(d.bands()).enumerate().map(|(k, (l, b))| [(k + 1).to_string(), l.to_string(), format!("{b:?}")]),
    )?;
    let top = d.dim().min(2);
    let mut header = vec!["ticker".to_string()];
    header.extend((1..=top).map(|k| format!("e{k}")));
    let vectors: Vec<Vec<f64>> = (0..top).map(|k| d.eigenvector(k)).collect();
    run.write_csv(
        "eigenvectors.csv",
        &header.iter().map(String::as_str).collect::<Vec<_>>(),
        returns.tickers().iter().enumerate().map(|(i, t)| {
            let mut r = vec![t.clone()];
            r.extend(vectors.iter().map(|v| v[i].to_string()));
            r
        }),
    )?;
    write_density(run, &params, ev[0])?;
    write_qq(run, ev, &params)?;
    run.write_json("ks.json", &ks_one_sample(ev, &params)?)?;
    let summary = rmtfolio::pipeline::spectrum_summary(&span(&returns), &returns)?;
    run.write_csv("summary.csv", &SpectrumSummary::<f64>::CSV_HEADER, [summary.csv_record()])
}

pub fn clean(s: &Settings, run: &mut Run) -> Result<()> {
    let mut returns = window_returns(s, run)?;
    let mut source = "returns";
    if s.regress {
        let index = match load_index(s, run, &returns)? {
            Some(i) => i,
            None => eigen_index(&returns)?,
        };
        returns = regression(&returns, &index)?.0;
        source = "residuals";
    }
    let params = MpParams::from_shape(returns.len(), returns.n_assets())?;
    let raw = pearson_correlation(&returns)?;
    let d = decompose(&raw, &params)?;
    let cleaned = clean_spectrum(&d)?;
    write_matrix(run, "correlation.csv", &raw)?;
    write_matrix(run, "cleaned.csv", &cleaned)?;
    let (lo, hi) = params.bounds();
    run.write_json(
        "diagnostics.json",
        &json!({
            "source": source,
            "q": params.q(),
            "lambda_minus": lo,
            "lambda_plus": hi,
            "lambda_bar": d.mean_noise()?,
            "noise_eigenvalues": d.count(rmtfolio::rmt::Band::Noise),
            "trace": cleaned.values().trace(),
            "max_diagonal_deviation": cleaned.diagonal_deviation(),
        }),
    )
}

pub fn residuals(s: &Settings, run: &mut Run) -> Result<()> {
    let returns = window_returns(s, run)?;
    let index = match load_index(s, run, &returns)? {
        Some(i) => i,
        None => eigen_index(&returns)?,
    };
    let (resid, fit) = regression(&returns, &index)?;
    run.write_csv(
        "coefficients.csv",
        &["ticker", "intercept", "slope"],
        fit.tickers()
            .iter()
            .zip(fit.intercepts.iter().zip(&fit.slopes))
            .map(|(t, (a, b))| [t.clone(), a.to_string(), b.to_string()]),
    )?;
    write_returns(run, "residuals.csv", &resid)?;
    run.write_csv(
        "index.csv",
        &["date", "return"],
        index.dates.iter().zip(&index.values).map(|(d, v)| [d.to_string(), v.to_string()]),
    )?;
    run.write_json("diagnostics.json", &json!({ "index_source": format!("{:?}", index.source) }))
}

pub fn frontier(s: &Settings, run: &mut Run) -> Result<()> {
    let returns = window_returns(s, run)?;
    let method = s.base_method();
    method.validate()?;
    let side = side_model(&returns, &method)?;
    let cov = assemble_covariance(&side.correlation, &side.basis.std_devs())?.with_source(side.source);
    let means = returns.means();
    let f = trace_frontier(&cov, &means, &method.bounds, method.grid_size)?;
    let mut buf = Vec::new();
    f.write_csv(&mut buf)?;
    run.write("frontier.csv", &buf)?;
    let g = gmv(&cov, &means, &method.bounds)?;
    run.write_json(
        "summary.json",
        &json!({
            "method": method.label(),
            "correlation": side.source.label(),
            "window": span(&returns),
            "tickers": returns.tickers(),
            "grid_points": f.len(),
            "feasible_points": f.feasible_count(),
            "gmv_return": g.target_return,
            "gmv_risk": g.risk,
            "psd_repaired": cov.repaired,
        }),
    )
}

fn write_reports(run: &mut Run, window: &str, reports: &[ComparisonReport<f64>]) -> Result<Vec<Vec<String>>> {
    for r in reports {
        run.write(&format!("reports/{}.json", slug(&r.method)), format!("{}\n", r.to_json()?).as_bytes())?;
    }
    Ok(reports.iter().map(|r| r.csv_record(window)).collect())
}

const ENVELOPE_HEADER: [&str; 6] = ["window", "method", "min_predicted", "max_predicted", "min_realized", "max_realized"];

fn envelope_row(window: &str, label: &str, e: Option<rmtfolio::RiskEnvelope<f64>>) -> Vec<String> {
    let mut row = vec![window.to_string(), label.to_string()];
    match e {
        Some(e) => row.extend([e.min_predicted, e.max_predicted, e.min_realized, e.max_realized].map(|v| v.to_string())),
        None => row.extend(std::iter::repeat_n(String::new(), 4)),
    }
    row
}

pub fn pair(s: &Settings, run: &mut Run) -> Result<()> {
    let (Some(prev), Some(target)) = (s.previous.clone(), s.target.clone()) else {
        bail!("pair needs --previous FROM:TO and --target FROM:TO");
    };
    let methods = s.methods()?;
    let prices = load_prices(s, run)?;
    let out = run_year_pair(&prices, prev.clone(), target.clone(), &methods)?;
    let window = format!("{}..{}->{}..{}", prev.start(), prev.end(), target.start(), target.end());
    let reports = out.reports();
    let rows = write_reports(run, &window, &reports)?;
    run.write_csv("reports.csv", &ComparisonReport::<f64>::CSV_HEADER, rows)?;
    for r in &out.runs {
        for (side, f) in [("predicted", &r.predicted), ("realized", &r.realized)] {
            let mut buf = Vec::new();
            f.write_csv(&mut buf)?;
            run.write(&format!("frontiers/{}-{side}.csv", slug(&r.report.method)), &buf)?;
        }
    }
    run.write_csv(
        "envelopes.csv",
        &ENVELOPE_HEADER,
        out.runs.iter().map(|r| envelope_row(&window, &r.report.label, r.envelope)),
    )?;
    run.write_csv(
        "spectra.csv",
        &SpectrumSummary::<f64>::CSV_HEADER,
        [out.previous.csv_record(), out.target.csv_record()],
    )?;
    run.write_csv("universe.csv", &["ticker"], out.tickers.iter().map(|t| [t]))
}

pub fn rolling(s: &Settings, run: &mut Run) -> Result<()> {
    let methods = s.methods()?;
    let spec = WindowSpec::rolling(s.window, s.step)?;
    let prices = in_range(s, &load_prices(s, run)?);
    let out = run_rolling(&prices, &spec, &methods)?;
    run.note(out.assumption.clone());
    run.write_csv(
        "windows.csv",
        &["window", "estimation_start", "estimation_end", "evaluation_start", "evaluation_end", "q"],
        out.windows.iter().map(|w| {
            [
                w.index.to_string(),
                w.estimation.0.to_string(),
                w.estimation.1.to_string(),
                w.evaluation.0.to_string(),
                w.evaluation.1.to_string(),
                w.q.to_string(),
            ]
        }),
    )?;
    let mut rows = Vec::new();
    let mut envelopes = Vec::new();
    for w in &out.windows {
        let id = w.index.to_string();
        rows.extend(w.reports.iter().map(|r| r.csv_record(&id)));
        envelopes.extend(w.reports.iter().zip(&w.envelopes).map(|(r, e)| envelope_row(&id, &r.label, *e)));
    }
    run.write_csv("reports.csv", &ComparisonReport::<f64>::CSV_HEADER, rows)?;
    run.write_csv("envelopes.csv", &ENVELOPE_HEADER, envelopes)?;
    run.write_csv("universe.csv", &["ticker"], out.tickers.iter().map(|t| [t]))?;
    if s.index.is_some() {
        let returns = log_returns(&filter_fully_liquid(&prices)?)?;
        let index = load_index(s, run, &returns)?.expect("index path set");
        let vol = ibovespa_style_volatility(&index, &spec)?;
        run.write_csv(
            "volatility.csv",
            &["window", "start", "end", "volatility"],
            vol.iter().enumerate().map(|(i, v)| {
                let a = i * spec.step;
                [
                    i.to_string(),
                    index.dates[a].to_string(),
                    index.dates[a + spec.window_length - 1].to_string(),
                    v.to_string(),
                ]
            }),
        )?;
    }
    Ok(())
}

pub fn simulate(s: &Settings, run: &mut Run) -> Result<()> {
    let returns = window_returns(s, run)?;
    let params = MpParams::from_shape(returns.len(), returns.n_assets())?;
    let samples = shuffle_eigenvalue_sample(&returns, s.sims, s.seed)?;
    run.write_csv(
        "eigenvalues.csv",
        &["simulation", "eigenvalue"],
        samples.iter().enumerate().flat_map(|(k, v)| v.iter().map(move |x| [k.to_string(), x.to_string()])),
    )?;
    let pooled = pool(&samples);
    let reference = mp_sample(&params, pooled.len(), s.seed)?;
    run.write_json("ks_one.json", &ks_one_sample(&pooled, &params)?)?;
    run.write_json("ks_two.json", &ks_two_sample(&pooled, &reference)?)?;
    write_qq(run, &pooled, &params)?;
    let top = pooled.iter().copied().fold(0.0, f64::max);
    write_density(run, &params, top)?;
    let (lo, hi) = params.bounds();
    let inside = pooled.iter().filter(|&&x| x >= lo && x <= hi).count();
    run.write_json(
        "summary.json",
        &json!({
            "simulations": s.sims,
            "seed": s.seed,
            "eigenvalues": pooled.len(),
            "q": params.q(),
            "lambda_minus": lo,
            "lambda_plus": hi,
            "in_band_fraction": inside as f64 / pooled.len() as f64,
        }),
    )
}
