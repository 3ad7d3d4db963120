//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p rmtfolio --test acceptance -- --nocapture` to see the lines.

mod common;

use std::time::{Duration, Instant};

use common::{attainable, grid_oracle, normal_panel, random_psd, uniform};
use rand::Rng;
use rmtfolio::linalg::Matrix;
use rmtfolio::markowitz::{gmv, minimize_variance, prepare_pair, trace_frontier, CovarianceAssembly, Frontier};
use rmtfolio::metrics::{
    agreement, compare, matrix_distance, mean_squared_error, risk_angle, MethodConfig,
};
use rmtfolio::pipeline::{run_rolling, WindowSpec};
use rmtfolio::rmt::{
    clean, decompose, ks_one_sample, pearson_correlation, pool, shuffle_eigenvalue_sample, Band, CorrelationMatrix,
    MpParams,
};
use rmtfolio::singleindex::{eigen_market_index, fit_single_index, IndexSeries, IndexSource};
use rmtfolio::synthetic::SyntheticMarket;
use rmtfolio::{rng, WeightBounds};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mp_bounds() -> Outcome {
    let (a_lo, a_hi) = MpParams::<f64>::standard(4.0).unwrap().bounds();
    let (b_lo, b_hi) = MpParams::<f64>::standard(248.0 / 61.0).unwrap().bounds();
    let exact = (a_lo - 0.25).abs() < 1e-12 && (a_hi - 2.25).abs() < 1e-12;
    let three = |x: f64| (x * 1e3).round() / 1e3;
    let rounded = three(b_lo) == 0.254 && three(b_hi) == 2.238;
    outcome(exact && rounded, format!("Q=4 -> ({a_lo}, {a_hi}); Q=248/61 -> ({b_lo:.4}, {b_hi:.4})"))
}

// ∫ρ over [x, λ₊] through λ = m + h cos θ, trapezoid rule in θ
fn upper_mass(p: &MpParams<f64>, x: f64) -> f64 {
    let (lo, hi) = p.bounds();
    let (m, h) = ((hi + lo) / 2.0, (hi - lo) / 2.0);
    let top = ((x.clamp(lo, hi) - m) / h).clamp(-1.0, 1.0).acos();
    let n = 20_000;
    let f = |t: f64| p.q() * h * h * t.sin().powi(2) / (2.0 * std::f64::consts::PI * p.sigma2() * (m + h * t.cos()));
    let step = top / n as f64;
    let inner: f64 = (1..n).map(|k| f(k as f64 * step)).sum();
    (inner + 0.5 * (f(0.0) + f(top))) * step
}

fn mp_normalization() -> Outcome {
    let mut worst_mass: f64 = 0.0;
    let mut worst_trip: f64 = 0.0;
    for q in [1.1, 2.0, 4.0, 10.0] {
        let p = MpParams::<f64>::standard(q).unwrap();
        let (lo, hi) = p.bounds();
        worst_mass = worst_mass.max((upper_mass(&p, lo) - 1.0).abs()).max((p.cdf(hi) - 1.0).abs());
        for k in 1..100 {
            let x = lo + (hi - lo) * k as f64 / 100.0;
            worst_trip = worst_trip.max((p.quantile(p.cdf(x)).unwrap() - x).abs());
        }
    }
    outcome(
        worst_mass < 1e-6 && worst_trip < 1e-6,
        format!("max |mass - 1| = {worst_mass:.1e}, max round-trip error = {worst_trip:.1e}"),
    )
}

fn cleaning_invariants() -> Outcome {
    let mut g = rng::named(2024, "acceptance-cleaning");
    let params = MpParams::from_shape(100, 20).unwrap();
    let (mut trace_err, mut idem_err, mut kept_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let corr = pearson_correlation(&normal_panel(&mut g, 100, 20)).unwrap();
        let d = decompose(&corr, &params).unwrap();
        let c = clean(&d).unwrap();
        trace_err = trace_err.max((c.values().trace() - 20.0).abs());
        let dc = decompose(&c, &params).unwrap();
        idem_err = idem_err.max(clean(&dc).unwrap().values().max_abs_diff(c.values()));
        let outside = |x: &rmtfolio::rmt::SpectralDecomposition<f64>| -> Vec<f64> {
            x.eigenvalues().iter().zip(x.bands()).filter(|(_, b)| **b != Band::Noise).map(|(l, _)| *l).collect()
        };
        let before = outside(&d);
        // the cleaned spectrum holds the outside eigenvalues plus copies of λ̄
        let lbar = d.mean_noise().unwrap();
        let mut after: Vec<f64> = dc.eigenvalues().to_vec();
        for _ in 0..d.count(Band::Noise) {
            let k = (0..after.len())
                .min_by(|&a, &b| (after[a] - lbar).abs().partial_cmp(&(after[b] - lbar).abs()).unwrap())
                .unwrap();
            after.remove(k);
        }
        for (x, y) in before.iter().zip(&after) {
            kept_err = kept_err.max((x - y).abs());
        }
        if before.len() != after.len() {
            kept_err = f64::INFINITY;
        }
    }
    outcome(
        trace_err < 1e-8 && idem_err < 1e-8 && kept_err < 1e-8,
        format!("trace {trace_err:.1e}, idempotence {idem_err:.1e}, outside-band eigenvalues {kept_err:.1e}"),
    )
}

fn shuffle_baseline() -> Outcome {
    let mut g = rng::named(7, "acceptance-shuffle-panel");
    let panel = normal_panel(&mut g, 200, 20);
    let params = MpParams::from_shape(200, 20).unwrap();
    let (lo, hi) = params.bounds();
    let pooled = pool(&shuffle_eigenvalue_sample(&panel, 1000, 11).unwrap());
    let inside = pooled.iter().filter(|&&x| x >= lo && x <= hi).count() as f64 / pooled.len() as f64;
    // one run: shuffle the panel once and test its 20 eigenvalues against the law
    let runs = shuffle_eigenvalue_sample(&panel, 100, 12).unwrap();
    let accepted = runs.iter().filter(|s| !ks_one_sample(s, &params).unwrap().rejects_at(0.01)).count();
    outcome(
        inside >= 0.98 && accepted >= 97,
        format!("in-band fraction {inside:.4} over {} eigenvalues; KS not rejected at 1% in {accepted}/100 runs", pooled.len()),
    )
}

fn qp_correctness() -> Outcome {
    let mut g = rng::named(5, "acceptance-qp");
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for trial in 0..100 {
        let n = 2 + trial % 2;
        for b in [WeightBounds::no_short(), WeightBounds::short_allowed()] {
            let h = random_psd(&mut g, n, n);
            let means: Vec<f64> = (0..n).map(|_| uniform(&mut g, -0.01, 0.03)).collect();
            let (lo, hi) = attainable(&means, &b);
            let t = uniform(&mut g, lo, hi);
            let sol = minimize_variance(&h, &means, Some(t), &b).unwrap();
            let oracle = grid_oracle(&h, &means, t, &b, 1e-3).unwrap();
            worst = worst.max((sol.variance - oracle).abs());
            checked += 1;
        }
    }
    let cov = CovarianceAssembly::from_matrix(Matrix::<f64>::from_diagonal(&[1.0, 4.0])).unwrap();
    let w = gmv(&cov, &[0.01, 0.02], &WeightBounds::no_short()).unwrap().weights;
    let closed = (w[0] - 0.8).abs() < 1e-6 && (w[1] - 0.2).abs() < 1e-6;
    outcome(
        worst < 1e-4 && closed,
        format!("{checked} instances, max |risk - grid| = {worst:.1e}; diag(1,4) weights ({:.8}, {:.8})", w[0], w[1]),
    )
}

fn check_frontier(f: &Frontier<f64>, means: &[f64], b: &WeightBounds<f64>) -> (f64, f64, f64, f64) {
    let (mut budget, mut ret, mut bound, mut drop) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut last: Option<f64> = None;
    for p in f.points.iter().flatten() {
        budget = budget.max((p.weights.iter().sum::<f64>() - 1.0).abs());
        let r: f64 = p.weights.iter().zip(means).map(|(w, m)| w * m).sum();
        ret = ret.max((r - p.target_return).abs());
        for &w in &p.weights {
            bound = bound.max(b.lower - w).max(w - b.upper);
        }
        if let Some(prev) = last {
            drop = drop.max(prev - p.risk);
        }
        last = Some(p.risk);
    }
    (budget, ret, bound, drop)
}

fn frontier_shape() -> Outcome {
    let mut g = rng::named(6, "acceptance-frontier");
    let mut worst = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut frontiers = 0;
    let mut fold = |w: (f64, f64, f64, f64)| {
        worst = (worst.0.max(w.0), worst.1.max(w.1), worst.2.max(w.2), worst.3.max(w.3));
        frontiers += 1;
    };
    for trial in 0..20 {
        let n = 4 + trial;
        let rank = if trial % 4 == 0 { n / 2 } else { n };
        let cov = CovarianceAssembly::from_matrix(random_psd(&mut g, n, rank).scale(1e-4)).unwrap();
        let means: Vec<f64> = (0..n).map(|_| uniform(&mut g, -0.002, 0.004)).collect();
        for b in [WeightBounds::no_short(), WeightBounds::short_allowed()] {
            let f = trace_frontier(&cov, &means, &b, 100).unwrap();
            fold(check_frontier(&f, &means, &b));
        }
    }
    let r = SyntheticMarket::<f64>::new(25, 500, 8).returns().unwrap();
    let (prev, target) = (r.rows(0..250).unwrap(), r.rows(250..500).unwrap());
    for b in [WeightBounds::no_short(), WeightBounds::short_allowed()] {
        for m in MethodConfig::matrix(&MethodConfig::new(false, false, b)) {
            let s = prepare_pair(&prev, &target, &m).unwrap();
            fold(check_frontier(&s.predicted, &s.means, &b));
            fold(check_frontier(&s.realized, &s.means, &b));
        }
    }
    let (budget, ret, bound, drop) = worst;
    outcome(
        budget <= 1e-8 && ret <= 1e-8 && bound <= 1e-10 && drop <= 1e-9,
        format!(
            "{frontiers} frontiers: budget {budget:.1e}, return {ret:.1e}, bounds {bound:.1e}, largest risk decrease {drop:.1e}"
        ),
    )
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn regression_invariants() -> Outcome {
    let (mut c_err, mut rec_err, mut slope_err, mut res_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..5 {
        let r = SyntheticMarket::<f64>::new(30, 250, 100 + seed).returns().unwrap();
        let d = decompose(&pearson_correlation(&r).unwrap(), &MpParams::from_shape(250, 30).unwrap()).unwrap();
        let idx = eigen_market_index(&r, &d).unwrap();
        let fit = fit_single_index(&r, &idx).unwrap();
        for j in 0..30 {
            let e = fit.residuals.column(j);
            c_err = c_err.max(corr(&e, &idx.values).abs());
            for t in 0..250 {
                let back = fit.intercepts[j] + fit.slopes[j] * idx.values[t] + e[t];
                rec_err = rec_err.max((back - r.returns()[(t, j)]).abs());
            }
        }
        for c in [0.1, 7.0, -2.0] {
            let scaled =
                IndexSeries::new(idx.dates.clone(), idx.values.iter().map(|v| v * c).collect(), IndexSource::External)
                    .unwrap();
            let f2 = fit_single_index(&r, &scaled).unwrap();
            for j in 0..30 {
                let want = fit.slopes[j] / c;
                slope_err = slope_err.max((f2.slopes[j] - want).abs() / want.abs().max(1.0));
            }
            res_err = res_err.max(f2.residuals.max_abs_diff(&fit.residuals));
        }
    }
    outcome(
        c_err < 1e-8 && rec_err < 1e-12 && slope_err < 1e-10 && res_err < 1e-10,
        format!(
            "corr(E, I) {c_err:.1e}, reconstruction {rec_err:.1e}, slope b/c {slope_err:.1e}, residual change {res_err:.1e}"
        ),
    )
}

fn random_corr(g: &mut rand_chacha::ChaCha8Rng, n: usize) -> CorrelationMatrix<f64> {
    let l = n + 5 + (g.random::<u32>() % 30) as usize;
    pearson_correlation(&normal_panel(g, l, n)).unwrap()
}

fn frontier_of(risks: &[f64]) -> Frontier<f64> {
    let grid: Vec<f64> = (0..risks.len()).map(|i| 1e-4 * (i + 1) as f64).collect();
    Frontier {
        tickers: vec!["A".into(), "B".into()],
        points: risks
            .iter()
            .zip(&grid)
            .map(|(&risk, &target_return)| {
                Some(rmtfolio::FrontierPoint {
                    target_return,
                    risk,
                    weights: vec![0.5, 0.5],
                    kkt_residual: 0.0,
                })
            })
            .collect(),
        grid,
    }
}

fn metric_identities() -> Outcome {
    let mut g = rng::named(8, "acceptance-metrics");
    let risks: Vec<f64> = (0..100).map(|i| 1e-4 * (1.0 + 0.02 * i as f64).powi(2)).collect();
    let f = frontier_of(&risks);
    let c = random_corr(&mut g, 10);
    let rep = compare(&f, &f, &c, &c, &MethodConfig::default()).unwrap();
    let zeros = rep.ag == Some(0.0) && rep.mse == Some(0.0) && rep.angle_deg == Some(0.0) && rep.dist == 0.0 && rep.d_kl == 0.0;

    let gap = 2.5e-5;
    let shifted: Vec<f64> = risks.iter().map(|r| r + gap).collect();
    let fs = frontier_of(&shifted);
    let n = risks.len() as f64;
    let ag = risks.iter().map(|r| gap / r).sum::<f64>() / n;
    let dot: f64 = risks.iter().zip(&shifted).map(|(a, b)| a * b).sum();
    let na: f64 = risks.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = shifted.iter().map(|b| b * b).sum::<f64>().sqrt();
    let theta = (dot / (na * nb)).min(1.0).acos().to_degrees();
    let gap_err = (agreement(&f, &fs).unwrap() - ag)
        .abs()
        .max((mean_squared_error(&f, &fs).unwrap() - gap * gap).abs())
        .max((risk_angle(&f, &fs).unwrap() - theta).abs());

    let mut dist_err: f64 = 0.0;
    for _ in 0..50 {
        let (a, b) = (random_corr(&mut g, 8), random_corr(&mut g, 8));
        let mut oracle = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                oracle += (a.get(i, j) - b.get(i, j)).powi(2);
            }
        }
        dist_err = dist_err.max((matrix_distance(&a, &b).unwrap() - oracle).abs());
    }
    outcome(
        zeros && gap_err < 1e-10 && dist_err < 1e-14,
        format!("identical inputs exact zeros: {zeros}; constant gap error {gap_err:.1e}; distance vs loop {dist_err:.1e}"),
    )
}

fn burst_detection() -> Outcome {
    let (w, step, start, end) = (100usize, 5usize, 400usize, 600usize);
    let prices = SyntheticMarket::<f64>::new(20, 1000, 2011).with_burst(start, end, 4.0).prices().unwrap();
    let out = run_rolling(&prices, &WindowSpec::rolling(w, step).unwrap(), &[MethodConfig::default()]).unwrap();
    let mse = out.mse_series(0);
    let Some(k) = (0..mse.len())
        .filter(|&i| mse[i].is_some())
        .max_by(|&a, &b| mse[a].partial_cmp(&mse[b]).unwrap())
    else {
        return outcome(false, "no window has a defined MSE".into());
    };
    // returns are indexed from the first price change; day d of the market is return d
    let (e0, e1) = (k * step + w, k * step + 2 * w);
    let centre = (e0 + e1) / 2;
    outcome(
        centre >= start && centre < end,
        format!(
            "burst on returns [{start}, {end}); peak MSE at window {k} of {}, evaluated on [{e0}, {e1})",
            mse.len()
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 9] = [
        ("MP bounds", mp_bounds, Some(Duration::from_millis(1))),
        ("MP normalization", mp_normalization, Some(Duration::from_secs(1))),
        ("cleaning invariants", cleaning_invariants, Some(Duration::from_secs(10))),
        ("shuffle baseline", shuffle_baseline, Some(Duration::from_secs(60))),
        ("QP correctness", qp_correctness, Some(Duration::from_secs(30))),
        ("frontier shape", frontier_shape, None),
        ("regression invariants", regression_invariants, None),
        ("metric identities", metric_identities, None),
        ("planted volatility", burst_detection, Some(Duration::from_secs(120))),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = run();
        let took = t0.elapsed();
        let in_time = limit.is_none_or(|l| took < l);
        let pass = o.pass && in_time;
        let budget = limit.map_or(String::new(), |l| format!(" (limit {l:?})"));
        println!(
            "criterion {}: {} {name}: {}; {took:.2?}{budget}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
