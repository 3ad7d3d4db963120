use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rmtfolio::synthetic::SyntheticMarket;
use rmtfolio::{Layout, PriceFormat};

fn write_market(dir: &Path, assets: usize, days: usize, seed: u64) -> PathBuf {
    let path = dir.join("prices.csv");
    let prices = SyntheticMarket::<f64>::new(assets, days, seed).prices().unwrap();
    let mut buf = Vec::new();
    prices.write_csv(&mut buf, &PriceFormat::new(Layout::Wide)).unwrap();
    fs::write(&path, buf).unwrap();
    path
}

/// Runs the binary and returns the run directory it prints.
fn run(args: &[&str]) -> PathBuf {
    let out = Command::new(env!("CARGO_BIN_EXE_rmtfolio")).args(args).args(["--layout", "wide"]).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
}

fn fails(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_rmtfolio")).args(args).args(["--layout", "wide"]).output().unwrap();
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn lines(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().map(str::to_string).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn ingest_writes_panels_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_market(tmp.path(), 5, 40, 1);
    let out = tmp.path().join("runs");
    let dir = run(&["ingest", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(dir.starts_with(&out));
    let returns = lines(&dir.join("returns.csv"));
    assert_eq!(returns.len(), 41);
    assert!(returns[0].starts_with("date,"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["liquid_tickers"], 5);
    assert_eq!(summary["observations"], 40);
    let m = manifest(&dir);
    assert_eq!(m["command"], "ingest");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 1);
    assert!(dir.join("config.txt").exists());
}

#[test]
fn spectrum_clean_residuals_and_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_market(tmp.path(), 10, 120, 2);
    let (i, o) = (input.to_str().unwrap(), tmp.path().join("runs"));
    let o = o.to_str().unwrap();

    let dir = run(&["spectrum", "--input", i, "--out", o]);
    let ev = lines(&dir.join("eigenvalues.csv"));
    assert_eq!(ev.len(), 11);
    assert_eq!(ev[0], "rank,eigenvalue,band");
    assert!(ev[1].ends_with("AboveNoise"), "market mode above the band: {}", ev[1]);
    assert_eq!(lines(&dir.join("qq.csv")).len(), 11);
    assert!(dir.join("ks.json").exists() && dir.join("mp_density.csv").exists());
    assert_eq!(lines(&dir.join("summary.csv")).len(), 2);

    let dir = run(&["clean", "--input", i, "--out", o]);
    let d: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("diagnostics.json")).unwrap()).unwrap();
    assert!((d["trace"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    assert_eq!(lines(&dir.join("cleaned.csv")).len(), 11);

    let dir = run(&["residuals", "--input", i, "--out", o]);
    assert_eq!(lines(&dir.join("coefficients.csv")).len(), 11);
    assert_eq!(lines(&dir.join("residuals.csv")).len(), 121);

    let dir = run(&["simulate", "--input", i, "--out", o, "--sims", "20", "--seed", "3"]);
    assert_eq!(lines(&dir.join("eigenvalues.csv")).len(), 1 + 20 * 10);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(s["in_band_fraction"].as_f64().unwrap() > 0.8);
}

#[test]
fn frontier_and_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_market(tmp.path(), 8, 200, 4);
    let (i, o) = (input.to_str().unwrap(), tmp.path().join("runs"));
    let o = o.to_str().unwrap();

    let dir = run(&["frontier", "--input", i, "--out", o, "--clean", "--no-short", "--grid", "20"]);
    let f = lines(&dir.join("frontier.csv"));
    assert_eq!(f.len(), 21);

    let dir = run(&[
        "pair", "--input", i, "--out", o, "--previous", "2000-01-04:2000-04-12", "--target", "2000-04-13:2000-07-21",
    ]);
    let reports = lines(&dir.join("reports.csv"));
    assert_eq!(reports.len(), 5, "four methods by default");
    for slug in ["raw", "clean", "regress", "clean-regress"] {
        assert!(dir.join(format!("reports/{slug}.json")).exists());
        assert!(dir.join(format!("frontiers/{slug}-predicted.csv")).exists());
        assert!(dir.join(format!("frontiers/{slug}-realized.csv")).exists());
    }
    assert_eq!(lines(&dir.join("spectra.csv")).len(), 3);

    let err = fails(&["pair", "--input", i, "--out", o]);
    assert!(err.contains("--previous"), "{err}");
}

#[test]
fn rolling_is_deterministic_and_config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_market(tmp.path(), 6, 160, 5);
    let config = tmp.path().join("settings.txt");
    fs::write(
        &config,
        format!(
            "# rolling setup\ninput = {}\nwindow = 40\nstep = 20\nmethods = raw,clean\nout = {}\n",
            input.display(),
            tmp.path().join("runs").display()
        ),
    )
    .unwrap();
    let c = config.to_str().unwrap();
    let a = run(&["rolling", "--config", c]);
    let windows = lines(&a.join("windows.csv"));
    // (160 - 2*40) / 20 + 1 windows
    assert_eq!(windows.len(), 1 + 5);
    assert_eq!(lines(&a.join("reports.csv")).len(), 1 + 5 * 2);
    assert!(manifest(&a)["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("evaluation")));

    let first = fs::read(a.join("reports.csv")).unwrap();
    fs::remove_dir_all(&a).unwrap();
    let again = run(&["rolling", "--config", c]);
    assert_eq!(a, again, "run directory is named by the settings");
    assert_eq!(fs::read(again.join("reports.csv")).unwrap(), first);

    let b = run(&["rolling", "--config", c, "--step", "40"]);
    assert_ne!(a, b);
    assert_eq!(lines(&b.join("windows.csv")).len(), 1 + 3);
}

#[test]
fn bad_input_is_reported_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("bad.csv");
    fs::write(&input, "date,A,B\n2000-01-03,1,2\n2000-01-04,x,2\n").unwrap();
    let err = fails(&["ingest", "--input", input.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(err.contains('3'), "{err}");
    let err = fails(&["ingest", "--out", tmp.path().to_str().unwrap()]);
    assert!(err.contains("input"), "{err}");
}

#[test]
fn external_index_round_trips_and_feeds_volatility() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_market(tmp.path(), 6, 160, 6);
    let (i, o) = (input.to_str().unwrap(), tmp.path().join("runs"));
    let o = o.to_str().unwrap();
    let eigen = run(&["residuals", "--input", i, "--out", o]);
    let index = eigen.join("index.csv");
    let index = index.to_str().unwrap();
    let external = run(&["residuals", "--input", i, "--out", o, "--index", index]);
    assert_eq!(
        fs::read(eigen.join("coefficients.csv")).unwrap(),
        fs::read(external.join("coefficients.csv")).unwrap()
    );
    assert!(fs::read_to_string(external.join("diagnostics.json")).unwrap().contains("External"));

    let dir = run(&["rolling", "--input", i, "--out", o, "--window", "40", "--step", "20", "--methods", "raw", "--index", index]);
    let vol = lines(&dir.join("volatility.csv"));
    assert_eq!(vol[0], "window,start,end,volatility");
    // one W-day window every step days
    assert_eq!(vol.len(), 1 + (160 - 40) / 20 + 1);
}
