//! Command-line front end for the rmtfolio toolkit.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RawSettings;

#[derive(Parser, Debug)]
#[command(name = "rmtfolio", version, about = "Random-matrix cleaning and risk forecasts for Markowitz portfolios")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

/// Flags accepted by every subcommand. Each has a config-file key of the
/// same name; flags win.
#[derive(Args, Debug, Default)]
struct Shared {
    /// key = value settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Price file (CSV).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Price file layout.
    #[arg(long, global = true, value_parser = ["long", "wide"])]
    layout: Option<String>,
    /// Token marking a missing price, in addition to the empty cell.
    #[arg(long, global = true)]
    sentinel: Option<String>,
    /// Directory that receives one subdirectory per run.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Histogram bins for the Kullback-Leibler distance.
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Weight bounds as LO,HI.
    #[arg(long, global = true, allow_hyphen_values = true, conflicts_with = "no_short")]
    bounds: Option<String>,
    /// Bounds 0 <= w <= 1.
    #[arg(long, global = true)]
    no_short: bool,
    /// Replace noise-band eigenvalues by their mean.
    #[arg(long, global = true)]
    clean: bool,
    /// Use single-index regression residuals.
    #[arg(long, global = true)]
    regress: bool,
    /// Comma-separated methods: raw, clean, regress, clean+regress, all.
    #[arg(long, global = true)]
    methods: Option<String>,
    /// Frontier grid points.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Rolling window length in observations.
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Rolling step in observations.
    #[arg(long, global = true)]
    step: Option<usize>,
    /// First date (YYYY-MM-DD) of the analysed range.
    #[arg(long, global = true)]
    from: Option<String>,
    /// Last date of the analysed range.
    #[arg(long, global = true)]
    to: Option<String>,
    /// Estimation range FROM:TO for `pair`.
    #[arg(long, global = true)]
    previous: Option<String>,
    /// Forecast range FROM:TO for `pair`.
    #[arg(long, global = true)]
    target: Option<String>,
    /// Shuffle simulations for `simulate`.
    #[arg(long, global = true)]
    sims: Option<usize>,
    /// External market index, CSV `date,return`.
    #[arg(long, global = true)]
    index: Option<PathBuf>,
}

impl Shared {
    fn flags(&self) -> RawSettings {
        let mut m = std::collections::BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let num = |v: Option<usize>| v.map(|x| x.to_string());
        let on = |b: bool| b.then(|| "true".to_string());
        put("input", path(&self.input));
        put("layout", self.layout.clone());
        put("sentinel", self.sentinel.clone());
        put("out", path(&self.out));
        put("seed", self.seed.map(|s| s.to_string()));
        put("bins", num(self.bins));
        put("bounds", self.bounds.clone());
        put("no-short", on(self.no_short));
        put("clean", on(self.clean));
        put("regress", on(self.regress));
        put("methods", self.methods.clone());
        put("grid", num(self.grid));
        put("window", num(self.window));
        put("step", num(self.step));
        put("from", self.from.clone());
        put("to", self.to.clone());
        put("previous", self.previous.clone());
        put("target", self.target.clone());
        put("sims", num(self.sims));
        put("index", path(&self.index));
        RawSettings(m)
    }
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Validate a price file and write the panel, liquid subset and log-returns.
    Ingest,
    /// Eigenvalues, noise bands, Marčenko-Pastur overlay, qq points and KS test.
    Spectrum,
    /// Raw and cleaned correlation matrices.
    Clean,
    /// Single-index regression on the top-eigenvector market index.
    Residuals,
    /// One efficient frontier.
    Frontier,
    /// Forecast one range from the previous one and score every method.
    Pair,
    /// Rolling-window forecasts and scores.
    Rolling,
    /// Shuffle baseline against the Marčenko-Pastur law.
    Simulate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Spectrum => "spectrum",
            Command::Clean => "clean",
            Command::Residuals => "residuals",
            Command::Frontier => "frontier",
            Command::Pair => "pair",
            Command::Rolling => "rolling",
            Command::Simulate => "simulate",
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file = match &cli.shared.config {
        Some(p) => RawSettings::read(p)?,
        None => RawSettings::default(),
    };
    let raw = file.overlay(cli.shared.flags());
    let settings = config::Settings::resolve(&raw)?;
    let mut run = output::Run::create(&settings.out, cli.command.name(), &raw)?;
    match cli.command {
        Command::Ingest => commands::ingest(&settings, &mut run)?,
        Command::Spectrum => commands::spectrum(&settings, &mut run)?,
        Command::Clean => commands::clean(&settings, &mut run)?,
        Command::Residuals => commands::residuals(&settings, &mut run)?,
        Command::Frontier => commands::frontier(&settings, &mut run)?,
        Command::Pair => commands::pair(&settings, &mut run)?,
        Command::Rolling => commands::rolling(&settings, &mut run)?,
        Command::Simulate => commands::simulate(&settings, &mut run)?,
    }
    println!("{}", run.finish()?.display());
    Ok(())
}
