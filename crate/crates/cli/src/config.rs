//! Settings from a `key = value` file overlaid with command-line flags.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use rmtfolio::metrics::{MethodConfig, DEFAULT_BINS, DEFAULT_GRID};
use rmtfolio::{Layout, PriceFormat, WeightBounds};

/// Every key the file may set; each one mirrors a long flag.
pub const KEYS: &[&str] = &[
    "input", "layout", "sentinel", "out", "seed", "bins", "bounds", "no-short", "clean", "regress", "methods",
    "grid", "window", "step", "from", "to", "previous", "target", "sims", "index",
];

/// Raw settings, keyed by flag name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawSettings(pub BTreeMap<String, String>);

impl RawSettings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected `key = value`", n + 1);
            };
            let k = k.trim().replace('_', "-");
            if !KEYS.contains(&k.as_str()) {
                bail!("config line {}: unknown key `{k}`", n + 1);
            }
            map.insert(k, v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    /// Overlays `flags`; bounds given one way on the command line replace
    /// bounds given the other way in the file.
    pub fn overlay(mut self, flags: RawSettings) -> Self {
        if flags.0.contains_key("bounds") {
            self.0.remove("no-short");
        }
        if flags.0.contains_key("no-short") {
            self.0.remove("bounds");
        }
        self.0.extend(flags.0);
        self
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => bail!("`{key}` must be true or false, got `{v}`"),
        }
    }

    fn number<N: std::str::FromStr>(&self, key: &str, default: N) -> Result<N> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| anyhow::anyhow!("`{key}` has an invalid value `{v}`")),
        }
    }

    fn date(&self, key: &str) -> Result<Option<NaiveDate>> {
        self.get(key).map(|v| parse_date(key, v)).transpose()
    }

    fn range(&self, key: &str) -> Result<Option<RangeInclusive<NaiveDate>>> {
        self.get(key).map(|v| parse_range(key, v)).transpose()
    }

    /// The settings as `key = value` lines, sorted by key.
    pub fn echo(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn parse_date(key: &str, v: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(v.trim(), "%Y-%m-%d").with_context(|| format!("`{key}`: invalid date `{v}`"))
}

/// `FROM:TO`, both inclusive.
fn parse_range(key: &str, v: &str) -> Result<RangeInclusive<NaiveDate>> {
    let Some((a, b)) = v.split_once(':') else {
        bail!("`{key}` must be FROM:TO, got `{v}`");
    };
    let (a, b) = (parse_date(key, a)?, parse_date(key, b)?);
    if a > b {
        bail!("`{key}`: {a} is after {b}");
    }
    Ok(a..=b)
}

pub fn parse_bounds(v: &str) -> Result<(f64, f64)> {
    let Some((lo, hi)) = v.split_once(',') else {
        bail!("bounds must be LO,HI, got `{v}`");
    };
    let lo: f64 = lo.trim().parse().with_context(|| format!("invalid lower bound `{lo}`"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("invalid upper bound `{hi}`"))?;
    Ok((lo, hi))
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub format: PriceFormat,
    pub out: PathBuf,
    pub seed: u64,
    pub bins: usize,
    pub bounds: WeightBounds<f64>,
    pub clean: bool,
    pub regress: bool,
    pub methods: Option<String>,
    pub grid: usize,
    pub window: usize,
    pub step: usize,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub previous: Option<RangeInclusive<NaiveDate>>,
    pub target: Option<RangeInclusive<NaiveDate>>,
    pub sims: usize,
    pub index: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(raw: &RawSettings) -> Result<Self> {
        let layout = match raw.get("layout") {
            None => Layout::Long,
            Some(v) => v.parse::<Layout>()?,
        };
        let bounds = if raw.flag("no-short")? {
            WeightBounds::no_short()
        } else if let Some(v) = raw.get("bounds") {
            let (lo, hi) = parse_bounds(v)?;
            WeightBounds::new(lo, hi)?
        } else {
            WeightBounds::no_short()
        };
        let methods = raw.get("methods").map(str::to_string);
        let (clean, regress) = (raw.flag("clean")?, raw.flag("regress")?);
        if methods.is_some() && (clean || regress) {
            bail!("give either `methods` or the `clean`/`regress` switches, not both");
        }
        Ok(Self {
            input: raw.get("input").map(PathBuf::from),
            format: PriceFormat {
                layout,
                missing_sentinel: raw.get("sentinel").map(str::to_string),
            },
            out: raw.get("out").map_or_else(|| PathBuf::from("runs"), PathBuf::from),
            seed: raw.number("seed", 0)?,
            bins: raw.number("bins", DEFAULT_BINS)?,
            bounds,
            clean,
            regress,
            methods,
            grid: raw.number("grid", DEFAULT_GRID)?,
            window: raw.number("window", 100)?,
            step: raw.number("step", 5)?,
            from: raw.date("from")?,
            to: raw.date("to")?,
            previous: raw.range("previous")?,
            target: raw.range("target")?,
            sims: raw.number("sims", 1000)?,
            index: raw.get("index").map(PathBuf::from),
        })
    }

    pub fn base_method(&self) -> MethodConfig<f64> {
        MethodConfig {
            cleaning: self.clean,
            regression: self.regress,
            bounds: self.bounds,
            grid_size: self.grid,
            bin_count: self.bins,
            seed: self.seed,
        }
    }

    /// Methods for a comparison run: an explicit `methods` list, else the
    /// single method picked by the switches, else all four.
    pub fn methods(&self) -> Result<Vec<MethodConfig<f64>>> {
        let base = self.base_method();
        let Some(list) = &self.methods else {
            if self.clean || self.regress {
                return Ok(vec![base]);
            }
            return Ok(MethodConfig::matrix(&base));
        };
        let mut out: Vec<MethodConfig<f64>> = Vec::new();
        for name in list.split(',').map(str::trim) {
            let picks: Vec<(bool, bool)> = match name {
                "all" => vec![(false, false), (true, false), (false, true), (true, true)],
                "raw" => vec![(false, false)],
                "clean" => vec![(true, false)],
                "regress" => vec![(false, true)],
                "clean+regress" => vec![(true, true)],
                other => bail!("unknown method `{other}` (raw, clean, regress, clean+regress, all)"),
            };
            for (cleaning, regression) in picks {
                let m = MethodConfig {
                    cleaning,
                    regression,
                    ..base
                };
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        Ok(out)
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().context("no input file: pass --input or set `input` in the config file")
    }
}
