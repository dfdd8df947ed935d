//! Experiment configuration: a flat `key = value` file overlaid by flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::grid::{parse_index_grid, parse_real_grid};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TREE_STABLE_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    KernelTable,
    Envelope,
    Repartition,
    ExitTime,
    Poisson,
    Selftest,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::KernelTable => "kernel-table",
            Experiment::Envelope => "envelope",
            Experiment::Repartition => "repartition",
            Experiment::ExitTime => "exit-time",
            Experiment::Poisson => "poisson",
            Experiment::Selftest => "selftest",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        use clap::ValueEnum;
        Experiment::value_variants().iter().copied().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Validation failure for one key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: &str, reason: impl Into<String>) -> Self {
        ConfigError {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.key, self.reason)
    }
}

/// Every accepted key, in echo order.
pub const KEYS: [&str; 15] = [
    "experiment",
    "q",
    "alpha",
    "t",
    "nmax",
    "N",
    "r",
    "A1",
    "A2",
    "beta_exponent",
    "n_samples",
    "seed",
    "format",
    "out",
    "threads",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub q: u32,
    pub alpha: f64,
    pub t: Vec<f64>,
    pub nmax: usize,
    /// spectral truncation
    pub truncation: usize,
    pub r: Vec<usize>,
    pub a1: f64,
    pub a2: f64,
    pub beta_exponent: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub format: Format,
    /// `None` writes to `<dir>/<experiment>.<ext>`; `-` is standard output
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// resolved `key = value` pairs, in [`KEYS`] order
    pub echo: Vec<(String, String)>,
}

/// Reads a config file: one `key = value` per line, `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::new(line, format!("line {}: expected `key = value`", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::new(k, format!("line {}: unknown key", i + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::new(k, format!("line {}: repeated key", i + 1)));
        }
    }
    Ok(map)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn defaults(e: Experiment) -> BTreeMap<&'static str, &'static str> {
    let mut d = BTreeMap::from([
        ("q", "2"),
        ("alpha", "1"),
        ("t", "0.5,1,2,5"),
        ("nmax", "15"),
        ("N", "400"),
        ("r", "4"),
        ("A1", "0.5"),
        ("A2", "2"),
        ("n_samples", "100000"),
        ("seed", "1"),
        ("format", "csv"),
    ]);
    match e {
        Experiment::Repartition => {
            d.insert("t", "10:100:10");
        }
        Experiment::ExitTime => {
            d.insert("r", "4,6,8");
        }
        Experiment::Poisson => {
            d.insert("r", "2,4");
        }
        _ => {}
    }
    d
}

fn parse<T: std::str::FromStr>(key: &str, v: &str, what: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::new(key, format!("`{v}` is not {what}")))
}

fn check(key: &str, ok: bool, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(key, reason))
    }
}

/// Validates the merged key/value map. Missing keys take
/// experiment-specific defaults; `beta_exponent` defaults to `2/alpha`.
pub fn resolve(map: &BTreeMap<String, String>) -> Result<ExperimentConfig, ConfigError> {
    for k in map.keys() {
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::new(k, "unknown key"));
        }
    }
    let experiment = match map.get("experiment") {
        Some(v) => Experiment::parse(v).ok_or_else(|| ConfigError::new("experiment", format!("unknown experiment `{v}`")))?,
        None => return Err(ConfigError::new("experiment", "missing")),
    };
    let d = defaults(experiment);
    let get = |k: &str| -> Option<&str> { map.get(k).map(String::as_str).or_else(|| d.get(k).copied()) };
    let need = |k: &str| get(k).expect("every required key has a default");

    let q: u32 = parse("q", need("q"), "an integer")?;
    check("q", (2..=64).contains(&q), "must lie in [2, 64]")?;
    let alpha: f64 = parse("alpha", need("alpha"), "a number")?;
    check("alpha", alpha > 0.0 && alpha < 2.0, "must lie in (0, 2)")?;
    let t = parse_real_grid(need("t")).map_err(|e| ConfigError::new("t", e))?;
    check("t", t.iter().all(|&x| x > 0.0 && x <= 1e4), "times must lie in (0, 1e4]")?;
    let truncation: usize = parse("N", need("N"), "an integer")?;
    check("N", (20..=5000).contains(&truncation), "must lie in [20, 5000]")?;
    let nmax: usize = parse("nmax", need("nmax"), "an integer")?;
    check("nmax", nmax <= truncation, "must not exceed N")?;
    let r = parse_index_grid(need("r")).map_err(|e| ConfigError::new("r", e))?;
    check("r", r.iter().all(|&x| (1..=64).contains(&x)), "radii must lie in [1, 64]")?;
    let a1: f64 = parse("A1", need("A1"), "a number")?;
    let a2: f64 = parse("A2", need("A2"), "a number")?;
    check("A1", a1 > 0.0 && a1.is_finite(), "must be positive")?;
    check("A2", a2 > a1 && a2.is_finite(), "must exceed A1")?;
    let beta_exponent: f64 = match get("beta_exponent") {
        Some(v) => parse("beta_exponent", v, "a number")?,
        None => 2.0 / alpha,
    };
    check("beta_exponent", beta_exponent > 0.0 && beta_exponent <= 10.0, "must lie in (0, 10]")?;
    let n_samples: u64 = parse("n_samples", need("n_samples"), "an integer")?;
    check("n_samples", (1..=1_000_000_000).contains(&n_samples), "must lie in [1, 1e9]")?;
    let seed: u64 = parse("seed", need("seed"), "a non-negative integer")?;
    let format = match need("format") {
        "csv" => Format::Csv,
        "json" => Format::Json,
        v => return Err(ConfigError::new("format", format!("`{v}` is not csv or json"))),
    };
    let out = match get("out") {
        Some("") => return Err(ConfigError::new("out", "empty path")),
        Some(v) => Some(PathBuf::from(v)),
        None => None,
    };
    let threads = match get("threads") {
        Some(v) => {
            let n: usize = parse("threads", v, "an integer")?;
            check("threads", n >= 1, "must be at least 1")?;
            Some(n)
        }
        None => None,
    };

    match experiment {
        Experiment::ExitTime => check("r", r.iter().all(|&x| x >= 2), "exit-time needs radii >= 2")?,
        Experiment::Poisson => check("r", r.iter().all(|&x| (2..=16).contains(&x)), "poisson needs radii in [2, 16]")?,
        Experiment::Selftest => check("r", r.iter().all(|&x| (2..=8).contains(&x)), "selftest needs radii in [2, 8]")?,
        _ => {}
    }

    let echo = KEYS
        .iter()
        .map(|&k| {
            let v = match k {
                "experiment" => experiment.name().to_string(),
                "beta_exponent" => beta_exponent.to_string(),
                "out" => out.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "(default)".into()),
                "threads" => threads.map(|n| n.to_string()).unwrap_or_else(|| "(all)".into()),
                _ => need(k).to_string(),
            };
            (k.to_string(), v)
        })
        .collect();

    Ok(ExperimentConfig {
        experiment,
        q,
        alpha,
        t,
        nmax,
        truncation,
        r,
        a1,
        a2,
        beta_exponent,
        n_samples,
        seed,
        format,
        out,
        threads,
        echo,
    })
}

impl ExperimentConfig {
    /// Destination of the data file; `None` means standard output.
    pub fn output_path(&self) -> Option<PathBuf> {
        match &self.out {
            Some(p) if p.as_os_str() == "-" => None,
            Some(p) => Some(p.clone()),
            None => {
                let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
                Some(dir.join(format!("{}.{}", self.experiment.name(), self.format.extension())))
            }
        }
    }
}
