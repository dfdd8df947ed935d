use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tree_stable_cli::config::{read_config_file, resolve, Experiment};
use tree_stable_cli::exit;
use tree_stable_cli::experiments::run;
use tree_stable_cli::output::{program_version, write_report};

/// Runs one experiment on stable processes on a homogeneous tree and writes
/// a CSV or JSON table. Flags override values from `--config`.
#[derive(Debug, Parser)]
#[command(name = "tree-stable", version, about)]
struct Cli {
    /// Experiment to run; may instead be set in the config file.
    experiment: Option<Experiment>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Branching number; every vertex has q + 1 neighbours.
    #[arg(long)]
    q: Option<String>,
    /// Stability index in (0, 2).
    #[arg(long)]
    alpha: Option<String>,
    /// Time grid, e.g. `1,2,5` or `10:100:10`.
    #[arg(long)]
    t: Option<String>,
    /// Largest distance reported.
    #[arg(long)]
    nmax: Option<String>,
    /// Spectral truncation depth.
    #[arg(long = "N")]
    truncation: Option<String>,
    /// Radius grid.
    #[arg(long)]
    r: Option<String>,
    /// Lower annulus factor.
    #[arg(long = "A1")]
    a1: Option<String>,
    /// Upper annulus factor.
    #[arg(long = "A2")]
    a2: Option<String>,
    /// Annulus scale exponent, default 2/alpha.
    #[arg(long)]
    beta_exponent: Option<String>,
    /// Monte Carlo sample count.
    #[arg(long)]
    n_samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
    /// Output file, `-` for standard output. Defaults to
    /// `$TREE_STABLE_OUT/<experiment>.<format>`, or the working directory.
    #[arg(long)]
    out: Option<String>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<String>,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v: Vec<(&'static str, String)> = Vec::new();
        if let Some(e) = self.experiment {
            v.push(("experiment", e.name().to_string()));
        }
        let flags = [
            ("q", &self.q),
            ("alpha", &self.alpha),
            ("t", &self.t),
            ("nmax", &self.nmax),
            ("N", &self.truncation),
            ("r", &self.r),
            ("A1", &self.a1),
            ("A2", &self.a2),
            ("beta_exponent", &self.beta_exponent),
            ("n_samples", &self.n_samples),
            ("seed", &self.seed),
            ("format", &self.format),
            ("out", &self.out),
            ("threads", &self.threads),
        ];
        for (k, val) in flags {
            if let Some(x) = val {
                v.push((k, x.clone()));
            }
        }
        v
    }
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG_ERROR as u8 } else { 0 });
        }
    };
    let mut map = match &cli.config {
        Some(path) => match read_config_file(path) {
            Ok(m) => m,
            Err(e) => return fail(exit::CONFIG_ERROR, e),
        },
        None => BTreeMap::new(),
    };
    for (k, v) in cli.overrides() {
        map.insert(k.to_string(), v);
    }
    let cfg = match resolve(&map) {
        Ok(c) => c,
        Err(e) => return fail(exit::CONFIG_ERROR, e),
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(exit::CONFIG_ERROR, format!("config field `threads`: {e}"));
        }
    }

    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) if e.is_numerical() => return fail(exit::TOLERANCE_FAILED, format!("{}: {e}", cfg.experiment.name())),
        Err(e) => return fail(exit::CONFIG_ERROR, format!("{}: {e}", cfg.experiment.name())),
    };

    let target = cfg.output_path();
    let written = match &target {
        None => write_report(&mut std::io::stdout().lock(), &cfg, &report),
        Some(path) => {
            let make = || -> std::io::Result<()> {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                write_report(&mut f, &cfg, &report)?;
                f.flush()
            };
            make()
        }
    };
    if let Err(e) = written {
        return fail(exit::CONFIG_ERROR, format!("cannot write output: {e}"));
    }

    // keep standard output clean when it carries the table
    let summary = format!(
        "{} {}\n{}{}",
        program_version(),
        cfg.experiment.name(),
        report.summary(),
        target.map(|p| format!("wrote {}\n", p.display())).unwrap_or_default()
    );
    if cfg.output_path().is_none() {
        eprint!("{summary}");
    } else {
        print!("{summary}");
    }
    ExitCode::from(report.exit_code() as u8)
}
