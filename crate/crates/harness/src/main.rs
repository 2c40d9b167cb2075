use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diracgb::analysis::error_norms;
use diracgb::io::{field_dimension, read_field};
use diracgb_harness::config::{parse_epsilon, Auto};
use diracgb_harness::experiment::{fit_rates, read_errors, RATES_HEADER};
use diracgb_harness::{parse, run_experiment, ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(
    name = "diracgb",
    version,
    about = "Gaussian beam experiments for the semiclassical Dirac equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a config over a list of epsilon values.
    Sweep {
        config: PathBuf,
        /// Comma-separated, e.g. `1/256,1/512`.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon_list: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Error norms between two field snapshots (the second is the reference).
    Compare { a: PathBuf, b: PathBuf },
    /// Fit convergence rates to an errors.csv.
    Rates { csv: PathBuf },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    dt_factor: Option<f64>,
    #[arg(long)]
    dy_factor: Option<f64>,
    /// Truncation radius, or `auto`.
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(v) = self.dt_factor {
            cfg.dt_factor = v;
        }
        if let Some(v) = self.dy_factor {
            cfg.dy_factor = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = if v == "auto" {
                Auto::Auto
            } else {
                Auto::Value(
                    v.parse()
                        .map_err(|_| HarnessError::config("--theta", format!("'{v}' is not a number")))?,
                )
            };
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        cfg.validate()
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn load(path: &Path, overrides: Overrides) -> Result<ExperimentConfig> {
    let mut cfg = parse(&read_text(path)?)?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn report(cfg: &ExperimentConfig) -> Result<()> {
    let summary = run_experiment(cfg)?;
    for row in summary.errors.iter().filter(|r| r.variant == "mean") {
        println!(
            "t={} epsilon={:e} l1={:.3e} l2={:.3e} linf={:.3e}",
            row.t, row.epsilon, row.l1, row.l2, row.linf
        );
    }
    println!("outputs written to {}", cfg.out.display());
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn compare_fields(a: &Path, b: &Path) -> Result<()> {
    let d = field_dimension(open(a)?)?;
    let r = match d {
        1 => error_norms(&read_field::<1>(open(a)?)?, &read_field::<1>(open(b)?)?)?,
        2 => error_norms(&read_field::<2>(open(a)?)?, &read_field::<2>(open(b)?)?)?,
        3 => error_norms(&read_field::<3>(open(a)?)?, &read_field::<3>(open(b)?)?)?,
        _ => return Err(HarnessError::config("grid", format!("unsupported dimension {d}"))),
    };
    let rel = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    println!("epsilon,nodes,l1,l2,linf,linf_rel,linf_rel_a");
    println!(
        "{},{},{},{},{},{},{}",
        r.epsilon,
        r.nodes,
        r.l1,
        r.l2,
        r.linf,
        rel(r.linf_rel),
        rel(r.linf_rel_a)
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => report(&load(&config, overrides)?),
        Command::Sweep {
            config,
            epsilon_list,
            overrides,
        } => {
            let mut cfg = load(&config, overrides)?;
            cfg.epsilons = epsilon_list
                .iter()
                .map(|s| parse_epsilon("--epsilon-list", s))
                .collect::<Result<_>>()?;
            cfg.validate()?;
            report(&cfg)
        }
        Command::Compare { a, b } => compare_fields(&a, &b),
        Command::Rates { csv } => {
            println!("{RATES_HEADER}");
            for r in fit_rates(&read_errors(&read_text(&csv)?)?) {
                println!("{}", r.to_csv());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
