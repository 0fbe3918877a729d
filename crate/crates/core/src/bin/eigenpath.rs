//! Command-line front end over `eigenpath::experiments`.
//!
//! Exit codes: 0 success, 1 a verification check or run failed, 2 bad
//! configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eigenpath::experiments::{
    cmd_compare, cmd_dispersion, cmd_path, cmd_solve, cmd_verify, ExperimentConfig, Learner, RateInstance,
};
use eigenpath::Error;

#[derive(Parser)]
#[command(name = "eigenpath", version, about = "Tabular TD error-path and ERC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Q*, spectrum of P^pi and the spectral-assumption report.
    Solve,
    /// Error paths of td, ode or mc, one per seed.
    Path,
    /// Seed-aggregated td / erc / erc_star curves.
    Compare,
    /// Verification battery; exits 1 if any check fails.
    Verify {
        /// Use the identity matrix for the rate check.
        #[arg(long)]
        identity_rate_instance: bool,
    },
    /// Index of dispersion of the Q table along each learner's trajectory.
    Dispersion,
}

/// Flags that override values from `--config`.
#[derive(Args)]
struct Overrides {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated seed list, e.g. 0,1,2.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Write per-entry error columns and per-seed learner traces.
    #[arg(long, global = true)]
    full: bool,
    #[arg(long, global = true)]
    env: Option<String>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true, value_parser = parse_learner)]
    learner: Option<Learner>,
    /// Comma-separated learners for compare and dispersion.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_learner)]
    learners: Option<Vec<Learner>>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    q0_scale: Option<f64>,
    #[arg(long, global = true)]
    episodes: Option<usize>,
}

fn parse_learner(s: &str) -> Result<Learner, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Overrides {
    fn resolve(self) -> eigenpath::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        set!(out, seeds, env, gamma, learner, learners, beta, lr, steps, q0_scale, episodes);
        cfg.full |= self.full;
        Ok(cfg)
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::InvalidParameter { .. } | Error::UnknownEnv(_) | Error::HorizonTooShort { .. }
    )
}

fn run(cli: Cli) -> eigenpath::Result<u8> {
    let mut cfg = cli.overrides.resolve()?;
    let files = match cli.command {
        Command::Solve => {
            let o = cmd_solve(&cfg)?;
            let top = o.spectrum.eigenvalues[0];
            println!("dominant eigenvalue {:.12} {:+.1e}i", top.re, top.im);
            println!("{}", o.assumption.summary());
            o.files
        }
        Command::Path => {
            let o = cmd_path(&cfg)?;
            println!(
                "{}: distance reaches 10% before the norm in {} of {} runs",
                o.learner,
                o.leading_runs(),
                o.runs.len()
            );
            o.files
        }
        Command::Compare => {
            let o = cmd_compare(&cfg)?;
            for c in &o.curves {
                let above = o.distance_violations(c.learner, Learner::Td).unwrap_or(0);
                println!(
                    "{:<9} final distance {:.6e}  final |Q - Q*| {:.6e}  steps above td after burn-in {above}",
                    c.learner.as_str(),
                    c.distance.mean[o.steps],
                    c.abs_error.mean[o.steps]
                );
            }
            o.files
        }
        Command::Verify { identity_rate_instance } => {
            if identity_rate_instance {
                cfg.rate_instance = RateInstance::Identity;
            }
            let report = cmd_verify(&cfg)?;
            print!("{report}");
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            return Ok(report.exit_code() as u8);
        }
        Command::Dispersion => {
            let o = cmd_dispersion(&cfg)?;
            for l in &cfg.learners {
                match o.trajectory_mean(*l) {
                    Some(v) => println!("{:<9} trajectory-mean index {v:.6e}", l.as_str()),
                    None => println!("{:<9} trajectory-mean index undefined", l.as_str()),
                }
            }
            o.files
        }
    };
    for f in &files {
        eprintln!("wrote {}", f.display());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
