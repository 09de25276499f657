//! Command line front end: configuration, subcommands and persistence.
//!
//! Exit status is 0 on success, 2 for configuration errors, 3 for numerical
//! failures and 4 when `--strict` is set and a run produced an inconclusive
//! diagnostic.

pub mod commands;
pub mod config;
pub mod record;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::ExperimentConfig;
pub use record::RunRecord;

use crate::error::{LqgError, Result};

#[derive(Debug, Parser)]
#[command(name = "lqg", version, about = "Spectral experiments for Liouville quantum gravity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: CommonOpts,
}

#[derive(Debug, clap::Args)]
pub struct CommonOpts {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Output directory (overrides the config file and LQG_OUT_DIR).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Reuse the spectrum and field snapshot stored in this directory.
    #[arg(long, global = true)]
    pub from: Option<PathBuf>,
    /// Treat inconclusive diagnostics as failures (exit status 4).
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one field and write its spectrum and snapshot.
    Spectrum,
    /// Weyl-law fits over an ensemble of fields.
    Weyl,
    /// Heat trace, plateau and boundary-correction fit.
    Heattrace,
    /// Unfolded level spacings against GOE and Poisson.
    Spacing,
    /// Eigenfunction equidistribution and random-wave autocorrelation.
    Que,
    /// Occupation-formula and bridge-identity Monte Carlo.
    Lbm,
    /// Solve the KPZ relation for a Euclidean exponent.
    Kpz {
        #[arg(long)]
        x: f64,
    },
}

/// Loads the configuration and applies flag overrides; flags win.
pub fn resolve_config(opts: &CommonOpts) -> Result<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(g) = opts.gamma {
        cfg.field.gamma = g;
    }
    if let Some(n) = opts.n {
        cfg.grid.n = n;
    }
    if let Some(s) = opts.seed {
        cfg.run.base_seed = s;
    }
    if let Some(r) = opts.replicas {
        cfg.run.replicas = r;
    }
    if let Some(o) = &opts.out {
        cfg.run.output_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve_config(&cli.opts)?;
    let out = cfg.output_dir(cli.opts.out.as_deref());
    let from = cli.opts.from.as_deref();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| LqgError::config(format!("run.workers: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Spectrum => commands::cmd_spectrum(&cfg, &out, from),
        Command::Weyl => commands::cmd_weyl(&cfg, &out),
        Command::Heattrace => commands::cmd_heattrace(&cfg, &out, from),
        Command::Spacing => commands::cmd_spacing(&cfg, &out, from),
        Command::Que => commands::cmd_que(&cfg, &out, from),
        Command::Lbm => commands::cmd_lbm(&cfg, &out, from),
        Command::Kpz { x } => commands::cmd_kpz(&cfg, &out, *x, cfg.field.gamma),
    })
}

/// Runs the parsed command and maps the result to a process exit status.
pub fn exit_status(cli: &Cli) -> i32 {
    match run(cli) {
        Ok((record, flags)) => {
            log::info!("run {} wrote {} files", record.run_id, record.outputs.len());
            if cli.opts.strict && flags.iter().any(|d| d.is_inconclusive()) {
                for d in flags.iter().filter(|d| d.is_inconclusive()) {
                    eprintln!("strict: {d}");
                }
                4
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
