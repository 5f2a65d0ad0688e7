//! Command-line interface of the `pmlmc` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pmlmc_core::estimators::Method;
use pmlmc_core::transfer::TransferMode;

use crate::config::{parse_counts, ExperimentConfig, PartialConfig};
use crate::error::{HarnessError, Result};
use crate::exec::Rayon;
use crate::experiment::{self, Problem};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "pmlmc", version, about = "Multilevel Monte Carlo for Darcy flow with a lognormal coefficient")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the KL eigenpairs and write the cache file.
    KlBuild(Common),
    /// Compute and store the reference MC mean.
    Reference(Common),
    /// Run the configured estimators and write result tables.
    Run(Common),
    /// Estimate an error model from pilots and write the sample allocation.
    Allocate(Common),
    /// Merge `results.json` files into one long-format table.
    Report {
        /// `results.json` files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write `table.csv` here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long, value_name = "L")]
    pub levels: Option<usize>,
    /// Per-level counts, coarsest first.
    #[arg(long, value_name = "N[,N...]")]
    pub samples: Option<String>,
    #[arg(long, value_name = "REAL")]
    pub eps: Option<f64>,
    #[arg(long)]
    pub transfer: Option<TransferMode>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Common {
    /// Flags over the file over defaults.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => PartialConfig::load(p)?,
            None => PartialConfig::default(),
        };
        let flags = PartialConfig {
            seed: self.seed,
            method: self.method.map(|m| m.to_string()),
            levels: self.levels,
            samples: self.samples.as_deref().map(parse_counts).transpose()?,
            eps: self.eps,
            transfer: self.transfer.map(|t| t.to_string()),
            out: self.out.clone(),
            threads: self.threads,
            ..Default::default()
        };
        ExperimentConfig::resolve(flags.over(file))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::KlBuild(c) => {
            let config = c.resolve()?;
            let spec = config.field_spec();
            let path = config.kl_cache.clone().unwrap_or_else(|| config.out.join("kl.csv"));
            let basis = pmlmc_core::random_field::KlBasis::build(&spec, config.kl_intervals)?;
            io::write_kl_cache(&path, &spec, &basis.basis_1d)?;
            println!("wrote {} ({} modes, dx = {})", path.display(), basis.modes(), basis.basis_1d.dx());
        }
        Command::Reference(c) => {
            let config = c.resolve()?;
            let exec = Rayon::new(config.threads)?;
            let problem = Problem::build(&config)?;
            let r = experiment::build_reference(&problem, &exec)?;
            let path = experiment::write_reference(&problem, &r)?;
            println!("wrote {} (level {}, {} samples, seed {})", path.display(), r.mean.level, r.samples, r.seed);
        }
        Command::Run(c) => {
            let config = c.resolve()?;
            let exec = Rayon::new(config.threads)?;
            let problem = Problem::build(&config)?;
            let out = experiment::run_experiment(&problem, &exec)?;
            print!("{}", experiment::report_tables(&out.records));
        }
        Command::Allocate(c) => {
            let config = c.resolve()?;
            let eps = config.eps.ok_or_else(|| HarnessError::config("allocate needs --eps or `eps`"))?;
            let exec = Rayon::new(config.threads)?;
            let problem = Problem::build(&config)?;
            let plan = experiment::allocate(&problem, &exec, eps)?;
            let path = experiment::write_plan(&config.out, &plan)?;
            println!("wrote {}: counts {:?}, predicted cost {}", path.display(), plan.counts, plan.predicted_cost);
        }
        Command::Report { inputs, out } => {
            let mut records = Vec::new();
            for p in &inputs {
                records.extend(experiment::read_records(p)?);
            }
            let table = experiment::report_tables(&records);
            match out {
                Some(dir) => io::write_text(&dir.join("table.csv"), &table)?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}
