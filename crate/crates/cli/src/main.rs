use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sv_cli::experiment::write_data;
use sv_cli::{report, run_experiment, run_sweep, ExperimentConfig};

#[derive(Parser)]
#[command(name = "svmc", version, about = "Stochastic volatility MCMC: KF, ENS1 and ENS2 samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write it as CSV (y,x_true)
    Simulate(Common),
    /// Run n_runs chains of one scheme
    Run(Common),
    /// Run an ensemble scheme over the (sweep_lx x sweep_leta) grid
    Sweep(Common),
    /// Summarise the results in an output directory
    Report {
        /// Directory holding summary_*.json files
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lx: Option<usize>,
    #[arg(long)]
    leta: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra overrides, `key=value`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("scheme", self.scheme.clone()),
            ("iterations", self.iters.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("l_x", self.lx.map(|v| v.to_string())),
            ("l_eta", self.leta.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects key=value, got {kv:?}"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate(c) => {
            let cfg = c.resolve()?;
            let path = cfg.out.join("data.csv");
            let ds = write_data(&cfg, &path)?;
            println!("wrote {} observations to {}", ds.len(), path.display());
        }
        Command::Run(c) => {
            let cfg = c.resolve()?;
            let out = run_experiment(&cfg)?;
            println!("{}", report::render(std::slice::from_ref(&out.summary)));
            println!("summary: {}", out.summary_path.display());
        }
        Command::Sweep(c) => {
            let cfg = c.resolve()?;
            let summaries = run_sweep(&cfg)?;
            println!("{}", report::render(&summaries));
        }
        Command::Report { out } => print!("{}", report::report(&out)?),
    }
    Ok(())
}
