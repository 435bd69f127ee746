use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eve_core::harness::{self, RunConfig};
use eve_core::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_ORACLE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "eve",
    version,
    about = "Epistemic value estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write per-episode CSV.
    Run(ConfigArgs),
    /// Run one parameter over several values and seeds; write aggregate CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Configuration key to vary.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Seeds per value; seed_env, seed_init and seed_run are offset by the seed index.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
    /// Uniform-policy visit counts and epistemic std for every Deep Sea cell.
    Probe(ConfigArgs),
    /// Run the numerical oracle checks.
    OracleCheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the fully resolved configuration.
    PrintConfig(ConfigArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Base configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    size: Option<String>,
    #[arg(long)]
    agent: Option<String>,
    #[arg(long)]
    episodes: Option<String>,
    #[arg(long = "seed-env")]
    seed_env: Option<String>,
    #[arg(long = "seed-init")]
    seed_init: Option<String>,
    #[arg(long = "seed-run")]
    seed_run: Option<String>,
    /// thompson or eps-greedy.
    #[arg(long)]
    acting: Option<String>,
    /// posterior or mle.
    #[arg(long)]
    bootstrap: Option<String>,
    /// noisy, variance-reduced or mle-gradient.
    #[arg(long)]
    fisher: Option<String>,
    /// leaky or relu.
    #[arg(long)]
    activation: Option<String>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<String>,
    /// Override any configuration key, e.g. `--set omega=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> eve_core::Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("env", &self.env),
            ("size", &self.size),
            ("agent", &self.agent),
            ("episodes", &self.episodes),
            ("seed_env", &self.seed_env),
            ("seed_init", &self.seed_init),
            ("seed_run", &self.seed_run),
            ("acting", &self.acting),
            ("bootstrap", &self.bootstrap),
            ("fisher", &self.fisher),
            ("activation", &self.activation),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                config.set(key, value)?;
            }
        }
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::config(item.clone(), "expected --set key=value"))?;
            config.set(key.trim(), value)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn open_output(path: &str) -> eve_core::Result<Box<dyn Write>> {
    if path.is_empty() || path == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => EXIT_USAGE,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => 1,
    }
}

fn execute(command: Command) -> eve_core::Result<u8> {
    match command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let metrics = harness::run(&config)?;
            let mut out = open_output(&config.out)?;
            harness::write_run_csv(&mut out, &config, &metrics)?;
            out.flush()?;
            eprintln!(
                "success_fraction={} solved={} first_success={} learner_steps={} wall_clock_s={:.2}",
                metrics.success_fraction(),
                harness::exploration_score(&metrics, config.success_threshold),
                metrics
                    .first_success()
                    .map_or_else(|| "none".to_string(), |e| e.to_string()),
                metrics.learner_steps,
                metrics.wall_clock.as_secs_f64()
            );
        }
        Command::Sweep {
            config,
            param,
            values,
            seeds,
        } => {
            let config = config.resolve()?;
            let report = harness::sweep(&config, &param, &values, seeds)?;
            let mut out = open_output(&config.out)?;
            report.write_csv(&mut out, &config)?;
            out.flush()?;
        }
        Command::Probe(args) => {
            let config = args.resolve()?;
            let report = harness::probe_uncertainty(&config)?;
            let mut out = open_output(&config.out)?;
            report.write_csv(&mut out, &config)?;
            out.flush()?;
            let (unvisited, visited) = report.mean_std_by_visited();
            let fmt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
            eprintln!(
                "spearman_visits_std={} mean_std_unvisited={} mean_std_visited={}",
                fmt(report.visit_std_correlation()),
                fmt(unvisited),
                fmt(visited)
            );
        }
        Command::OracleCheck { out } => {
            let report = harness::oracle_check()?;
            let path = out
                .map(|p| p.to_string_lossy().into_owned())
                .unwrap_or_default();
            let mut writer = open_output(&path)?;
            report.write_csv(&mut writer)?;
            writer.flush()?;
            if !report.all_passed() {
                return Ok(EXIT_ORACLE);
            }
        }
        Command::PrintConfig(args) => {
            let config = args.resolve()?;
            let mut out = open_output(&config.out)?;
            out.write_all(config.to_text().as_bytes())?;
            out.flush()?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
