use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dispatch::config::ExperimentConfig;
use dispatch::experiment::{
    compare_methods, read_runs, reproduce, run_experiment, write_comparison,
};
use dispatch::synth::SynthConfig;
use dispatch::Result;
use dispatch_core::sim::Method;
use dispatch_core::ActivationKind;

#[derive(Parser)]
#[command(
    name = "dispatch",
    version,
    about = "Demand-aware ride-hailing dispatch simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a config's sweep. Flags replace the matching sweep axis.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
        #[arg(long, value_delimiter = ',')]
        vehicles: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        activation: Vec<ActivationKind>,
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare completed runs: cell directories, experiment output roots, or
    /// the output of `--config`.
    Compare {
        #[arg(long, conflicts_with = "runs")]
        config: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        runs: Vec<PathBuf>,
        /// Compare every run against this method instead of pairwise.
        #[arg(long)]
        baseline: Option<String>,
        /// Where to write the tables; defaults to the first input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic scenario and a config for it.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Rerun one cell from its manifest and check the outputs match.
    Reproduce {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            method,
            vehicles,
            activation,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if !method.is_empty() {
                cfg.sweep.methods = method;
            }
            if !vehicles.is_empty() {
                cfg.sweep.vehicles = vehicles;
            }
            if !activation.is_empty() {
                cfg.sweep.activations = activation;
            }
            if !seed.is_empty() {
                cfg.sweep.seeds = seed;
            }
            if let Some(out) = out {
                cfg.data.output = out;
            }
            let res = run_experiment(&cfg)?;
            for r in &res.runs {
                println!(
                    "{:<8} {:<9} v={:<5} seed={:<4} R={:.4} rho={} tau={}",
                    r.manifest.key.method,
                    r.manifest.key.activation,
                    r.manifest.key.vehicles,
                    r.manifest.seed,
                    r.report.served_ratio,
                    r.report.rho.map_or("-".into(), |x| format!("{x:.4}")),
                    r.report.mean_wait.map_or("-".into(), |x| format!("{x:.1}")),
                );
            }
            println!("wrote {}", res.root.join("metrics.csv").display());
        }
        Command::Compare {
            config,
            runs,
            baseline,
            out,
        } => {
            let inputs = match config {
                Some(c) => vec![ExperimentConfig::load(&c)?.data.output],
                None => runs,
            };
            let records = read_runs(&inputs)?;
            let cmp = compare_methods(&records, baseline.as_deref())?;
            let dir = out.unwrap_or_else(|| inputs[0].clone());
            write_comparison(&dir, &cmp)?;
            for d in &cmp.diffs {
                println!(
                    "{} - {} (v={}, seed={}): dR={:+.4}",
                    d.a, d.b, d.vehicles, d.seed, d.d_served_ratio
                );
            }
            println!("wrote {}", dir.join("comparison.csv").display());
        }
        Command::Synth { out, seed } => {
            let scenario = SynthConfig {
                seed,
                ..SynthConfig::default()
            }
            .generate();
            scenario.write_with_config(&out, seed)?;
            println!("wrote {}", out.join("config.toml").display());
        }
        Command::Reproduce { manifest, out } => {
            let r = reproduce(&manifest, &out)?;
            println!(
                "{}: events {}, report {}",
                r.dir.display(),
                if r.events_match {
                    "identical"
                } else {
                    "DIFFER"
                },
                if r.report_match {
                    "identical"
                } else {
                    "DIFFER"
                }
            );
            if !(r.events_match && r.report_match) {
                return Err(dispatch::DispatchError::Mismatch(
                    "reproduced outputs differ from the manifest".into(),
                ));
            }
        }
    }
    Ok(())
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
