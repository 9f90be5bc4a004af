use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use beamsel_core::harness::campaign::triples;
use beamsel_core::harness::export::DEFAULT_WINDOW;
use beamsel_core::harness::{
    ee_report, export_figures, load_records, oracle_for, run_campaign, ExperimentConfig, Selection,
};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

/// Beam-subset and transmit-power selection campaigns on a grid-of-beams simulator.
#[derive(Debug, Parser)]
#[command(name = "beamsel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a config file and print its hash and campaign size.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        filters: Filters,
    },
    /// Train and evaluate every selected (strategy, N_UE, seed) triple.
    Run {
        config: PathBuf,
        #[command(flatten)]
        filters: Filters,
        /// Results directory; defaults to the config's output_dir.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Brute-force the best action on each selected scenario.
    Oracle {
        config: PathBuf,
        #[command(flatten)]
        filters: Filters,
    },
    /// Write the figure tables for a results directory as CSV.
    Export {
        results: PathBuf,
        /// Destination directory; defaults to `<results>/figures`.
        #[arg(long)]
        dest: Option<PathBuf>,
        /// Moving-average window for the convergence curve, in episodes.
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
    },
    /// Print the strategy by N_UE energy-efficiency table.
    Report { results: PathBuf },
}

#[derive(Debug, Args)]
struct Filters {
    /// First seed index to run.
    #[arg(long)]
    seed_offset: Option<u64>,
    /// Comma-separated strategy names.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    /// Comma-separated UE counts.
    #[arg(long, value_delimiter = ',')]
    n_ue: Option<Vec<usize>>,
}

impl Filters {
    fn load(&self, path: &Path) -> anyhow::Result<ExperimentConfig> {
        let cfg = ExperimentConfig::load(path)?;
        let selection = Selection {
            strategies: self.strategies.clone(),
            n_ue: self.n_ue.clone(),
            seed_offset: self.seed_offset,
        };
        Ok(selection.apply(&cfg)?)
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    e.downcast_ref::<beamsel_core::Error>().map_or("runtime", |e| e.kind())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Validate { config, filters } => {
            let cfg = filters.load(&config)?;
            let line = json!({
                "status": "ok",
                "config": config,
                "config_hash": cfg.config_hash(),
                "triples": triples(&cfg).len(),
            });
            println!("{line}");
        }
        Command::Run { config, filters, output } => {
            let mut cfg = filters.load(&config)?;
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            let report = run_campaign(&cfg, None)?;
            let failed: Vec<_> = report
                .failed
                .iter()
                .map(|(t, msg)| json!({"triple": t.shard_name(), "message": msg}))
                .collect();
            let line = json!({
                "status": if failed.is_empty() { "ok" } else { "partial" },
                "output_dir": cfg.output_dir,
                "completed": report.completed.len(),
                "skipped": report.skipped.len(),
                "interrupted": report.interrupted.len(),
                "failed": failed,
            });
            println!("{line}");
            if !report.failed.is_empty() {
                bail!("{} of {} triples failed", report.failed.len(), triples(&cfg).len());
            }
        }
        Command::Oracle { config, filters } => {
            let cfg = filters.load(&config)?;
            for &n_ue in &cfg.n_ue {
                for seed in cfg.seeds() {
                    let best = oracle_for(&cfg, n_ue, seed)?;
                    let r = best.outcome.reward;
                    let line = json!({
                        "n_ue": n_ue,
                        "seed": seed,
                        "action_index": best.index,
                        "action": best.decision.action,
                        "power_index": best.decision.power_index,
                        "reward": r.reward,
                        "ee_ratio": r.ee_ratio(),
                        "outage": r.outage,
                    });
                    println!("{line}");
                }
            }
        }
        Command::Export { results, dest, window } => {
            if window == 0 {
                bail!(beamsel_core::Error::InvalidConfig("window must be at least 1".into()));
            }
            let dest = dest.unwrap_or_else(|| results.join("figures"));
            let written = export_figures(&results, &dest, window)
                .with_context(|| format!("exporting {}", results.display()))?;
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::Report { results } => {
            let records = load_records(&results)?;
            print!("{}", ee_report(&records));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({
                "status": "error",
                "kind": error_kind(&e),
                "message": format!("{e:#}"),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
