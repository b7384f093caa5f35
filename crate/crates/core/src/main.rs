use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use icl_nav::harness::{
    evaluate, plot_metrics, run_sweep, train, validate_path, HarnessError, RunConfig, Severity, SweepSpec,
    DEFAULT_SMOOTHING,
};

#[derive(Parser)]
#[command(name = "icl-nav", version, about = "Instruction-following navigation with an incremental curriculum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a run config.
    Train {
        config: PathBuf,
        /// Train only this seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Greedy evaluation of a checkpoint on the config's final stage.
    Eval {
        checkpoint: PathBuf,
        config: PathBuf,
        #[arg(long, short = 'n', default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run every cell of a sweep spec.
    Sweep {
        spec: PathBuf,
        /// Directory to create the sweep in; defaults to the base config's output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smoothed learning curves (SVG) and their numbers (CSV) from metrics files.
    Plot {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
        window: usize,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Check maps, run configs and sweep specs without running anything.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<u8, HarnessError> {
    match cmd {
        Command::Train { config, seed } => {
            let cfg = RunConfig::load(&config)?;
            if let Some(code) = report_findings(&[config.clone()]) {
                return Ok(code);
            }
            let seeds = match seed {
                Some(s) => vec![s],
                None => cfg.run.seeds.clone(),
            };
            for s in seeds {
                let out = train(&cfg, s)?;
                println!(
                    "{}: {} episodes, final success {:.3}, run dir {}",
                    out.manifest.run_id,
                    out.manifest.episodes,
                    out.manifest.final_success_rate,
                    out.run_dir.display()
                );
            }
            Ok(0)
        }
        Command::Eval {
            checkpoint,
            config,
            episodes,
            seed,
            json,
        } => {
            let cfg = RunConfig::load(&config)?;
            let rep = evaluate(&cfg, &checkpoint, episodes, seed)?;
            if json {
                let text = serde_json::to_string_pretty(&rep).map_err(|e| HarnessError::Internal(e.to_string()))?;
                println!("{text}");
            } else {
                println!(
                    "stage {}: {} episodes, success {:.3}, mean length {:.1}",
                    rep.stage, rep.episodes, rep.success_rate, rep.mean_length
                );
                for o in &rep.per_object {
                    println!(
                        "  {:<8} {:>5} episodes  success {:.3}  mean length {:.1}",
                        o.object.to_string(),
                        o.episodes,
                        o.success_rate,
                        o.mean_length
                    );
                }
            }
            Ok(0)
        }
        Command::Sweep { spec, out } => {
            let spec = SweepSpec::load(&spec)?;
            let rep = run_sweep(&spec, out.as_deref())?;
            let failed = rep.rows.iter().filter(|r| r.status != "ok").count();
            println!(
                "{} cells ({} failed), summary {}",
                rep.rows.len(),
                failed,
                rep.summary.display()
            );
            Ok(if failed > 0 { 2 } else { 0 })
        }
        Command::Plot { metrics, window, out } => {
            let rep = plot_metrics(&metrics, window, &out)?;
            for c in &rep.charts {
                println!("{}", c.display());
            }
            println!("{}", rep.csv.display());
            Ok(0)
        }
        Command::Validate { paths } => Ok(report_findings(&paths).unwrap_or_else(|| {
            for p in &paths {
                println!("{}: ok", p.display());
            }
            0
        })),
    }
}

/// Prints findings; returns exit code 1 if any is an error.
fn report_findings(paths: &[PathBuf]) -> Option<u8> {
    let mut failed = false;
    for p in paths {
        for f in validate_path(p) {
            eprintln!("{}: {f}", p.display());
            failed |= f.severity == Severity::Error;
        }
    }
    failed.then_some(1)
}
