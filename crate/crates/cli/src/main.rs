//! Command-line front end for entanglement-link experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use entlink::harness::config::{ConfigFile, ExperimentConfig};
use entlink::harness::{self, EvalTarget};
use entlink::oracles;

#[derive(Parser)]
#[command(
    name = "entlink",
    about = "Simulate, train and evaluate entanglement-distribution policies on a two-node link",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the experiment subcommands. Explicit flags override
/// the config file.
#[derive(Args, Debug, Clone)]
struct CommonOpts {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Environment: wn2m2, bn2m2 or wn2m3.
    #[arg(long)]
    env: Option<String>,
    /// Objective: bb84 or six-state.
    #[arg(long)]
    utility: Option<String>,
    /// Link length in km (overrides the config's length list).
    #[arg(long)]
    length_km: Option<f64>,
    /// Initial fidelity of generated pairs.
    #[arg(long)]
    f0: Option<f64>,
    /// Budget multiplier on episodes, iterations and evaluation trials.
    #[arg(long)]
    scale: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an RL policy at one link length.
    Train(CommonOpts),
    /// Evaluate a stored policy or explicit thresholds.
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
        /// Policy file produced by `train`.
        #[arg(long, conflicts_with_all = ["f_consume", "f_discard"])]
        policy: Option<PathBuf>,
        /// Consume threshold of a baseline policy.
        #[arg(long, requires = "f_discard")]
        f_consume: Option<f64>,
        /// Discard threshold of a baseline policy.
        #[arg(long, requires = "f_consume")]
        f_discard: Option<f64>,
        /// Evaluation trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Episodes per trial.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Grid-search consume/discard thresholds for the baseline.
    BaselineSearch(CommonOpts),
    /// Full protocol over every configured link length: baseline search,
    /// RL training, evaluation of both, relative difference, plots.
    Sweep(CommonOpts),
    /// Run the independent numeric oracles and exit non-zero on failure.
    OracleCheck {
        /// Reduced sample counts for a fast pass.
        #[arg(long)]
        quick: bool,
    },
}

fn build_config(opts: &CommonOpts) -> Result<ExperimentConfig, String> {
    let mut file: ConfigFile = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => {
            let env = opts
                .env
                .as_deref()
                .ok_or("either --config or --env is required")?;
            let utility = opts.utility.as_deref().unwrap_or("bb84");
            let f0 = opts.f0.ok_or("either --config or --f0 is required")?;
            toml::from_str(&format!(
                "[experiment]\nenvironment = \"{env}\"\nutility = \"{utility}\"\nf0 = {f0}\n"
            ))
            .map_err(|e| e.to_string())?
        }
    };
    if let Some(env) = &opts.env {
        file.experiment.environment = env.clone();
    }
    if let Some(utility) = &opts.utility {
        file.experiment.utility = utility.clone();
    }
    if let Some(f0) = opts.f0 {
        file.experiment.f0 = f0;
    }
    if let Some(seed) = opts.seed {
        file.experiment.seed = seed;
    }
    if let Some(scale) = opts.scale {
        file.experiment.scale = scale;
    }
    if let Some(out) = &opts.out {
        file.experiment.output_dir = out.display().to_string();
    }
    if let Some(length) = opts.length_km {
        file.experiment.link_lengths_km = vec![length];
    }
    ExperimentConfig::from_config_file(file).map_err(|e| e.to_string())
}

fn single_length(config: &ExperimentConfig, opts: &CommonOpts) -> f64 {
    opts.length_km.unwrap_or(config.link_lengths_km[0])
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(opts) => {
            let config = build_config(&opts)?;
            let length = single_length(&config, &opts);
            let run = harness::run_training(&config, length).map_err(|e| e.to_string())?;
            println!(
                "trained {} at L = {length} km (final utility estimate {:.6})",
                config.environment, run.final_utility
            );
            println!("policy:         {}", run.policy_path.display());
            println!("learning curve: {}", run.curve_path.display());
            if run.boundary_clamps > 1 {
                println!("note: boundary clamp activated {} times", run.boundary_clamps);
            }
            Ok(())
        }
        Command::Evaluate {
            common,
            policy,
            f_consume,
            f_discard,
            trials,
            episodes,
        } => {
            let mut config = build_config(&common)?;
            if let Some(t) = trials {
                config.evaluation.trials = t;
            }
            if let Some(e) = episodes {
                config.evaluation.episodes_per_trial = e;
            }
            let target = match (policy, f_consume, f_discard) {
                (Some(path), None, None) => EvalTarget::PolicyFile(path),
                (None, Some(fc), Some(fd)) => EvalTarget::Thresholds {
                    f_consume: fc,
                    f_discard: fd,
                },
                _ => {
                    return Err(
                        "provide either --policy FILE or both --f-consume and --f-discard".into(),
                    )
                }
            };
            let length = single_length(&config, &common);
            let (report, csv) =
                harness::run_evaluation(&config, length, &target).map_err(|e| e.to_string())?;
            println!(
                "{} at L = {length} km: utility = {:.6} +/- {:.6} (95% CI over {} trials)",
                config.environment,
                report.mean_utility,
                report.ci95_half_width,
                report.trial_utilities.len()
            );
            for (channel, mean) in report.channels.iter().zip(&report.mean_returns) {
                println!("  {} = {mean:.6e}", channel.label());
            }
            println!("per-trial rows: {}", csv.display());
            Ok(())
        }
        Command::BaselineSearch(opts) => {
            let config = build_config(&opts)?;
            let length = single_length(&config, &opts);
            let run =
                harness::run_baseline_search(&config, length).map_err(|e| e.to_string())?;
            println!(
                "best thresholds at L = {length} km: f_consume = {:.2}, f_discard = {:.2} (utility {:.6})",
                run.best.f_consume, run.best.f_discard, run.best_utility
            );
            println!("grid table: {}", run.table_path.display());
            Ok(())
        }
        Command::Sweep(opts) => {
            let config = build_config(&opts)?;
            let artifacts = harness::run_sweep(&config).map_err(|e| e.to_string())?;
            for length in &artifacts.summary.lengths {
                match (&length.error, &length.reldiff) {
                    (Some(err), _) => {
                        println!("L = {:>5} km: FAILED ({err})", length.length_km)
                    }
                    (None, Some(rd)) => {
                        let rl = length.rl.as_ref().map(|e| e.mean_utility).unwrap_or(f64::NAN);
                        let base = length
                            .baseline
                            .as_ref()
                            .map(|e| e.mean_utility)
                            .unwrap_or(f64::NAN);
                        println!(
                            "L = {:>5} km: rl = {rl:.4}, baseline = {base:.4}, reldiff = {:+.4}",
                            length.length_km, rd
                        );
                    }
                    _ => println!("L = {:>5} km: incomplete", length.length_km),
                }
            }
            println!("results:  {}", artifacts.results_csv_path.display());
            println!("summary:  {}", artifacts.summary_path.display());
            println!("plots:    {}", artifacts.utility_plot_path.display());
            println!("          {}", artifacts.reldiff_plot_path.display());
            Ok(())
        }
        Command::OracleCheck { quick } => {
            let reports = oracles::run_all_checks(quick);
            let mut failed = 0;
            for report in &reports {
                println!(
                    "[{}] {}: {}",
                    if report.pass { "PASS" } else { "FAIL" },
                    report.name,
                    report.detail
                );
                if !report.pass {
                    failed += 1;
                }
            }
            if failed > 0 {
                Err(format!("{failed} of {} oracle checks failed", reports.len()))
            } else {
                println!("all {} oracle checks passed", reports.len());
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
