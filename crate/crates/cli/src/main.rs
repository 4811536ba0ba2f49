use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedsmooth_cli::commands::{cmd_ablate, cmd_bench, cmd_certify, cmd_train};
use fedsmooth_cli::config::ExperimentConfig;

/// Certifiably robust federated adversarial learning at desk scale.
#[derive(Parser)]
#[command(name = "fedsmooth", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file with `key = value` lines; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Training orchestration: fed or central.
    #[arg(long, global = true)]
    mode: Option<String>,

    /// Training ablation: standard, adv_only or adv_smooth.
    #[arg(long, global = true)]
    ablation: Option<String>,

    /// Smoothing noise standard deviation.
    #[arg(long, global = true)]
    sigma: Option<f64>,

    /// Attack budget as a pixel-scale integer (effective ℓ₂ budget /256).
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Gradient estimator: stochastic or one_point.
    #[arg(long, global = true)]
    estimator: Option<String>,

    /// Device data heterogeneity ratio in (0,1).
    #[arg(long, global = true)]
    gamma: Option<f64>,

    /// Root random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Scale preset: desk or paper.
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus a round log.
    Train,
    /// Certify test points with a checkpoint and write the accuracy curve.
    Certify {
        /// Checkpoint path; defaults to <out>/model.params.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Time the two attack estimators on identical inputs.
    Bench,
    /// Run the three training ablations back-to-back and certify each.
    Ablate,
}

impl Cli {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut pairs = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                pairs.push((key.to_string(), v));
            }
        };
        push("preset", self.preset.clone());
        push("mode", self.mode.clone());
        push("ablation", self.ablation.clone());
        push("sigma", self.sigma.map(|v| v.to_string()));
        push("epsilon", self.epsilon.map(|v| v.to_string()));
        push("estimator", self.estimator.clone());
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        pairs
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::parse(cli.config.as_deref(), &cli.overrides())?;
    match &cli.command {
        Command::Train => {
            let artifacts = cmd_train(&cfg)?;
            let last_loss = artifacts.run.rounds.last().map_or(f64::NAN, |r| r.mean_loss);
            println!(
                "trained {} rounds (final mean loss {last_loss:.4}); checkpoint {}, log {}",
                artifacts.run.rounds.len(),
                artifacts.checkpoint.display(),
                artifacts.rounds_csv.display()
            );
        }
        Command::Certify { checkpoint } => {
            let artifacts = cmd_certify(&cfg, checkpoint.as_deref())?;
            println!(
                "certified {} points: accuracy at radius 0 = {:.3}; curve {}",
                artifacts.points,
                artifacts.curve.first().map_or(0.0, |p| p.certified_accuracy),
                artifacts.curve_csv.display()
            );
        }
        Command::Bench => {
            let report = cmd_bench(&cfg)?;
            println!(
                "{} attacks per estimator: stochastic {:.6}s, one_point {:.6}s, ratio {:.2}; report {}",
                report.attacks,
                report.mean_stochastic_seconds,
                report.mean_one_point_seconds,
                report.ratio,
                report.report_path.display()
            );
        }
        Command::Ablate => {
            let path = cmd_ablate(&cfg)?;
            println!("ablation curves written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
