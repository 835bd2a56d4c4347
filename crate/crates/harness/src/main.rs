use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pfdesign_harness::{config::RunConfig, output, run, Experiment};

/// Simulations for probabilistic factorial experimental design.
#[derive(Parser)]
#[command(name = "pfdesign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean error against ℓ∞ distance of random dosages from the half dosage.
    PassiveSweep(Flags),
    /// Mean error when every treatment gets the same dosage.
    UniformSweep(Flags),
    /// Multi-round comparison of optimal, random, half and partial designs.
    ActiveCompare(Flags),
    /// Distance sweep around the uniform dosage under a supply budget.
    ConstrainedSweep(Flags),
    /// Distance sweep fitting a low-order model to a full-degree truth.
    MisspecifiedSweep(Flags),
    /// Resolution V fractional factorial against the half dosage.
    FractionalCompare(Flags),
    /// Dosage whose product distribution best matches a target distribution.
    Emulate(Flags),
}

/// Every flag overrides the matching key of `--config`. Lists are
/// comma-separated.
#[derive(Args, Default)]
struct Flags {
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of treatments (list).
    #[arg(long)]
    p: Option<String>,
    /// Interaction order of the model.
    #[arg(long)]
    k: Option<String>,
    /// Orders assumed by the estimator in misspecified_sweep (list).
    #[arg(long)]
    k_assumed: Option<String>,
    /// Samples per round (list).
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    /// Noise standard deviation.
    #[arg(long)]
    sigma: Option<String>,
    /// Supply budget: Σ d_i ≤ budget.
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Dosages sampled per grid distance.
    #[arg(long)]
    dosages: Option<String>,
    /// Distances, or dosage values for uniform_sweep (list).
    #[arg(long)]
    grid: Option<String>,
    /// Subset of optimal,random,half,partial.
    #[arg(long)]
    strategies: Option<String>,
    /// Master seed [default: 0].
    #[arg(long)]
    seed: Option<String>,
    /// Output directory [default: results/<experiment>].
    #[arg(long)]
    out: Option<String>,
    /// ols (truncated OLS) or ridge (OLS+Ridge).
    #[arg(long)]
    estimator: Option<String>,
    /// Norm bound passed to the estimator [default: ‖β‖ of the model].
    #[arg(long)]
    bound: Option<String>,
    /// Random dosages compared against in emulate.
    #[arg(long)]
    comparators: Option<String>,
    /// Target distribution file for emulate.
    #[arg(long)]
    target: Option<String>,
    /// Acquisition objective: eigen_sum or min_eig.
    #[arg(long)]
    objective: Option<String>,
    /// Optimizer restarts per acquisition.
    #[arg(long)]
    restarts: Option<String>,
}

impl Flags {
    fn overrides(&self) -> [(&'static str, &Option<String>); 19] {
        [
            ("p", &self.p),
            ("k", &self.k),
            ("k-assumed", &self.k_assumed),
            ("n", &self.n),
            ("rounds", &self.rounds),
            ("sigma", &self.sigma),
            ("budget", &self.budget),
            ("trials", &self.trials),
            ("dosages", &self.dosages),
            ("grid", &self.grid),
            ("strategies", &self.strategies),
            ("seed", &self.seed),
            ("out", &self.out),
            ("estimator", &self.estimator),
            ("bound", &self.bound),
            ("comparators", &self.comparators),
            ("target", &self.target),
            ("objective", &self.objective),
            ("restarts", &self.restarts),
        ]
    }
}

fn resolve(experiment: Experiment, flags: &Flags) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::defaults(experiment);
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    for (key, value) in flags.overrides() {
        if let Some(value) = value {
            cfg.set(key, value)?;
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = match &cli.command {
        Command::PassiveSweep(f) => (Experiment::PassiveSweep, f),
        Command::UniformSweep(f) => (Experiment::UniformSweep, f),
        Command::ActiveCompare(f) => (Experiment::ActiveCompare, f),
        Command::ConstrainedSweep(f) => (Experiment::ConstrainedSweep, f),
        Command::MisspecifiedSweep(f) => (Experiment::MisspecifiedSweep, f),
        Command::FractionalCompare(f) => (Experiment::FractionalCompare, f),
        Command::Emulate(f) => (Experiment::Emulate, f),
    };
    let result = resolve(experiment, flags).and_then(|cfg| {
        let report = run(&cfg)?;
        if let Some(em) = &report.emulate {
            let d: Vec<String> = em.dosage.iter().map(|v| format!("{v:.6}")).collect();
            println!("dosage = [{}]", d.join(", "));
            println!("kl = {:.6e} (best of {} random dosages: {:.6e})", em.kl, em.comparators.len(), em.best_comparator());
        } else {
            for s in &report.summary {
                println!(
                    "{:<24} {:<10} round {:>2} level {:<5} n={:<5} mse {:.5} ± {:.5}",
                    s.series, s.strategy, s.round, s.level, s.count, s.mean_mse, s.std_mse
                );
            }
        }
        for path in output::write_report(&cfg, &report)? {
            eprintln!("wrote {}", path.display());
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
