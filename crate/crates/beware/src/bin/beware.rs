//! Command-line front end for the regret benchmark.
//!
//! `beware simulate` runs one policy on a synthetic or CSV-backed ground
//! truth; `beware compare` runs several policies on shared per-run seeds so
//! their curves are directly comparable. Output is CSV with one row per
//! step per policy: `policy,step,mean_cum_regret,stderr`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beware::datagen::{generate_ground_truth, BlockModelSpec};
use beware::factorization::FitConfig;
use beware::ingest::{densify, load_csv};
use beware::sim::{aggregate, episode_seeds, run_episodes, EpisodeConfig, Policy, RegretCurve};
use beware::truth::GroundTruth;

#[derive(Parser)]
#[command(name = "beware", version, about = "Bandit-driven cold-start recommendation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy and write its mean regret curve.
    Simulate {
        /// Policy name (greedy-als, greedy-als-wr, ucb-all-users, beware-user,
        /// beware-als-user, beware-item, beware-als-item, oracle, random).
        #[arg(long)]
        policy: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run several policies on shared seeds and write all curves.
    Compare {
        /// Comma-separated policy names.
        #[arg(long)]
        policies: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// `synthetic` or `csv:PATH`.
    #[arg(long, default_value = "synthetic")]
    dataset: String,
    /// Factorization rank.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,
    /// Exploration scale of the confidence-ellipsoid bonus.
    #[arg(long, default_value_t = 0.12)]
    alpha: f64,
    /// Users in the synthetic matrix, or heaviest users kept from a CSV.
    #[arg(long, default_value_t = 200)]
    users: usize,
    /// Items in the synthetic matrix, or most-rated items kept from a CSV.
    #[arg(long, default_value_t = 100)]
    items: usize,
    /// Item genres of the synthetic block model.
    #[arg(long, default_value_t = 5)]
    genres: usize,
    /// User types of the synthetic block model.
    #[arg(long, default_value_t = 5)]
    types: usize,
    /// Feedback noise standard deviation (default 0.5 synthetic, 0 for CSV).
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Episodes per policy.
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Base seed; per-run seeds derive from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// ALS sweeps per warm-started refit.
    #[arg(long, default_value_t = 2)]
    refit_sweeps: usize,
    /// Refit the factor model every N observations.
    #[arg(long, default_value_t = 1)]
    refit_every: usize,
    /// Cold (from-scratch) refit every N observations; 0 = never.
    #[arg(long, default_value_t = 0)]
    cold_refit_every: usize,
    /// Fraction of cells revealed before the episode starts.
    #[arg(long, default_value_t = 0.0)]
    warmup_frac: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Data(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn parse_policies(list: &str) -> Result<Vec<Policy>, CliError> {
    let mut policies = Vec::new();
    for name in list.split(',').filter(|s| !s.trim().is_empty()) {
        let policy: Policy = name
            .parse()
            .map_err(|e| CliError::Usage(format!("{e}")))?;
        if !policies.contains(&policy) {
            policies.push(policy);
        }
    }
    if policies.is_empty() {
        return Err(CliError::Usage("no policies given".into()));
    }
    Ok(policies)
}

fn load_ground_truth(args: &CommonArgs) -> Result<(GroundTruth, f64), CliError> {
    if args.users == 0 || args.items == 0 {
        return Err(CliError::Usage("--users and --items must be at least 1".into()));
    }
    if args.dataset == "synthetic" {
        let mut spec = BlockModelSpec::new(args.users, args.items, args.genres, args.types, args.seed);
        spec.noise_sigma = args.noise_sigma.unwrap_or(0.5);
        let truth = generate_ground_truth(&spec)
            .map_err(|e| CliError::Usage(format!("{e}")))?;
        Ok((truth, spec.noise_sigma))
    } else if let Some(path) = args.dataset.strip_prefix("csv:") {
        let raw = load_csv(path).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
        let dense = densify(&raw, args.users, args.items)
            .map_err(|e| CliError::Data(format!("{path}: {e}")))?;
        eprintln!(
            "densified {} to {}x{} with fill rate {:.3} ({:.1}% missing)",
            path,
            dense.truth.n_users(),
            dense.truth.n_items(),
            dense.fill_rate,
            100.0 * (1.0 - dense.fill_rate),
        );
        Ok((dense.truth, args.noise_sigma.unwrap_or(0.0)))
    } else {
        Err(CliError::Usage(format!(
            "--dataset must be `synthetic` or `csv:PATH`, got {:?}",
            args.dataset
        )))
    }
}

fn run_policy(
    truth: &GroundTruth,
    policy: Policy,
    args: &CommonArgs,
    noise_sigma: f64,
    seeds: &[u64],
) -> Result<RegretCurve, CliError> {
    let mut fit = FitConfig::new(args.k, args.lambda);
    fit.seed = args.seed;
    let mut config = EpisodeConfig::new(policy, fit, args.alpha, args.seed);
    config.refit_sweeps = args.refit_sweeps;
    config.noise_sigma = noise_sigma;
    config.refit_every = args.refit_every;
    config.cold_refit_every = args.cold_refit_every;
    config.warmup_frac = args.warmup_frac;
    let traces =
        run_episodes(truth, &config, seeds).map_err(|e| CliError::Data(format!("{policy}: {e}")))?;
    aggregate(&traces).map_err(|e| CliError::Data(format!("{policy}: {e}")))
}

fn write_curves(out: &PathBuf, curves: &[(Policy, RegretCurve)]) -> Result<(), CliError> {
    let file = File::create(out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "policy,step,mean_cum_regret,stderr")?;
        for (policy, curve) in curves {
            for t in 0..curve.len() {
                writeln!(w, "{},{},{},{}", policy, t + 1, curve.mean[t], curve.stderr[t])?;
            }
        }
        w.flush()
    };
    emit().map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (policies, common) = match cli.command {
        Command::Simulate { policy, common } => (parse_policies(&policy)?, common),
        Command::Compare { policies, common } => (parse_policies(&policies)?, common),
    };
    if common.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let (truth, noise_sigma) = load_ground_truth(&common)?;
    let seeds = episode_seeds(common.seed, common.runs);
    let mut curves = Vec::new();
    for policy in policies {
        let curve = run_policy(&truth, policy, &common, noise_sigma, &seeds)?;
        eprintln!(
            "{policy}: {} steps/run, final mean cumulative regret {:.3}",
            curve.len(),
            curve.final_mean(),
        );
        curves.push((policy, curve));
    }
    write_curves(&common.out, &curves)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's rendering, but exit code 1 for every usage problem
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.code()
        }
    }
}
