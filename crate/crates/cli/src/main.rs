use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use copipe::experiment::{self, DatasetSpec, EvalConfig, ExperimentConfig, TrainConfig};
use copipe::learning::BoundParams;

/// Learned combinatorial optimization pipelines: generate datasets, train
/// weights, evaluate gap tables and print learning bounds.
#[derive(Debug, Parser)]
#[command(name = "copipe", version)]
struct Cli {
    /// Worker threads (falls back to CO_PIPELINE_THREADS, then all cores).
    #[arg(long, global = true, env = "CO_PIPELINE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset directory with instances and a manifest.
    Generate(GenerateArgs),
    /// Train weights on a dataset.
    Train(TrainArgs),
    /// Evaluate weights on a dataset and write gap tables.
    Eval(EvalArgs),
    /// Print the excess-risk bound and the recommended perturbation scale.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the dataset seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Dataset directory written by `generate`.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for weights.json and report.json.
    #[arg(long)]
    out: PathBuf,
    /// Shifts the learner seeds to start at this value and sets the
    /// imitation seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Weights file written by `train`.
    #[arg(long)]
    weights: PathBuf,
    /// Output directory for gaps.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the perturbation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write 0 in the time_s column so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Bound parameters (JSON); defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    e_term: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let spec: DatasetSpec = match args.seed {
        Some(seed) => cfg.dataset.with_seed(seed),
        None => cfg.dataset,
    };
    let manifest = experiment::cmd_generate(&spec, &args.out)?;
    println!(
        "wrote {} instances to {}",
        manifest.instances.len(),
        args.out.display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = load_config(&args.config)?.train;
    if let Some(seed) = args.seed {
        let count = cfg.learner.seeds.len() as u64;
        cfg.learner.seeds = (seed..seed + count).collect();
        cfg.fyl.seed = seed;
    }
    let (_, report) = experiment::cmd_train(&cfg, &args.data, &args.out)?;
    println!(
        "best risk {:.6} (average over seeds {:.6}), weights in {}",
        report.best_value(),
        report.average_value(),
        args.out.join(experiment::WEIGHTS_FILE).display()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut cfg: EvalConfig = load_config(&args.config)?.eval;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.no_timing {
        cfg.timing = false;
    }
    let (_, summary) = experiment::cmd_eval(&cfg, &args.data, &args.weights, &args.out)?;
    println!(
        "{:<10} {:<22} {:>5} {:>10} {:>10}",
        "bucket", "algorithm", "count", "avg %", "max %"
    );
    for row in summary {
        println!(
            "{:<10} {:<22} {:>5} {:>10.4} {:>10.4}",
            row.bucket, row.algorithm, row.instances, row.delta_avg_pct, row.delta_max_pct
        );
    }
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let mut p: BoundParams = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => BoundParams::default(),
    };
    let overrides = [
        (args.m, &mut p.m),
        (args.d, &mut p.d),
        (args.sigma, &mut p.sigma),
        (args.n, &mut p.n),
        (args.delta, &mut p.delta),
        (args.b, &mut p.b),
        (args.kappa, &mut p.kappa),
        (args.e_term, &mut p.e_term),
    ];
    for (value, field) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }
    let report = experiment::cmd_bounds(&p)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("C                 {:.10}", report.c);
        println!("excess risk bound {:.10}", report.excess_risk_bound);
        println!("sigma_n           {:.10}", report.sigma_n);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Bounds(a) => bounds(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
