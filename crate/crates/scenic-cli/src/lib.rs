//! The `scenic` command line: exploration runs, trace playback, action
//! model fitting, bottleneck training, experiments, and plots.
//!
//! Exit codes: 0 on success, 2 for usage mistakes (bad flags, bad
//! config), 1 for runtime failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use scenic::archive::Archive;
use scenic::embed::{
    training_data, BottleneckModel, EmbedSpec, TrainConfig, BOTTLENECK_DEFAULT_DIMS,
};
use scenic::env::GameId;
use scenic::explore::{
    run_attract, run_bootstrap, run_chaos_monkey, run_hybrid, run_rrt, BootstrapParams, RrtParams,
};
use scenic::harness::{plot_series, run_experiment, ExperimentConfig, HarnessError};
use scenic::trace::{fit_action_model, load_trace, playback, ActionModel, DEFAULT_CADENCE};

#[derive(Parser)]
#[command(name = "scenic", version, about = "Game state-space exploration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one exploration strategy and write its archive.
    Explore(ExploreArgs),
    /// Play a recorded trace back into an archive.
    Replay(ReplayArgs),
    /// Fit an empirical action model from a directory of traces.
    FitActions(FitActionsArgs),
    /// Train a bottleneck perception model on archived moments.
    TrainEmbed(TrainEmbedArgs),
    /// Run a full experiment config.
    Experiment(ExperimentArgs),
    /// Chart metric series CSVs as an SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    game: String,
    /// attract | chaos-monkey | rrt | hybrid | bootstrap
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    budget_frames: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CADENCE)]
    cadence: u32,
    /// Navigation embedding spec (rrt and hybrid).
    #[arg(long)]
    embed: Option<String>,
    /// Action model JSON (all strategies except attract).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    goal_inflation: Option<f64>,
    #[arg(long)]
    k_seeds: Option<usize>,
    /// Bootstrap only.
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    round_budget_frames: Option<u64>,
    #[arg(long, default_value_t = BOTTLENECK_DEFAULT_DIMS)]
    bottleneck_dims: usize,
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
    #[arg(long)]
    epochs: Option<u32>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CADENCE)]
    cadence: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitActionsArgs {
    /// Directory scanned for *.trc files.
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CADENCE)]
    cadence: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainEmbedArgs {
    /// Archive directory; repeat for more data, order matters.
    #[arg(long = "archive", required = true)]
    archives: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Continue training this model instead of starting fresh.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, default_value_t = BOTTLENECK_DEFAULT_DIMS)]
    dims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    shuffle_seed: Option<u64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Series CSV; repeat for more curves.
    #[arg(long = "series", required = true)]
    series: Vec<PathBuf>,
    /// One label per series, same order.
    #[arg(long = "labels", required = true)]
    labels: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses and executes an invocation, returning the process exit status.
/// `argv` includes the program name.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version land here too; they are not errors.
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Explore(args) => cmd_explore(args),
        Command::Replay(args) => cmd_replay(args),
        Command::FitActions(args) => cmd_fit_actions(args),
        Command::TrainEmbed(args) => cmd_train_embed(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn usage(msg: impl Into<String>) -> HarnessError {
    HarnessError::Usage(msg.into())
}

fn io_err(file: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        file: file.to_path_buf(),
        source,
    }
}

fn parse_game(name: &str) -> Result<GameId, HarnessError> {
    GameId::from_str(name).map_err(|e| usage(e.to_string()))
}

fn require_model(model: &Option<PathBuf>, strategy: &str) -> Result<ActionModel, HarnessError> {
    let path = model
        .as_deref()
        .ok_or_else(|| usage(format!("--model is required for {strategy}")))?;
    Ok(ActionModel::load(path)?)
}

fn build_embedder(
    spec: &Option<String>,
    strategy: &str,
) -> Result<Box<dyn scenic::embed::Embedder>, HarnessError> {
    let spec = spec
        .as_deref()
        .ok_or_else(|| usage(format!("--embed is required for {strategy}")))?;
    Ok(EmbedSpec::from_str(spec)?.build()?)
}

fn cmd_explore(args: ExploreArgs) -> Result<(), HarnessError> {
    let game = parse_game(&args.game)?;
    let budget = || {
        args.budget_frames
            .ok_or_else(|| usage("--budget-frames is required"))
    };
    let mut params = RrtParams {
        cadence_frames: args.cadence,
        ..RrtParams::default()
    };
    if let Some(inflation) = args.goal_inflation {
        params.goal_inflation = inflation;
    }
    if let Some(k) = args.k_seeds {
        params.k_seeds = k;
    }

    match args.strategy.as_str() {
        "attract" => {
            let archive = run_attract(game, budget()?, args.cadence);
            archive.write_dir(&args.out)?;
            println!("{} moments -> {}", archive.len(), args.out.display());
        }
        "chaos-monkey" => {
            let model = require_model(&args.model, "chaos-monkey")?;
            let archive = run_chaos_monkey(game, &model, budget()?, args.cadence, args.seed);
            archive.write_dir(&args.out)?;
            println!("{} moments -> {}", archive.len(), args.out.display());
        }
        "rrt" | "hybrid" => {
            let model = require_model(&args.model, &args.strategy)?;
            let embedder = build_embedder(&args.embed, &args.strategy)?;
            let (archive, tree) = if args.strategy == "rrt" {
                run_rrt(game, &model, embedder.as_ref(), budget()?, &params, args.seed)?
            } else {
                run_hybrid(game, &model, embedder.as_ref(), budget()?, &params, args.seed)?
            };
            archive.write_dir(&args.out)?;
            let tree_path = args.out.join("tree.json");
            std::fs::write(&tree_path, tree.to_json()).map_err(|e| io_err(&tree_path, e))?;
            println!(
                "{} moments, {} tree nodes -> {}",
                archive.len(),
                tree.nodes.len(),
                args.out.display()
            );
        }
        "bootstrap" => {
            let model = require_model(&args.model, "bootstrap")?;
            let rounds = args
                .rounds
                .ok_or_else(|| usage("--rounds is required for bootstrap"))?;
            let round_budget = args
                .round_budget_frames
                .ok_or_else(|| usage("--round-budget-frames is required for bootstrap"))?;
            let mut train = TrainConfig::default();
            if let Some(epochs) = args.epochs {
                train.epochs = epochs;
            }
            let boot_params = BootstrapParams {
                rounds,
                frames_per_round: round_budget,
                bottleneck_dims: args.bottleneck_dims,
                model_seed: args.model_seed,
                train,
            };
            let result = run_bootstrap(game, &model, &params, &boot_params, args.seed)?;
            std::fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
            for (i, archive) in result.rounds.iter().enumerate() {
                archive.write_dir(&args.out.join(format!("round_{}", i + 1)))?;
            }
            result.model.save(&args.out.join("model.bin"))?;
            println!(
                "{} rounds, final model -> {}",
                result.rounds.len(),
                args.out.display()
            );
        }
        other => return Err(usage(format!("unknown strategy `{other}`"))),
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<(), HarnessError> {
    let trace = load_trace(&args.trace)?;
    let archive = playback(&trace, args.cadence)?;
    archive.write_dir(&args.out)?;
    println!("{} moments -> {}", archive.len(), args.out.display());
    Ok(())
}

fn cmd_fit_actions(args: FitActionsArgs) -> Result<(), HarnessError> {
    let entries = std::fs::read_dir(&args.traces).map_err(|e| io_err(&args.traces, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "trc"))
        .collect();
    // Directory iteration order is platform noise; the pooled fit is not,
    // so pin it.
    paths.sort();
    if paths.is_empty() {
        return Err(HarnessError::Runtime(format!(
            "no .trc traces in {}",
            args.traces.display()
        )));
    }
    let mut traces = Vec::with_capacity(paths.len());
    for path in &paths {
        traces.push(load_trace(path)?);
    }
    let model = fit_action_model(&traces, args.cadence)?;
    model.save(&args.out)?;
    println!(
        "{} traces, {} states -> {}",
        traces.len(),
        model.weights().len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train_embed(args: TrainEmbedArgs) -> Result<(), HarnessError> {
    let mut data = Vec::new();
    for dir in &args.archives {
        let archive = Archive::read_dir(dir)?;
        data.extend(training_data(archive.training_pairs()));
    }
    let mut model = match &args.resume {
        Some(path) => BottleneckModel::load(path)?,
        None => BottleneckModel::fresh(args.dims, args.seed)?,
    };
    let mut cfg = TrainConfig::default();
    if let Some(epochs) = args.epochs {
        cfg.epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        cfg.batch_size = batch;
    }
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(seed) = args.shuffle_seed {
        cfg.shuffle_seed = seed;
    }
    let losses = model.train(&data, &cfg)?;
    model.save(&args.out)?;
    match losses.last() {
        Some(loss) => println!("{} pairs, final loss {loss:.6} -> {}", data.len(), args.out.display()),
        None => println!("{} pairs, zero epochs -> {}", data.len(), args.out.display()),
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), HarnessError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = args.out {
        cfg.out_dir = Some(out);
    }
    let summary = run_experiment(&cfg)?;
    for row in &summary.rows {
        println!(
            "{} {} {}: mean {:.6} [{:.6}, {:.6}]",
            row.game, row.strategy, row.metric, row.final_mean, row.final_min, row.final_max
        );
    }
    if !summary.failures.is_empty() {
        for failure in &summary.failures {
            eprintln!("run {} failed: {}", failure.run, failure.error);
        }
        return Err(HarnessError::Runtime(format!(
            "{} of the runs failed",
            summary.failures.len()
        )));
    }
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<(), HarnessError> {
    plot_series(&args.series, &args.labels, &args.out)?;
    println!("{}", args.out.display());
    Ok(())
}
