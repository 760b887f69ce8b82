//! Experiment runner: executes a matrix of (game, strategy, seed) runs
//! from a JSON config, writes archives and metric series under an output
//! directory, and aggregates final values into a summary.
//!
//! Layout under the output directory:
//!
//! ```text
//! summary.json
//! plot_<game>_<metric>.svg            one chart per game and metric
//! <game>_<strategy>_<seed>/           one directory per run
//!     manifest.json, moments.jsonl, screens/, mem/, snapshots/
//!     series_<metric>.csv             one per configured metric
//!     tree.json                       rrt and hybrid runs
//!     round_<n>/                      bootstrap runs: archive + series per round
//!     model.bin                       bootstrap runs: final trained model
//! ```

mod plot;

pub use plot::plot_series;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{Archive, ArchiveError};
use crate::embed::{EmbedError, EmbedSpec, Embedder, TrainConfig, BOTTLENECK_DEFAULT_DIMS};
use crate::env::GameId;
use crate::explore::{
    run_attract, run_bootstrap, run_chaos_monkey, run_hybrid, run_rrt, BootstrapParams,
    ExploreError, RrtParams, RrtTree,
};
use crate::metrics::{format_series_csv, series_from_archive, Metric, MetricError};
use crate::trace::{load_trace, playback, ActionModel, TraceError, DEFAULT_CADENCE};

pub const CONFIG_VERSION: u32 = 1;
pub const SUMMARY_VERSION: u32 = 1;

/// Environment variable overriding how many runs execute in parallel.
pub const WORKERS_ENV: &str = "SCENIC_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid config contents. The CLI reports these as usage errors.
    #[error("config: {0}")]
    Config(String),
    /// Invalid invocation, e.g. mismatched plot labels.
    #[error("{0}")]
    Usage(String),
    /// A run-level problem that is not a config mistake.
    #[error("{0}")]
    Runtime(String),
    #[error("cannot access {file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Series {
        file: PathBuf,
        #[source]
        source: MetricError,
    },
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl From<ExploreError> for HarnessError {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::Embed(inner) => HarnessError::Embed(inner),
        }
    }
}

impl HarnessError {
    /// True for errors that mean the invocation itself was wrong, as
    /// opposed to something failing while the work ran.
    pub fn is_usage(&self) -> bool {
        matches!(self, HarnessError::Config(_) | HarnessError::Usage(_))
    }
}

fn io_err(file: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        file: file.to_path_buf(),
        source,
    }
}

/// One strategy entry in an experiment config. The JSON form is tagged by
/// a `strategy` field:
///
/// ```json
/// { "strategy": "rrt", "model": "models/actions.json", "embed": "avg-rgb" }
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum StrategyConfig {
    Attract,
    /// Plays back a recorded trace; one trace per game in the experiment.
    Replay { traces: BTreeMap<String, PathBuf> },
    ChaosMonkey {
        model: PathBuf,
    },
    Rrt {
        model: PathBuf,
        /// Navigation embedding; defaults to the config-level embedding.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        embed: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal_inflation: Option<f64>,
    },
    Hybrid {
        model: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        embed: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal_inflation: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k_seeds: Option<usize>,
    },
    Bootstrap {
        model: PathBuf,
        rounds: u32,
        round_budget_frames: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bottleneck_dims: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model_seed: Option<u64>,
        /// Training epochs per round; defaults to the standard schedule.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epochs: Option<u32>,
    },
}

impl StrategyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::Attract => "attract",
            StrategyConfig::Replay { .. } => "replay",
            StrategyConfig::ChaosMonkey { .. } => "chaos-monkey",
            StrategyConfig::Rrt { .. } => "rrt",
            StrategyConfig::Hybrid { .. } => "hybrid",
            StrategyConfig::Bootstrap { .. } => "bootstrap",
        }
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<(), HarnessError> {
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        match self {
            StrategyConfig::Attract => {}
            StrategyConfig::Replay { traces } => traces.values_mut().for_each(anchor),
            StrategyConfig::ChaosMonkey { model } => anchor(model),
            StrategyConfig::Rrt { model, embed, .. }
            | StrategyConfig::Hybrid { model, embed, .. } => {
                anchor(model);
                if let Some(spec) = embed {
                    *spec = resolve_spec_string(spec, base)?;
                }
            }
            StrategyConfig::Bootstrap { model, .. } => anchor(model),
        }
        Ok(())
    }

    /// Paths this strategy reads at run time.
    fn referenced_files(&self) -> Vec<&Path> {
        match self {
            StrategyConfig::Attract => Vec::new(),
            StrategyConfig::Replay { traces } => traces.values().map(PathBuf::as_path).collect(),
            StrategyConfig::ChaosMonkey { model }
            | StrategyConfig::Rrt { model, .. }
            | StrategyConfig::Hybrid { model, .. }
            | StrategyConfig::Bootstrap { model, .. } => vec![model.as_path()],
        }
    }
}

fn resolve_spec_string(spec: &str, base: &Path) -> Result<String, HarnessError> {
    let mut parsed = EmbedSpec::from_str(spec)
        .map_err(|e| HarnessError::Config(format!("embedding spec: {e}")))?;
    parsed.resolve_paths(base);
    Ok(parsed.to_string())
}

fn default_cadence() -> u32 {
    DEFAULT_CADENCE
}

/// A full experiment: the cross product of games, strategies, and seeds,
/// one metric series per run and metric, aggregated into a summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: String,
    pub games: Vec<String>,
    pub seeds: Vec<u64>,
    pub budget_frames: u64,
    #[serde(default = "default_cadence")]
    pub cadence_frames: u32,
    /// Embedding used to compute the metric series for every run.
    pub embedding: String,
    pub metrics: Vec<String>,
    pub strategies: Vec<StrategyConfig>,
    /// Where results land. Usually supplied on the command line instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads a config file and anchors every relative path in it (trace
    /// and model references, embedding specs) to the file's directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.embedding = resolve_spec_string(&cfg.embedding, &base)?;
        for strategy in &mut cfg.strategies {
            strategy.resolve_paths(&base)?;
        }
        if let Some(out) = &mut cfg.out_dir {
            if out.is_relative() {
                *out = base.join(&out);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.version != CONFIG_VERSION {
            return fail(format!("unsupported config version {}", self.version));
        }
        if self.experiment.is_empty() {
            return fail("experiment id is empty".into());
        }
        if self.games.is_empty() {
            return fail("no games listed".into());
        }
        for game in &self.games {
            GameId::from_str(game).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        let mut seen_seeds = self.seeds.clone();
        seen_seeds.sort_unstable();
        seen_seeds.dedup();
        if seen_seeds.len() != self.seeds.len() {
            return fail("duplicate seeds would collide in one run directory".into());
        }
        if self.budget_frames == 0 {
            return fail("budget_frames must be positive".into());
        }
        if self.cadence_frames == 0 {
            return fail("cadence_frames must be positive".into());
        }
        EmbedSpec::from_str(&self.embedding)
            .map_err(|e| HarnessError::Config(format!("embedding spec: {e}")))?;
        if self.metrics.is_empty() {
            return fail("no metrics listed".into());
        }
        for (i, metric) in self.metrics.iter().enumerate() {
            Metric::from_str(metric).map_err(HarnessError::Config)?;
            if self.metrics[..i].contains(metric) {
                return fail(format!("metric `{metric}` listed twice"));
            }
        }
        if self.strategies.is_empty() {
            return fail("no strategies listed".into());
        }
        for (i, strategy) in self.strategies.iter().enumerate() {
            let name = strategy.name();
            if self.strategies[..i].iter().any(|s| s.name() == name) {
                return fail(format!(
                    "strategy `{name}` listed twice; run directories would collide"
                ));
            }
            match strategy {
                StrategyConfig::Replay { traces } => {
                    for game in &self.games {
                        if !traces.contains_key(game) {
                            return fail(format!("replay has no trace for game `{game}`"));
                        }
                    }
                    for key in traces.keys() {
                        GameId::from_str(key).map_err(|e| {
                            HarnessError::Config(format!("replay trace key: {e}"))
                        })?;
                    }
                }
                StrategyConfig::Rrt { embed, .. } | StrategyConfig::Hybrid { embed, .. } => {
                    if let Some(spec) = embed {
                        EmbedSpec::from_str(spec)
                            .map_err(|e| HarnessError::Config(format!("embedding spec: {e}")))?;
                    }
                }
                StrategyConfig::Bootstrap {
                    rounds,
                    round_budget_frames,
                    ..
                } => {
                    if *rounds == 0 {
                        return fail("bootstrap rounds must be positive".into());
                    }
                    if *round_budget_frames == 0 {
                        return fail("bootstrap round_budget_frames must be positive".into());
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SummaryRow {
    pub game: String,
    pub strategy: String,
    pub metric: String,
    /// Statistics over each seed's final series value.
    pub final_mean: f64,
    pub final_min: f64,
    pub final_max: f64,
    /// Per-seed series files, relative to the output directory, in seed
    /// order. For bootstrap runs these point at the final round.
    pub series: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunFailure {
    pub run: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentSummary {
    pub version: u32,
    pub experiment: String,
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<RunFailure>,
    /// Elapsed time for the whole experiment. The only field that varies
    /// between otherwise identical runs.
    pub wall_clock_seconds: f64,
}

impl ExperimentSummary {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<ExperimentSummary, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Runtime(format!("summary: {e}")))
    }
}

/// Everything one worker needs to execute a single (game, strategy, seed)
/// run without touching shared state.
struct RunJob {
    game: GameId,
    strategy: StrategyConfig,
    seed: u64,
    rel_dir: String,
    run_dir: PathBuf,
    budget: u64,
    cadence: u32,
    metric_spec: EmbedSpec,
    metrics: Vec<Metric>,
}

/// What a successful run reports back for aggregation: one series file
/// reference and final value per configured metric.
struct RunArtifacts {
    series_refs: Vec<String>,
    finals: Vec<f64>,
}

fn workers_from_env() -> Result<usize, HarnessError> {
    match std::env::var(WORKERS_ENV) {
        Ok(value) => value
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                HarnessError::Config(format!("{WORKERS_ENV} must be a positive integer"))
            }),
        Err(_) => Ok(1),
    }
}

/// Runs the full experiment matrix and writes all artifacts under the
/// config's output directory. Individual run failures do not abort the
/// experiment; they are recorded in the summary and it is the caller's
/// job to treat a non-empty failure list as an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    cfg.validate()?;
    let out_dir = cfg
        .out_dir
        .as_deref()
        .ok_or_else(|| HarnessError::Config("no output directory configured".into()))?;
    for strategy in &cfg.strategies {
        for file in strategy.referenced_files() {
            if !file.exists() {
                return Err(HarnessError::Config(format!(
                    "referenced file {} does not exist",
                    file.display()
                )));
            }
        }
    }
    if let EmbedSpec::BottleneckFile(path) = EmbedSpec::from_str(&cfg.embedding).expect("validated")
    {
        if !path.exists() {
            return Err(HarnessError::Config(format!(
                "referenced file {} does not exist",
                path.display()
            )));
        }
    }
    let workers = workers_from_env()?;
    let started = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let metric_spec = EmbedSpec::from_str(&cfg.embedding).expect("validated");
    let metrics: Vec<Metric> = cfg
        .metrics
        .iter()
        .map(|m| Metric::from_str(m).expect("validated"))
        .collect();

    // Job order is games x strategies x seeds; aggregation below indexes
    // into this layout arithmetically.
    let mut jobs = Vec::new();
    for game_name in &cfg.games {
        let game = GameId::from_str(game_name).expect("validated");
        for strategy in &cfg.strategies {
            for &seed in &cfg.seeds {
                let rel_dir = format!("{game_name}_{}_{seed}", strategy.name());
                jobs.push(RunJob {
                    game,
                    strategy: strategy.clone(),
                    seed,
                    run_dir: out_dir.join(&rel_dir),
                    rel_dir,
                    budget: cfg.budget_frames,
                    cadence: cfg.cadence_frames,
                    metric_spec: metric_spec.clone(),
                    metrics: metrics.clone(),
                });
            }
        }
    }

    // Fixed-size result slots let workers pull jobs from a shared counter
    // without ever contending on output order.
    let results: Vec<Mutex<Option<Result<RunArtifacts, HarnessError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let outcome = execute_run(&jobs[i]);
                *results[i].lock().unwrap() = Some(outcome);
            });
        }
    });
    let results: Vec<Result<RunArtifacts, HarnessError>> = results
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every job ran"))
        .collect();

    let mut failures = Vec::new();
    for (job, result) in jobs.iter().zip(&results) {
        if let Err(e) = result {
            failures.push(RunFailure {
                run: job.rel_dir.clone(),
                error: e.to_string(),
            });
        }
    }

    let seeds_per_strategy = cfg.seeds.len();
    let runs_per_game = cfg.strategies.len() * seeds_per_strategy;
    let job_index =
        |g: usize, s: usize, seed_idx: usize| g * runs_per_game + s * seeds_per_strategy + seed_idx;

    let mut rows = Vec::new();
    for (g, game_name) in cfg.games.iter().enumerate() {
        for (s, strategy) in cfg.strategies.iter().enumerate() {
            for (m, metric) in metrics.iter().enumerate() {
                let mut finals = Vec::new();
                let mut refs = Vec::new();
                for seed_idx in 0..seeds_per_strategy {
                    if let Ok(artifacts) = &results[job_index(g, s, seed_idx)] {
                        finals.push(artifacts.finals[m]);
                        refs.push(artifacts.series_refs[m].clone());
                    }
                }
                if finals.is_empty() {
                    continue;
                }
                let sum: f64 = finals.iter().sum();
                rows.push(SummaryRow {
                    game: game_name.clone(),
                    strategy: strategy.name().to_string(),
                    metric: metric.name().to_string(),
                    final_mean: sum / finals.len() as f64,
                    final_min: finals.iter().copied().fold(f64::INFINITY, f64::min),
                    final_max: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    series: refs,
                });
            }
        }
    }

    // One chart per (game, metric), first seed only: one curve per
    // strategy, bootstrap expanded into one curve per round.
    for (g, game_name) in cfg.games.iter().enumerate() {
        for (m, metric) in metrics.iter().enumerate() {
            let mut files = Vec::new();
            let mut labels = Vec::new();
            for (s, strategy) in cfg.strategies.iter().enumerate() {
                let job = &jobs[job_index(g, s, 0)];
                let Ok(artifacts) = &results[job_index(g, s, 0)] else {
                    continue;
                };
                if let StrategyConfig::Bootstrap { rounds, .. } = strategy {
                    for round in 1..=*rounds {
                        files.push(out_dir.join(format!(
                            "{}/round_{round}/series_{}.csv",
                            job.rel_dir,
                            metric.name()
                        )));
                        labels.push(format!("bootstrap-r{round}"));
                    }
                } else {
                    files.push(out_dir.join(&artifacts.series_refs[m]));
                    labels.push(strategy.name().to_string());
                }
            }
            if files.is_empty() {
                continue;
            }
            let out = out_dir.join(format!("plot_{game_name}_{}.svg", metric.name()));
            plot_series(&files, &labels, &out)?;
        }
    }

    let summary = ExperimentSummary {
        version: SUMMARY_VERSION,
        experiment: cfg.experiment.clone(),
        rows,
        failures,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let summary_path = out_dir.join("summary.json");
    std::fs::write(&summary_path, summary.to_json()).map_err(|e| io_err(&summary_path, e))?;
    Ok(summary)
}

/// Writes one archive directory plus its series CSVs; returns the series
/// file references (relative to the experiment output directory) and the
/// final value per metric.
fn write_archive_outputs(
    archive: &Archive,
    dir: &Path,
    rel: &str,
    embedder: &dyn Embedder,
    metrics: &[Metric],
) -> Result<(Vec<String>, Vec<f64>), HarnessError> {
    archive.write_dir(dir)?;
    let series = series_from_archive(archive, embedder, metrics)?;
    let mut refs = Vec::new();
    let mut finals = Vec::new();
    for (metric, points) in metrics.iter().zip(&series) {
        let (_, last) = *points
            .last()
            .ok_or_else(|| HarnessError::Runtime("run produced an empty archive".into()))?;
        let file = format!("series_{}.csv", metric.name());
        let path = dir.join(&file);
        std::fs::write(&path, format_series_csv(points)).map_err(|e| io_err(&path, e))?;
        refs.push(format!("{rel}/{file}"));
        finals.push(last);
    }
    Ok((refs, finals))
}

fn write_tree(tree: &RrtTree, run_dir: &Path) -> Result<(), HarnessError> {
    let path = run_dir.join("tree.json");
    std::fs::write(&path, tree.to_json()).map_err(|e| io_err(&path, e))
}

fn execute_run(job: &RunJob) -> Result<RunArtifacts, HarnessError> {
    std::fs::create_dir_all(&job.run_dir).map_err(|e| io_err(&job.run_dir, e))?;
    let metric_embedder = job.metric_spec.build()?;
    let rrt_params = |goal_inflation: Option<f64>, k_seeds: Option<usize>| {
        let mut params = RrtParams {
            cadence_frames: job.cadence,
            ..RrtParams::default()
        };
        if let Some(inflation) = goal_inflation {
            params.goal_inflation = inflation;
        }
        if let Some(k) = k_seeds {
            params.k_seeds = k;
        }
        params
    };
    let nav_embedder = |spec: &Option<String>| -> Result<Box<dyn Embedder>, HarnessError> {
        match spec {
            Some(s) => Ok(EmbedSpec::from_str(s)?.build()?),
            None => Ok(job.metric_spec.build()?),
        }
    };

    let (refs, finals) = match &job.strategy {
        StrategyConfig::Attract => {
            let archive = run_attract(job.game, job.budget, job.cadence);
            write_archive_outputs(
                &archive,
                &job.run_dir,
                &job.rel_dir,
                metric_embedder.as_ref(),
                &job.metrics,
            )?
        }
        StrategyConfig::Replay { traces } => {
            let path = &traces[job.game.name()];
            let trace = load_trace(path)?;
            let archive = playback(&trace, job.cadence)?;
            if archive.game != job.game {
                return Err(HarnessError::Runtime(format!(
                    "{} is a {} trace, run is for {}",
                    path.display(),
                    archive.game,
                    job.game
                )));
            }
            write_archive_outputs(
                &archive,
                &job.run_dir,
                &job.rel_dir,
                metric_embedder.as_ref(),
                &job.metrics,
            )?
        }
        StrategyConfig::ChaosMonkey { model } => {
            let model = ActionModel::load(model)?;
            let archive = run_chaos_monkey(job.game, &model, job.budget, job.cadence, job.seed);
            write_archive_outputs(
                &archive,
                &job.run_dir,
                &job.rel_dir,
                metric_embedder.as_ref(),
                &job.metrics,
            )?
        }
        StrategyConfig::Rrt {
            model,
            embed,
            goal_inflation,
        } => {
            let model = ActionModel::load(model)?;
            let embedder = nav_embedder(embed)?;
            let params = rrt_params(*goal_inflation, None);
            let (archive, tree) = run_rrt(
                job.game,
                &model,
                embedder.as_ref(),
                job.budget,
                &params,
                job.seed,
            )?;
            write_tree(&tree, &job.run_dir)?;
            write_archive_outputs(
                &archive,
                &job.run_dir,
                &job.rel_dir,
                metric_embedder.as_ref(),
                &job.metrics,
            )?
        }
        StrategyConfig::Hybrid {
            model,
            embed,
            goal_inflation,
            k_seeds,
        } => {
            let model = ActionModel::load(model)?;
            let embedder = nav_embedder(embed)?;
            let params = rrt_params(*goal_inflation, *k_seeds);
            let (archive, tree) = run_hybrid(
                job.game,
                &model,
                embedder.as_ref(),
                job.budget,
                &params,
                job.seed,
            )?;
            write_tree(&tree, &job.run_dir)?;
            write_archive_outputs(
                &archive,
                &job.run_dir,
                &job.rel_dir,
                metric_embedder.as_ref(),
                &job.metrics,
            )?
        }
        StrategyConfig::Bootstrap {
            model,
            rounds,
            round_budget_frames,
            bottleneck_dims,
            model_seed,
            epochs,
        } => {
            let model = ActionModel::load(model)?;
            let params = rrt_params(None, None);
            let mut train = TrainConfig::default();
            if let Some(e) = epochs {
                train.epochs = *e;
            }
            let boot_params = BootstrapParams {
                rounds: *rounds,
                frames_per_round: *round_budget_frames,
                bottleneck_dims: bottleneck_dims.unwrap_or(BOTTLENECK_DEFAULT_DIMS),
                model_seed: model_seed.unwrap_or(0),
                train,
            };
            let result = run_bootstrap(job.game, &model, &params, &boot_params, job.seed)?;
            result.model.save(&job.run_dir.join("model.bin"))?;
            let mut last = None;
            for (i, archive) in result.rounds.iter().enumerate() {
                let round_rel = format!("{}/round_{}", job.rel_dir, i + 1);
                let round_dir = job.run_dir.join(format!("round_{}", i + 1));
                last = Some(write_archive_outputs(
                    archive,
                    &round_dir,
                    &round_rel,
                    metric_embedder.as_ref(),
                    &job.metrics,
                )?);
            }
            last.expect("bootstrap rounds are validated positive")
        }
    };
    Ok(RunArtifacts {
        series_refs: refs,
        finals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Button, ControllerState, GameId};
    use crate::trace::{fit_action_model, Trace};

    fn buttons(list: &[Button]) -> ControllerState {
        ControllerState::new(list.iter().copied())
    }

    fn demo_trace() -> Trace {
        let mut trace = Trace::new(GameId::GridQuest);
        trace.push(ControllerState::EMPTY, 60);
        trace.push(buttons(&[Button::Start]), 30);
        trace.push(buttons(&[Button::Right]), 30);
        trace.push(ControllerState::EMPTY, 60);
        trace
    }

    fn write_fixture_assets(dir: &Path) -> (PathBuf, PathBuf) {
        let trace = demo_trace();
        let trace_path = dir.join("demo.trc");
        std::fs::write(&trace_path, trace.format()).unwrap();
        let model = fit_action_model(std::slice::from_ref(&trace), 30).unwrap();
        let model_path = dir.join("actions.json");
        model.save(&model_path).unwrap();
        (trace_path, model_path)
    }

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        let (trace_path, model_path) = write_fixture_assets(dir);
        ExperimentConfig {
            version: 1,
            experiment: "tiny".into(),
            games: vec!["gridquest".into()],
            seeds: vec![1, 2],
            budget_frames: 300,
            cadence_frames: 30,
            embedding: "avg-rgb".into(),
            metrics: vec!["nuclear-norm".into(), "bbox-sum".into()],
            strategies: vec![
                StrategyConfig::Attract,
                StrategyConfig::Replay {
                    traces: BTreeMap::from([("gridquest".to_string(), trace_path)]),
                },
                StrategyConfig::ChaosMonkey {
                    model: model_path.clone(),
                },
                StrategyConfig::Rrt {
                    model: model_path,
                    embed: None,
                    goal_inflation: None,
                },
            ],
            out_dir: Some(dir.join("out")),
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let good = tiny_config(dir.path());
        assert!(good.validate().is_ok());

        let mut cfg = good.clone();
        cfg.seeds.clear();
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));

        let mut cfg = good.clone();
        cfg.seeds = vec![3, 3];
        assert!(cfg.validate().is_err());

        let mut cfg = good.clone();
        cfg.budget_frames = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = good.clone();
        cfg.metrics = vec!["nuclear-norm".into(), "nuclear-norm".into()];
        assert!(cfg.validate().is_err());

        let mut cfg = good.clone();
        cfg.strategies.push(StrategyConfig::Attract);
        assert!(cfg.validate().is_err());

        let mut cfg = good.clone();
        cfg.games = vec!["gridquest".into(), "colorcavern".into()];
        // The replay entry has no colorcavern trace.
        assert!(cfg.validate().is_err());

        let mut cfg = good;
        cfg.embedding = "nonsense".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_round_trips_through_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.out_dir = None;
        let path = dir.path().join("exp.json");
        std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        let loaded = ExperimentConfig::load(&path).unwrap();
        assert_eq!(loaded.experiment, cfg.experiment);
        assert_eq!(loaded.strategies.len(), cfg.strategies.len());
        assert_eq!(loaded.embedding, "avg-rgb");
    }

    #[test]
    fn load_anchors_relative_paths_to_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_assets(dir.path());
        let json = r#"{
            "version": 1,
            "experiment": "anchored",
            "games": ["gridquest"],
            "seeds": [1],
            "budget_frames": 90,
            "embedding": "avg-rgb",
            "metrics": ["bbox-sum"],
            "strategies": [{ "strategy": "chaos-monkey", "model": "actions.json" }]
        }"#;
        let path = dir.path().join("exp.json");
        std::fs::write(&path, json).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        match &cfg.strategies[0] {
            StrategyConfig::ChaosMonkey { model } => {
                assert!(model.is_absolute() || model.starts_with(dir.path()));
                assert!(model.exists());
            }
            other => panic!("unexpected strategy {other:?}"),
        }
    }

    #[test]
    fn experiment_writes_artifacts_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let summary = run_experiment(&cfg).unwrap();
        assert!(summary.failures.is_empty(), "{:?}", summary.failures);
        // 1 game x 4 strategies x 2 metrics.
        assert_eq!(summary.rows.len(), 8);
        let out = cfg.out_dir.as_deref().unwrap();
        assert!(out.join("summary.json").exists());
        assert!(out.join("plot_gridquest_nuclear-norm.svg").exists());
        assert!(out.join("gridquest_attract_1/manifest.json").exists());
        assert!(out.join("gridquest_rrt_2/tree.json").exists());
        for row in &summary.rows {
            assert!(row.final_min <= row.final_mean && row.final_mean <= row.final_max);
            assert_eq!(row.series.len(), 2);
            for series_ref in &row.series {
                assert!(out.join(series_ref).exists(), "missing {series_ref}");
            }
        }
        // Attract's 300-frame budget at cadence 30 gives 10 moments.
        let archive = Archive::read_dir(&out.join("gridquest_attract_1")).unwrap();
        assert_eq!(archive.len(), 10);
    }

    #[test]
    fn summary_statistics_recompute_from_series_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let summary = run_experiment(&cfg).unwrap();
        let out = cfg.out_dir.as_deref().unwrap();
        for row in &summary.rows {
            let mut finals = Vec::new();
            for series_ref in &row.series {
                let text = std::fs::read_to_string(out.join(series_ref)).unwrap();
                let series = crate::metrics::parse_series_csv(&text).unwrap();
                finals.push(series.last().unwrap().1);
            }
            let mean: f64 = finals.iter().sum::<f64>() / finals.len() as f64;
            assert!((mean - row.final_mean).abs() <= 1e-12);
            let min = finals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(min, row.final_min);
            assert_eq!(max, row.final_max);
        }
    }

    #[test]
    fn experiments_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        let summary_a = run_experiment(&cfg).unwrap();
        let out_a = cfg.out_dir.clone().unwrap();
        cfg.out_dir = Some(dir.path().join("out_b"));
        let summary_b = run_experiment(&cfg).unwrap();
        let out_b = cfg.out_dir.clone().unwrap();

        assert_eq!(summary_a.rows, summary_b.rows);
        assert_eq!(summary_a.failures, summary_b.failures);
        for row in &summary_a.rows {
            for series_ref in &row.series {
                let a = std::fs::read(out_a.join(series_ref)).unwrap();
                let b = std::fs::read(out_b.join(series_ref)).unwrap();
                assert_eq!(a, b, "{series_ref} differs");
            }
        }
        let svg = "plot_gridquest_bbox-sum.svg";
        assert_eq!(
            std::fs::read(out_a.join(svg)).unwrap(),
            std::fs::read(out_b.join(svg)).unwrap()
        );
    }

    #[test]
    fn run_failures_are_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        // A colorcavern trace mapped under the gridquest key passes the
        // existence check but fails at run time.
        let mut wrong = Trace::new(GameId::ColorCavern);
        wrong.push(buttons(&[Button::Start]), 60);
        let wrong_path = dir.path().join("wrong.trc");
        std::fs::write(&wrong_path, wrong.format()).unwrap();
        cfg.strategies[1] = StrategyConfig::Replay {
            traces: BTreeMap::from([("gridquest".to_string(), wrong_path)]),
        };
        let summary = run_experiment(&cfg).unwrap();
        assert_eq!(summary.failures.len(), 2, "{:?}", summary.failures);
        assert!(summary.failures[0].run.starts_with("gridquest_replay"));
        assert!(summary.failures[0].error.contains("colorcavern"));
        // Rows for the other strategies are unaffected.
        assert!(summary.rows.iter().any(|r| r.strategy == "attract"));
        assert!(summary.rows.iter().all(|r| r.strategy != "replay"));
    }

    #[test]
    fn missing_referenced_file_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.strategies[2] = StrategyConfig::ChaosMonkey {
            model: dir.path().join("absent.json"),
        };
        match run_experiment(&cfg) {
            Err(HarnessError::Config(msg)) => assert!(msg.contains("absent.json")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn worker_env_parsing() {
        // The env var is process-global and other tests run in parallel,
        // so only exercise the unset default here.
        if std::env::var(WORKERS_ENV).is_err() {
            assert_eq!(workers_from_env().unwrap(), 1);
        }
    }
}
