//! Experiment harness around the congame library: JSON configs in, one CSV
//! of round metrics per seed out, plus a one-line JSON summary on stdout.
//!
//! Subcommands: run-dynamics, run-adversarial, decompose, project,
//! gen-chain, validate-config. Exit code 1 flags config validation failures
//! (with a line-referenced message on stderr), 2 flags runtime errors.
//!
//! Seeds run on parallel workers; each worker owns its output file, so runs
//! with the same config and seed are byte-identical regardless of worker
//! interleaving. Wall-clock time never enters the CSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;

use clap::{Args, Parser, Subcommand};
use congame::dynamics::{
    fit_rate, run_adversarial, run_dynamics, series_of, AdversarialRun, DynamicsRun, RoundRecord,
};
use congame::learner::Schedule;
use congame::polytope::{
    caratheodory_decompose, project, BoundedAwayView, FractionalStrategy, PathPolytope,
};
use serde_json::json;

use congame_cli::config;
use congame_cli::config::{ConfigError, ExperimentConfig};

/// Column contract shared by every run subcommand. Game-level columns are
/// NaN where the metric is undefined (off-stride rounds, adversarial runs,
/// zero-cost best responses).
const CSV_HEADER: &str = "t,agent_id,realized_cost,cum_cost,avg_regret,exploit_abs,exploit_rel,exploit_abs_avg,exploit_rel_avg,potential,stat_gap";

#[derive(Parser)]
#[command(
    name = "congame",
    version,
    about = "Semi-bandit learning experiments on congestion games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all configured agents learning simultaneously, one CSV per seed.
    RunDynamics(RunArgs),
    /// Run one agent against the configured adversary, one CSV per seed.
    RunAdversarial(RunArgs),
    /// Decompose a fractional strategy into a path mixture (JSON to stdout).
    Decompose {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated per-edge marginals, e.g. 0.3,0.7.
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        /// Which agent's polytope to decompose in.
        #[arg(long, default_value_t = 0)]
        agent: usize,
    },
    /// Project a point onto an agent's bounded-away polytope (JSON to stdout).
    Project {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated input coordinates, one per edge.
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<f64>,
        /// Exploration floor; must satisfy mu <= 1/(active edges).
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 0)]
        agent: usize,
    },
    /// Print a chain-topology graph spec as JSON (k segments, d parallel edges each).
    GenChain {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
    },
    /// Parse and validate a config file; exit 0 if it is usable.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output field).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the config's seed list with 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Metric stride override.
    #[arg(long)]
    stride: Option<u64>,
}

enum AppError {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

impl From<congame::Error> for AppError {
    fn from(e: congame::Error) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Runtime(e.to_string())
    }
}

fn config_err(message: impl Into<String>) -> AppError {
    AppError::Config(ConfigError {
        line: None,
        message: message.into(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunDynamics(args) => cmd_run_dynamics(args),
        Command::RunAdversarial(args) => cmd_run_adversarial(args),
        Command::Decompose { config, x, agent } => cmd_decompose(&config, x, agent),
        Command::Project {
            config,
            y,
            mu,
            agent,
        } => cmd_project(&config, y, mu, agent),
        Command::GenChain { k, d } => cmd_gen_chain(k, d),
        Command::ValidateConfig { config } => cmd_validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Applies the CLI overrides shared by both run subcommands.
fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<(), AppError> {
    if let Some(n) = args.seeds {
        if n == 0 {
            return Err(config_err("--seeds must be >= 1"));
        }
        cfg.seeds = (0..n).collect();
    }
    if let Some(k) = args.stride {
        if k == 0 {
            return Err(config_err("--stride must be >= 1"));
        }
        cfg.metric_stride = Some(k);
    }
    Ok(())
}

fn out_dir(cfg: &ExperimentConfig, args: &RunArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn seed_file(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

fn cmd_run_dynamics(args: RunArgs) -> Result<(), AppError> {
    let mut cfg = config::load(&args.config)?;
    apply_overrides(&mut cfg, &args)?;
    if cfg.costs.is_none() {
        return Err(config_err("run-dynamics requires a costs section"));
    }
    let game = cfg.build_game()?;
    let preset = cfg.schedule.to_preset().map_err(config_err)?;
    let init = cfg.init_mode();
    let stride = cfg.metric_stride();
    let dir = out_dir(&cfg, &args);
    fs::create_dir_all(&dir)?;

    let runs: Vec<(u64, DynamicsRun)> = thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let game = &game;
                let path = seed_file(&dir, seed);
                scope.spawn(move || -> Result<(u64, DynamicsRun), AppError> {
                    let run = run_dynamics(game, preset, init, cfg.t_max, seed, stride)?;
                    write_csv(&path, &run.records, game.agent_count())?;
                    Ok((seed, run))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;

    println!("{}", dynamics_summary(&cfg, &runs, &dir));
    Ok(())
}

fn cmd_run_adversarial(args: RunArgs) -> Result<(), AppError> {
    let mut cfg = config::load(&args.config)?;
    apply_overrides(&mut cfg, &args)?;
    let adversary = cfg
        .adversary
        .clone()
        .ok_or_else(|| config_err("run-adversarial requires an adversary section"))?;
    if cfg.agents.len() != 1 {
        return Err(config_err(format!(
            "run-adversarial needs exactly one agent, got {}",
            cfg.agents.len()
        )));
    }
    let preset = cfg.schedule.to_preset().map_err(config_err)?;
    let graph = config::build_graph(&cfg.graph)?;
    let (s, t) = cfg.agents[0];
    let polytope = Arc::new(PathPolytope::new(graph, s, t)?);
    let schedule = Schedule::new(
        preset,
        1,
        polytope.graph().edge_count(),
        polytope.active_count(),
        adversary.c_max(),
    );
    let init = cfg.init_mode();
    let stride = cfg.metric_stride();
    let dir = out_dir(&cfg, &args);
    fs::create_dir_all(&dir)?;

    let runs: Vec<(u64, AdversarialRun)> = thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let polytope = Arc::clone(&polytope);
                let adversary = adversary.clone();
                let path = seed_file(&dir, seed);
                scope.spawn(move || -> Result<(u64, AdversarialRun), AppError> {
                    let mut spec = adversary.to_spec();
                    let run = run_adversarial(
                        polytope, schedule, init, &mut spec, cfg.t_max, seed, stride,
                    )?;
                    write_csv(&path, &run.records, 1)?;
                    Ok((seed, run))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;

    println!("{}", adversarial_summary(&cfg, &runs, &dir));
    Ok(())
}

fn cmd_decompose(path: &Path, x: Vec<f64>, agent: usize) -> Result<(), AppError> {
    let (polytope, m) = agent_polytope(path, agent)?;
    if x.len() != m {
        return Err(config_err(format!(
            "--x has {} entries, graph has {m} edges",
            x.len()
        )));
    }
    let mix = caratheodory_decompose(&polytope, &FractionalStrategy::new(x))?;
    let atoms: Vec<_> = mix
        .atoms()
        .iter()
        .map(|(p, w)| json!({"path": p.edges(), "w": w}))
        .collect();
    println!("{}", serde_json::Value::Array(atoms));
    Ok(())
}

fn cmd_project(path: &Path, y: Vec<f64>, mu: f64, agent: usize) -> Result<(), AppError> {
    let (polytope, m) = agent_polytope(path, agent)?;
    if y.len() != m {
        return Err(config_err(format!(
            "--y has {} entries, graph has {m} edges",
            y.len()
        )));
    }
    let view = BoundedAwayView::new(&polytope, mu);
    view.validate()?;
    let x = project(&view, &y)?;
    println!("{}", json!(x.as_slice()));
    Ok(())
}

/// Loads a config and builds the polytope of one agent, for the point-wise
/// subcommands that need a geometry but no costs.
fn agent_polytope(path: &Path, agent: usize) -> Result<(PathPolytope, usize), AppError> {
    let cfg = config::load(path)?;
    let &(s, t) = cfg.agents.get(agent).ok_or_else(|| {
        config_err(format!(
            "agent {agent} out of range ({} configured)",
            cfg.agents.len()
        ))
    })?;
    let graph = config::build_graph(&cfg.graph)?;
    let m = graph.edge_count();
    Ok((PathPolytope::new(graph, s, t)?, m))
}

fn cmd_gen_chain(k: usize, d: usize) -> Result<(), AppError> {
    if k < 1 || d < 1 {
        return Err(config_err(format!(
            "need k >= 1 and d >= 1, got k={k}, d={d}"
        )));
    }
    let (nodes, edges) = config::gen_chain(k, d);
    println!("{}", json!({"nodes": nodes, "edges": edges}));
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), AppError> {
    config::load(path)?;
    println!("{}: ok", path.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "NaN".to_string(),
    }
}

fn write_csv(path: &Path, records: &[RoundRecord], n: usize) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        for i in 0..n {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                i,
                r.realized_cost[i],
                r.cum_cost[i],
                r.avg_regret[i],
                fmt_opt(r.exploitability.as_ref().map(|e| e.absolute)),
                fmt_opt(r.exploitability.as_ref().and_then(|e| e.relative)),
                fmt_opt(r.exploitability_avg.as_ref().map(|e| e.absolute)),
                fmt_opt(r.exploitability_avg.as_ref().and_then(|e| e.relative)),
                fmt_opt(r.potential),
                fmt_opt(r.stationarity_gap),
            )?;
        }
    }
    w.flush()
}

/// Pointwise mean of per-seed series sharing the same abscissae.
fn mean_series(per_seed: Vec<Vec<(f64, f64)>>) -> Vec<(f64, f64)> {
    let k = per_seed.len() as f64;
    let mut acc = per_seed[0].clone();
    for series in &per_seed[1..] {
        for (a, &(_, v)) in acc.iter_mut().zip(series) {
            a.1 += v;
        }
    }
    for a in &mut acc {
        a.1 /= k;
    }
    acc
}

fn slope_json(series: &[(f64, f64)]) -> serde_json::Value {
    match fit_rate(series) {
        Ok(s) => json!(s),
        Err(_) => serde_json::Value::Null,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut k) = (0.0, 0usize);
    for v in values {
        sum += v;
        k += 1;
    }
    sum / k as f64
}

/// Mean of an optional metric over seeds; null unless every seed defines it.
fn mean_opt(values: Vec<Option<f64>>) -> serde_json::Value {
    if values.iter().all(|v| v.is_some()) {
        json!(mean(values.into_iter().map(|v| v.unwrap())))
    } else {
        serde_json::Value::Null
    }
}

fn dynamics_summary(cfg: &ExperimentConfig, runs: &[(u64, DynamicsRun)], dir: &Path) -> String {
    let n = cfg.agents.len();
    let last = |run: &DynamicsRun| run.records.last().expect("t_max >= 1").clone();
    let final_avg_regret: Vec<f64> = (0..n)
        .map(|i| mean(runs.iter().map(|(_, r)| last(r).avg_regret[i])))
        .collect();
    let slope_avg_regret: Vec<serde_json::Value> = (0..n)
        .map(|i| {
            let per_seed: Vec<_> = runs
                .iter()
                .map(|(_, r)| series_of(&r.records, |rec| Some(rec.avg_regret[i])))
                .collect();
            slope_json(&mean_series(per_seed))
        })
        .collect();
    let exploit_series: Vec<_> = runs
        .iter()
        .map(|(_, r)| {
            series_of(&r.records, |rec| {
                rec.exploitability_avg.as_ref().map(|e| e.absolute)
            })
        })
        .collect();
    json!({
        "command": "run-dynamics",
        "out": dir.display().to_string(),
        "t_max": cfg.t_max,
        "seeds": cfg.seeds,
        "final_avg_regret": final_avg_regret,
        "final_exploit_abs": mean_opt(runs.iter().map(|(_, r)| last(r).exploitability.as_ref().map(|e| e.absolute)).collect()),
        "final_exploit_rel": mean_opt(runs.iter().map(|(_, r)| last(r).exploitability.as_ref().and_then(|e| e.relative)).collect()),
        "final_exploit_abs_avg": mean_opt(runs.iter().map(|(_, r)| last(r).exploitability_avg.as_ref().map(|e| e.absolute)).collect()),
        "final_exploit_rel_avg": mean_opt(runs.iter().map(|(_, r)| last(r).exploitability_avg.as_ref().and_then(|e| e.relative)).collect()),
        "slope_avg_regret": slope_avg_regret,
        "slope_exploit_abs_avg": slope_json(&mean_series(exploit_series)),
    })
    .to_string()
}

fn adversarial_summary(
    cfg: &ExperimentConfig,
    runs: &[(u64, AdversarialRun)],
    dir: &Path,
) -> String {
    let regret_series: Vec<_> = runs
        .iter()
        .map(|(_, r)| series_of(&r.records, |rec| Some(rec.avg_regret[0])))
        .collect();
    json!({
        "command": "run-adversarial",
        "out": dir.display().to_string(),
        "t_max": cfg.t_max,
        "seeds": cfg.seeds,
        "final_avg_regret": [mean(runs.iter().map(|(_, r)| r.regret / cfg.t_max as f64))],
        "regret_mean": mean(runs.iter().map(|(_, r)| r.regret)),
        "best_path_cost_mean": mean(runs.iter().map(|(_, r)| r.best_path_cost)),
        "slope_avg_regret": [slope_json(&mean_series(regret_series))],
    })
    .to_string()
}
