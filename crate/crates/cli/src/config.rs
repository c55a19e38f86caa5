//! Experiment configuration: the JSON schema, semantic validation with
//! line-referenced messages, and conversion into simulator types.
//!
//! A config names a graph (explicit node/edge lists or a chain generator),
//! the agents' terminal pairs, congestion costs (tables or affine), a
//! schedule preset, the horizon, and the seed list. Costs are optional for
//! adversarial runs, where the adversary supplies them instead.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use congame::dynamics::AdversarySpec;
use congame::game::CongestionGame;
use congame::graph::{build_dag, shortest_path, Dag, NodeId};
use congame::learner::{InitMode, SchedulePreset};
use serde::{Deserialize, Serialize};

/// A config rejection. `line` is a best-effort 1-based reference into the
/// raw JSON text (exact for parse errors, first occurrence of the offending
/// key for semantic ones).
#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    /// One (source, sink) pair per agent.
    pub agents: Vec<(NodeId, NodeId)>,
    /// Congestion costs; required by `run-dynamics`, ignored by adversarial
    /// runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostSpec>,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub t_max: u64,
    pub seeds: Vec<u64>,
    /// Rounds between expensive diagnostics; defaults to max(1, t_max/500).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_stride: Option<u64>,
    /// Directory for per-seed CSV files; overridable with --out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Cost source for `run-adversarial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryConfig>,
    /// "feasible-construction" (default) or "uniform-mix".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
}

/// Either an explicit DAG or a chain-generator invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Chain(ChainGraph),
    Explicit(ExplicitGraph),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainGraph {
    pub chain: ChainParams,
}

/// k consecutive segments, d parallel edges each: k+1 nodes, d^k paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    pub k: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitGraph {
    pub nodes: usize,
    pub edges: Vec<(NodeId, NodeId)>,
}

/// Per-edge cost tables, or affine coefficients expanded to tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Tables(TableCosts),
    Affine(AffineCosts),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableCosts {
    /// tables[e][load] for load 0..=n.
    pub tables: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineCosts {
    /// (a, b) per edge: cost at load l is a*l + b, with a >= 0 so the
    /// expanded table is nondecreasing.
    pub affine: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSpec {
    /// "default", "regret-optimal", "nash-tuned", or "custom".
    pub preset: String,
    /// Step-size constant; only meaningful with the custom preset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_gamma: Option<f64>,
    /// Floor constant; only meaningful with the custom preset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_mu: Option<f64>,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            preset: "default".to_string(),
            c_gamma: None,
            c_mu: None,
        }
    }
}

impl ScheduleSpec {
    pub fn to_preset(&self) -> Result<SchedulePreset, String> {
        let custom = self.preset == "custom";
        if !custom && (self.c_gamma.is_some() || self.c_mu.is_some()) {
            return Err("c_gamma/c_mu overrides require preset \"custom\"".to_string());
        }
        match self.preset.as_str() {
            "default" => Ok(SchedulePreset::Default),
            "regret-optimal" => Ok(SchedulePreset::RegretOptimal),
            "nash-tuned" => Ok(SchedulePreset::NashTuned),
            "custom" => {
                let c_gamma = self.c_gamma.unwrap_or(1.0);
                let c_mu = self.c_mu.unwrap_or(1.0);
                if !(c_gamma > 0.0) || !(c_mu > 0.0) {
                    return Err(format!(
                        "custom constants must be positive, got c_gamma={c_gamma}, c_mu={c_mu}"
                    ));
                }
                Ok(SchedulePreset::Custom { c_gamma, c_mu })
            }
            other => Err(format!(
                "unknown preset {other:?}; expected default, regret-optimal, nash-tuned, or custom"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AdversaryConfig {
    Iid(IidAdversary),
    Fixed(FixedAdversary),
    Replay(ReplayAdversary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidAdversary {
    pub iid_random: IidParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidParams {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedAdversary {
    pub fixed_sequence: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayAdversary {
    pub load_replay: ReplayParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayParams {
    pub loads: Vec<Vec<usize>>,
    pub cost_tables: Vec<Vec<f64>>,
}

impl AdversaryConfig {
    pub fn to_spec(&self) -> AdversarySpec {
        match self {
            AdversaryConfig::Iid(a) => AdversarySpec::IidRandom {
                lo: a.iid_random.lo,
                hi: a.iid_random.hi,
            },
            AdversaryConfig::Fixed(a) => AdversarySpec::FixedSequence {
                costs: a.fixed_sequence.clone(),
            },
            AdversaryConfig::Replay(a) => AdversarySpec::LoadReplay {
                loads: a.load_replay.loads.clone(),
                cost_tables: a.load_replay.cost_tables.clone(),
            },
        }
    }

    /// The largest cost this adversary can emit; scales the tuned schedules.
    pub fn c_max(&self) -> f64 {
        match self {
            AdversaryConfig::Iid(a) => a.iid_random.hi,
            AdversaryConfig::Fixed(a) => a
                .fixed_sequence
                .iter()
                .flatten()
                .copied()
                .fold(0.0, f64::max),
            AdversaryConfig::Replay(a) => a
                .load_replay
                .cost_tables
                .iter()
                .flatten()
                .copied()
                .fold(0.0, f64::max),
        }
    }
}

/// Chain generator: k+1 nodes in a line, d parallel edges per consecutive
/// pair, listed segment-major so edge ids group by segment.
pub fn gen_chain(k: usize, d: usize) -> (usize, Vec<(NodeId, NodeId)>) {
    let mut edges = Vec::with_capacity(k * d);
    for seg in 0..k {
        for _ in 0..d {
            edges.push((seg, seg + 1));
        }
    }
    (k + 1, edges)
}

pub fn build_graph(spec: &GraphSpec) -> congame::Result<Arc<Dag>> {
    let (nodes, edges) = match spec {
        GraphSpec::Chain(c) => gen_chain(c.chain.k, c.chain.d),
        GraphSpec::Explicit(g) => (g.nodes, g.edges.clone()),
    };
    build_dag(nodes, &edges).map(Arc::new)
}

/// Expands the cost spec to per-edge tables over loads 0..=n.
pub fn expand_costs(spec: &CostSpec, n: usize) -> Vec<Vec<f64>> {
    match spec {
        CostSpec::Tables(t) => t.tables.clone(),
        CostSpec::Affine(a) => a
            .affine
            .iter()
            .map(|&(slope, intercept)| (0..=n).map(|l| slope * l as f64 + intercept).collect())
            .collect(),
    }
}

impl ExperimentConfig {
    pub fn metric_stride(&self) -> u64 {
        self.metric_stride.unwrap_or((self.t_max / 500).max(1))
    }

    pub fn init_mode(&self) -> InitMode {
        match self.init.as_deref() {
            Some("uniform-mix") => InitMode::UniformMix,
            _ => InitMode::FeasibleConstruction,
        }
    }

    /// Builds the game for `run-dynamics`; call only on validated configs
    /// with costs present.
    pub fn build_game(&self) -> congame::Result<CongestionGame> {
        let graph = build_graph(&self.graph)?;
        let costs = expand_costs(
            self.costs.as_ref().expect("validated config has costs"),
            self.agents.len(),
        );
        CongestionGame::new(graph, self.agents.clone(), costs)
    }
}

/// Parses raw JSON into a config; parse failures carry serde's line number.
pub fn parse(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    serde_json::from_str(raw).map_err(|e| {
        let line = if e.line() > 0 { Some(e.line()) } else { None };
        ConfigError::new(line, e.to_string())
    })
}

/// 1-based line of the first occurrence of `"key"` in the raw text.
fn line_of(raw: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let pos = raw.find(&needle)?;
    Some(raw[..pos].bytes().filter(|&b| b == b'\n').count() + 1)
}

/// Semantic validation beyond the schema. `raw` is the original text, used
/// only to locate offending keys for the error message.
pub fn validate(cfg: &ExperimentConfig, raw: &str) -> Result<(), ConfigError> {
    let fail = |key: &str, msg: String| Err(ConfigError::new(line_of(raw, key), msg));

    if let GraphSpec::Chain(c) = &cfg.graph {
        if c.chain.k < 1 || c.chain.d < 1 {
            return fail(
                "chain",
                format!(
                    "chain needs k >= 1 and d >= 1, got k={}, d={}",
                    c.chain.k, c.chain.d
                ),
            );
        }
    }
    let graph = match build_graph(&cfg.graph) {
        Ok(g) => g,
        Err(e) => return fail("graph", e.to_string()),
    };
    let m = graph.edge_count();

    if cfg.agents.is_empty() {
        return fail("agents", "need at least one agent".to_string());
    }
    for (i, &(s, t)) in cfg.agents.iter().enumerate() {
        if s >= graph.node_count() || t >= graph.node_count() {
            return fail(
                "agents",
                format!(
                    "agent {i}: terminal ({s}, {t}) out of range for {} nodes",
                    graph.node_count()
                ),
            );
        }
        let zeros = vec![0.0; m];
        if shortest_path(&graph, s, t, &zeros).is_err() {
            return fail("agents", format!("agent {i}: no path from {s} to {t}"));
        }
    }

    if let Some(costs) = &cfg.costs {
        let n = cfg.agents.len();
        match costs {
            CostSpec::Tables(t) => {
                if t.tables.len() != m {
                    return fail(
                        "tables",
                        format!("{} cost tables for {m} edges", t.tables.len()),
                    );
                }
                for (e, table) in t.tables.iter().enumerate() {
                    if table.len() != n + 1 {
                        return fail(
                            "tables",
                            format!(
                                "edge {e}: table has {} entries, need {} (loads 0..={n})",
                                table.len(),
                                n + 1
                            ),
                        );
                    }
                    if table.iter().any(|c| !c.is_finite() || *c < 0.0) {
                        return fail("tables", format!("edge {e}: costs must be finite and >= 0"));
                    }
                    if table.windows(2).any(|w| w[1] < w[0]) {
                        return fail("tables", format!("edge {e}: table must be nondecreasing"));
                    }
                }
            }
            CostSpec::Affine(a) => {
                if a.affine.len() != m {
                    return fail(
                        "affine",
                        format!("{} affine pairs for {m} edges", a.affine.len()),
                    );
                }
                for (e, &(slope, intercept)) in a.affine.iter().enumerate() {
                    if !slope.is_finite()
                        || !intercept.is_finite()
                        || slope < 0.0
                        || intercept < 0.0
                    {
                        return fail(
                            "affine",
                            format!(
                                "edge {e}: need finite a >= 0 and b >= 0, got ({slope}, {intercept})"
                            ),
                        );
                    }
                }
            }
        }
    }

    match cfg.schedule.to_preset() {
        Err(msg) => return fail("schedule", msg),
        Ok(SchedulePreset::RegretOptimal | SchedulePreset::NashTuned) => {
            // These presets divide by the maximum cost, so zero is a config
            // error here rather than a panic deep inside the run.
            let name = &cfg.schedule.preset;
            if let Some(costs) = &cfg.costs {
                let tables = expand_costs(costs, cfg.agents.len());
                let c_max = tables.iter().flatten().copied().fold(0.0, f64::max);
                if c_max <= 0.0 {
                    return fail(
                        "schedule",
                        format!("preset {name:?} needs a positive maximum edge cost"),
                    );
                }
            }
            if let Some(adv) = &cfg.adversary {
                if adv.c_max() <= 0.0 {
                    return fail(
                        "schedule",
                        format!("preset {name:?} needs a positive maximum adversary cost"),
                    );
                }
            }
        }
        Ok(_) => {}
    }
    if cfg.t_max < 1 {
        return fail("t_max", "t_max must be >= 1".to_string());
    }
    if cfg.seeds.is_empty() {
        return fail("seeds", "need at least one seed".to_string());
    }
    let mut sorted = cfg.seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cfg.seeds.len() {
        return fail(
            "seeds",
            "seeds must be distinct (one output file per seed)".to_string(),
        );
    }
    if cfg.metric_stride == Some(0) {
        return fail("metric_stride", "metric_stride must be >= 1".to_string());
    }
    match cfg.init.as_deref() {
        None | Some("feasible-construction") | Some("uniform-mix") => {}
        Some(other) => {
            return fail(
                "init",
                format!("unknown init {other:?}; expected feasible-construction or uniform-mix"),
            )
        }
    }
    if let Some(adv) = &cfg.adversary {
        if let Err(e) = adv.to_spec().validate(m, cfg.t_max) {
            return fail("adversary", e.to_string());
        }
    }
    Ok(())
}

/// Reads, parses, and validates a config file.
pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| ConfigError::new(None, format!("{}: {e}", path.display())))?;
    let cfg = parse(&raw)?;
    validate(&cfg, &raw)?;
    Ok(cfg)
}
