//! Simulation drivers: all agents learning simultaneously in a congestion
//! game, or a single learner against a scripted cost sequence.
//!
//! Runs are deterministic given a seed. Each agent draws from its own RNG
//! stream (stream id = agent id + 1) and the adversary from stream 0, so
//! per-agent draws never interleave and adding metrics or records cannot
//! shift the sequence. Within a round every agent samples before any agent
//! updates; loads are computed from the full sampled profile.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{CongestionGame, Exploitability};
use crate::graph::{shortest_path, Path};
use crate::learner::{init_learner, InitMode, LearnerState, Schedule, SchedulePreset};
use crate::polytope::{FractionalStrategy, PathPolytope};

/// A cost source for single-learner runs. Called once per round, before the
/// learner updates. Oblivious adversaries must ignore `sampled` (they commit
/// to the round's costs before the draw); it is passed so adaptive stress
/// tests can react to the traversed path.
pub trait CostAdversary {
    /// Full edge-cost vector for round t (1-based), length `m`.
    fn round_costs(&mut self, t: u64, m: usize, sampled: &Path, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// An upper bound on every cost this source can emit.
    fn c_max(&self) -> f64;
}

/// Built-in oblivious adversaries.
#[derive(Debug, Clone)]
pub enum AdversarySpec {
    /// Replays a fixed cost vector per round; row t-1 is round t.
    FixedSequence { costs: Vec<Vec<f64>> },
    /// Fresh uniform draw in [lo, hi) per edge per round (lo if lo == hi).
    IidRandom { lo: f64, hi: f64 },
    /// Plays c_e(loads[t-1][e]) from tabulated costs, emulating congestion
    /// induced by exogenous traffic.
    LoadReplay {
        loads: Vec<Vec<usize>>,
        cost_tables: Vec<Vec<f64>>,
    },
}

impl AdversarySpec {
    /// Checks this adversary can serve `t_max` rounds of `m`-edge cost vectors.
    pub fn validate(&self, m: usize, t_max: u64) -> Result<()> {
        match self {
            AdversarySpec::FixedSequence { costs } => {
                if (costs.len() as u64) < t_max {
                    return Err(Error::InvalidCosts {
                        detail: format!("fixed sequence has {} rounds, need {t_max}", costs.len()),
                    });
                }
                for (t, row) in costs.iter().enumerate() {
                    if row.len() != m {
                        return Err(Error::InvalidCosts {
                            detail: format!("round {} has {} costs, need {m}", t + 1, row.len()),
                        });
                    }
                    if row.iter().any(|c| !c.is_finite() || *c < 0.0) {
                        return Err(Error::InvalidCosts {
                            detail: format!("round {} has a negative or non-finite cost", t + 1),
                        });
                    }
                }
                Ok(())
            }
            AdversarySpec::IidRandom { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || *lo < 0.0 || hi < lo {
                    return Err(Error::InvalidCosts {
                        detail: format!("need 0 <= lo <= hi finite, got [{lo}, {hi}]"),
                    });
                }
                Ok(())
            }
            AdversarySpec::LoadReplay { loads, cost_tables } => {
                if cost_tables.len() != m {
                    return Err(Error::InvalidCosts {
                        detail: format!("{} cost tables, need {m}", cost_tables.len()),
                    });
                }
                for (e, table) in cost_tables.iter().enumerate() {
                    if table.is_empty() || table.iter().any(|c| !c.is_finite() || *c < 0.0) {
                        return Err(Error::InvalidCosts {
                            detail: format!("cost table for edge {e} is empty or invalid"),
                        });
                    }
                }
                if (loads.len() as u64) < t_max {
                    return Err(Error::InvalidCosts {
                        detail: format!("load replay has {} rounds, need {t_max}", loads.len()),
                    });
                }
                for (t, row) in loads.iter().enumerate() {
                    if row.len() != m {
                        return Err(Error::InvalidCosts {
                            detail: format!("round {} has {} loads, need {m}", t + 1, row.len()),
                        });
                    }
                    for (e, &l) in row.iter().enumerate() {
                        if l >= cost_tables[e].len() {
                            return Err(Error::InvalidCosts {
                                detail: format!(
                                    "round {} load {l} exceeds cost table for edge {e}",
                                    t + 1
                                ),
                            });
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

impl CostAdversary for AdversarySpec {
    fn round_costs(&mut self, t: u64, m: usize, _sampled: &Path, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            AdversarySpec::FixedSequence { costs } => costs[(t - 1) as usize].clone(),
            AdversarySpec::IidRandom { lo, hi } => (0..m)
                .map(|_| {
                    if hi > lo {
                        rng.random_range(*lo..*hi)
                    } else {
                        *lo
                    }
                })
                .collect(),
            AdversarySpec::LoadReplay { loads, cost_tables } => loads[(t - 1) as usize]
                .iter()
                .enumerate()
                .map(|(e, &l)| cost_tables[e][l])
                .collect(),
        }
    }

    fn c_max(&self) -> f64 {
        match self {
            AdversarySpec::FixedSequence { costs } => {
                costs.iter().flatten().copied().fold(0.0, f64::max)
            }
            AdversarySpec::IidRandom { hi, .. } => *hi,
            AdversarySpec::LoadReplay { cost_tables, .. } => {
                cost_tables.iter().flatten().copied().fold(0.0, f64::max)
            }
        }
    }
}

/// Diagnostics for one recorded round. Metric fields are `None` where the
/// quantity is undefined for the run kind (single-learner runs have no
/// game-level metrics). `elapsed` is wall time since the run started; it is
/// excluded from any determinism comparison.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub t: u64,
    /// Per-agent cost realized this round.
    pub realized_cost: Vec<f64>,
    /// Per-agent cumulative cost through round t.
    pub cum_cost: Vec<f64>,
    /// Per-edge cumulative cost through round t (the hindsight weights).
    pub cum_edge_cost: Vec<f64>,
    /// Per-agent time-averaged regret (cumulative cost minus cumulative cost
    /// of the best fixed path in hindsight, divided by t).
    pub avg_regret: Vec<f64>,
    pub exploitability: Option<Exploitability>,
    /// Exploitability of the running average of the iterates.
    pub exploitability_avg: Option<Exploitability>,
    pub potential: Option<f64>,
    pub stationarity_gap: Option<f64>,
    pub elapsed: Duration,
}

/// Output of a full multi-agent run.
#[derive(Debug, Clone)]
pub struct DynamicsRun {
    pub records: Vec<RoundRecord>,
    /// Iterates x^{T+1}, after the last update.
    pub final_marginals: Vec<FractionalStrategy>,
    /// Time-averaged iterates (1/T) sum_t x^t.
    pub avg_marginals: Vec<FractionalStrategy>,
}

/// Output of a single-learner adversarial run.
#[derive(Debug, Clone)]
pub struct AdversarialRun {
    pub records: Vec<RoundRecord>,
    /// Cumulative realized cost minus the best fixed path in hindsight.
    pub regret: f64,
    pub best_path: Path,
    pub best_path_cost: f64,
    pub final_marginal: FractionalStrategy,
}

/// Runs all agents of `game` learning simultaneously for `t_max` rounds.
///
/// Expensive diagnostics (exploitability, potential, stationarity gap) are
/// computed on round 1, every `metric_stride`-th round, and the last round;
/// time-averaged regret is recorded at the same rounds. The stride does not
/// affect the trajectory.
pub fn run_dynamics(
    game: &CongestionGame,
    preset: SchedulePreset,
    init_mode: InitMode,
    t_max: u64,
    seed: u64,
    metric_stride: u64,
) -> Result<DynamicsRun> {
    assert!(t_max >= 1, "need at least one round");
    assert!(metric_stride >= 1, "stride must be positive");
    let n = game.agent_count();
    let m = game.edge_count();
    let start = Instant::now();

    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            rng
        })
        .collect();
    let mut learners: Vec<LearnerState> = Vec::with_capacity(n);
    for i in 0..n {
        let polytope = Arc::clone(game.polytope(i));
        let schedule = Schedule::new(preset, n, m, polytope.active_count(), game.c_max());
        learners.push(init_learner(
            i,
            polytope,
            schedule,
            init_mode,
            &mut rngs[i],
        )?);
    }

    let mut cum_cost = vec![0.0; n];
    let mut cum_edge_cost = vec![0.0; m];
    let mut marginal_sums = vec![vec![0.0; m]; n];
    let mut records = Vec::new();

    for t in 1..=t_max {
        // Sampling barrier: every agent draws its path before any update.
        let mut paths = Vec::with_capacity(n);
        for (learner, rng) in learners.iter_mut().zip(rngs.iter_mut()) {
            paths.push(learner.choose(rng)?);
        }
        let marginals: Vec<FractionalStrategy> = learners.iter().map(|l| l.x().clone()).collect();
        for (sum, x) in marginal_sums.iter_mut().zip(&marginals) {
            for (s, &xe) in sum.iter_mut().zip(x.iter()) {
                *s += xe;
            }
        }

        let loads = game.pure_loads(&paths);
        let round_costs: Vec<f64> = (0..m).map(|e| game.cost(e, loads[e] as usize)).collect();
        for (cum, &c) in cum_edge_cost.iter_mut().zip(&round_costs) {
            *cum += c;
        }
        let mut realized_cost = Vec::with_capacity(n);
        for (i, path) in paths.iter().enumerate() {
            let realized: f64 = path.edges().iter().map(|&e| round_costs[e]).sum();
            realized_cost.push(realized);
            cum_cost[i] += realized;
            let observed: Vec<(usize, f64)> =
                path.edges().iter().map(|&e| (e, round_costs[e])).collect();
            let c_hat = learners[i].estimate_costs(&observed)?;
            learners[i].update(&c_hat)?;
        }

        if t == 1 || t % metric_stride == 0 || t == t_max {
            let mut avg_regret = Vec::with_capacity(n);
            for (i, agent) in game.agents().iter().enumerate() {
                let (_, best) = shortest_path(game.graph(), agent.0, agent.1, &cum_edge_cost)?;
                avg_regret.push((cum_cost[i] - best) / t as f64);
            }
            let avg_marginals: Vec<FractionalStrategy> = marginal_sums
                .iter()
                .map(|sum| FractionalStrategy::new(sum.iter().map(|s| s / t as f64).collect()))
                .collect();
            let mu_t = learners
                .iter()
                .map(|l| l.schedule().mu(t))
                .fold(f64::INFINITY, f64::min);
            records.push(RoundRecord {
                t,
                realized_cost: realized_cost.clone(),
                cum_cost: cum_cost.clone(),
                cum_edge_cost: cum_edge_cost.clone(),
                avg_regret,
                exploitability: Some(game.exploitability(&marginals)?),
                exploitability_avg: Some(game.exploitability(&avg_marginals)?),
                potential: Some(game.potential(&marginals)),
                stationarity_gap: Some(game.stationarity_gap(&marginals, mu_t)?),
                elapsed: start.elapsed(),
            });
        }
    }

    let final_marginals = learners.iter().map(|l| l.x().clone()).collect();
    let avg_marginals = marginal_sums
        .iter()
        .map(|sum| FractionalStrategy::new(sum.iter().map(|s| s / t_max as f64).collect()))
        .collect();
    Ok(DynamicsRun {
        records,
        final_marginals,
        avg_marginals,
    })
}

/// Runs one learner against `adversary` for `t_max` rounds. The learner
/// draws from RNG stream 1 and the adversary from stream 0 of the same seed.
pub fn run_adversarial(
    polytope: Arc<PathPolytope>,
    schedule: Schedule,
    init_mode: InitMode,
    adversary: &mut impl CostAdversary,
    t_max: u64,
    seed: u64,
    metric_stride: u64,
) -> Result<AdversarialRun> {
    assert!(t_max >= 1, "need at least one round");
    assert!(metric_stride >= 1, "stride must be positive");
    let m = polytope.graph().edge_count();
    let (source, sink) = (polytope.source(), polytope.sink());
    let start = Instant::now();

    let mut agent_rng = ChaCha8Rng::seed_from_u64(seed);
    agent_rng.set_stream(1);
    let mut adv_rng = ChaCha8Rng::seed_from_u64(seed);
    adv_rng.set_stream(0);

    let graph = Arc::clone(polytope.graph());
    let mut learner = init_learner(0, polytope, schedule, init_mode, &mut agent_rng)?;

    let mut cum_cost = 0.0;
    let mut cum_edge_cost = vec![0.0; m];
    let mut records = Vec::new();

    for t in 1..=t_max {
        let path = learner.choose(&mut agent_rng)?;
        let costs = adversary.round_costs(t, m, &path, &mut adv_rng);
        assert_eq!(
            costs.len(),
            m,
            "adversary emitted a wrong-length cost vector"
        );
        debug_assert!(
            costs.iter().all(|c| c.is_finite() && *c >= 0.0),
            "adversary emitted an invalid cost"
        );
        for (cum, &c) in cum_edge_cost.iter_mut().zip(&costs) {
            *cum += c;
        }
        let realized: f64 = path.edges().iter().map(|&e| costs[e]).sum();
        cum_cost += realized;
        let observed: Vec<(usize, f64)> = path.edges().iter().map(|&e| (e, costs[e])).collect();
        let c_hat = learner.estimate_costs(&observed)?;
        learner.update(&c_hat)?;

        if t == 1 || t % metric_stride == 0 || t == t_max {
            let (_, best) = shortest_path(&graph, source, sink, &cum_edge_cost)?;
            records.push(RoundRecord {
                t,
                realized_cost: vec![realized],
                cum_cost: vec![cum_cost],
                cum_edge_cost: cum_edge_cost.clone(),
                avg_regret: vec![(cum_cost - best) / t as f64],
                exploitability: None,
                exploitability_avg: None,
                potential: None,
                stationarity_gap: None,
                elapsed: start.elapsed(),
            });
        }
    }

    let (best_path, best_path_cost) = shortest_path(&graph, source, sink, &cum_edge_cost)?;
    Ok(AdversarialRun {
        regret: cum_cost - best_path_cost,
        best_path,
        best_path_cost,
        final_marginal: learner.x().clone(),
        records,
    })
}

/// Least-squares slope of log(v) against log(t) over the final half of the
/// series (points with t >= t_last / 2). A decay like v ~ t^(-a) fits slope
/// -a. Errors if fewer than two usable points remain or any used v is not
/// strictly positive.
pub fn fit_rate(series: &[(f64, f64)]) -> Result<f64> {
    let t_last = series.last().map(|&(t, _)| t).unwrap_or(0.0);
    let tail: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t_last / 2.0)
        .collect();
    if tail.len() < 2 {
        return Err(Error::DegenerateSeries {
            detail: format!("only {} points in the final half", tail.len()),
        });
    }
    if let Some(&(t, v)) = tail.iter().find(|&&(t, v)| t <= 0.0 || v <= 0.0) {
        return Err(Error::DegenerateSeries {
            detail: format!("non-positive point (t = {t}, v = {v}) in the final half"),
        });
    }
    let logs: Vec<(f64, f64)> = tail.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    let k = logs.len() as f64;
    let mean_x = logs.iter().map(|&(x, _)| x).sum::<f64>() / k;
    let mean_y = logs.iter().map(|&(_, y)| y).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mean_x) * (y - mean_y)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateSeries {
            detail: "all abscissae in the final half coincide".to_owned(),
        });
    }
    Ok(sxy / sxx)
}

/// Convenience accessor pairing record rounds with a per-record metric, for
/// feeding [`fit_rate`].
pub fn series_of(
    records: &[RoundRecord],
    metric: impl Fn(&RoundRecord) -> Option<f64>,
) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter_map(|r| metric(r).map(|v| (r.t as f64, v)))
        .collect()
}
