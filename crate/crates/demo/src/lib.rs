//! Browser playground for the simulator, compiled to WebAssembly.
//!
//! Three operations with string-in, JSON-string-out signatures so the page
//! needs nothing beyond wasm-bindgen's default glue: project a point onto a
//! bounded-away path polytope (against the naive epsilon-greedy mix as a
//! contrast), decompose a point into a sampleable path mixture, and run a
//! short multi-agent learning session. Every function returns either the
//! documented payload or `{"error": "..."}`; nothing panics on bad input.
//!
//! The crate also builds as a plain rlib so the JSON contracts are tested
//! natively; no browser is involved in `cargo test`.

use std::sync::Arc;

use congame::dynamics::run_dynamics;
use congame::game::CongestionGame;
use congame::graph::{build_dag, Dag};
use congame::learner::{InitMode, SchedulePreset};
use congame::polytope::{
    caratheodory_decompose, epsilon_greedy_mix, project, BoundedAwayView, FractionalStrategy,
    PathPolytope,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest horizon the page may request; keeps a click under a second.
const T_MAX_CAP: u64 = 20_000;
const AGENT_CAP: usize = 4;

fn preset_graph(name: &str) -> Result<(Arc<Dag>, usize, usize), String> {
    let (nodes, edges, sink) = match name {
        "parallel" => (2, vec![(0, 1), (0, 1), (0, 1)], 1),
        "diamond-chord" => (4, vec![(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)], 3),
        "chain" => (4, vec![(0, 1), (0, 1), (1, 2), (1, 2), (2, 3), (2, 3)], 3),
        other => {
            return Err(format!(
                "unknown graph {other:?}; expected parallel, diamond-chord, or chain"
            ))
        }
    };
    let dag = build_dag(nodes, &edges).map_err(|e| e.to_string())?;
    Ok((Arc::new(dag), 0, sink))
}

fn parse_vector(csv: &str, m: usize) -> Result<Vec<f64>, String> {
    let vals: Result<Vec<f64>, _> = csv.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| format!("bad number: {e}"))?;
    if vals.len() != m {
        return Err(format!("{} entries for {m} edges", vals.len()));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err("entries must be finite".to_string());
    }
    Ok(vals)
}

fn graph_json(g: &Dag) -> serde_json::Value {
    json!({"nodes": g.node_count(), "edges": g.edges()})
}

fn err_json(msg: String) -> String {
    json!({"error": msg}).to_string()
}

fn project_impl(graph: &str, y: &str, mu: f64) -> Result<String, String> {
    let (dag, s, t) = preset_graph(graph)?;
    let polytope = PathPolytope::new(dag, s, t).map_err(|e| e.to_string())?;
    let m = polytope.graph().edge_count();
    let y = parse_vector(y, m)?;
    if !(0.0..=polytope.max_mu()).contains(&mu) {
        return Err(format!(
            "mu must lie in [0, {:.4}] for this graph",
            polytope.max_mu()
        ));
    }
    let view = BoundedAwayView::new(&polytope, mu);
    let x = project(&view, &y).map_err(|e| e.to_string())?;
    let greedy = epsilon_greedy_mix(&y, mu);
    Ok(json!({
        "graph": graph_json(polytope.graph()),
        "max_mu": polytope.max_mu(),
        "x": x.as_slice(),
        "x_violation": view.membership_violation(x.as_slice()),
        "greedy": greedy,
        "greedy_violation": view.membership_violation(&greedy),
    })
    .to_string())
}

/// Projects `y` (comma-separated, one value per edge) onto the polytope of
/// source-to-sink flows with every active edge at least `mu`, and contrasts
/// it with the epsilon-greedy mix toward uniform at eps = mu. Returns the
/// two vectors with their constraint violations.
#[wasm_bindgen]
pub fn demo_project(graph: &str, y: &str, mu: f64) -> String {
    project_impl(graph, y, mu).unwrap_or_else(err_json)
}

fn decompose_impl(graph: &str, x: &str) -> Result<String, String> {
    let (dag, s, t) = preset_graph(graph)?;
    let polytope = PathPolytope::new(dag, s, t).map_err(|e| e.to_string())?;
    let m = polytope.graph().edge_count();
    let x = parse_vector(x, m)?;
    let mix = caratheodory_decompose(&polytope, &FractionalStrategy::new(x.clone()))
        .map_err(|e| e.to_string())?;
    let marginal_error = mix
        .marginals(m)
        .iter()
        .zip(&x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let atoms: Vec<_> = mix
        .atoms()
        .iter()
        .map(|(p, w)| json!({"path": p.edges(), "w": w}))
        .collect();
    Ok(json!({
        "graph": graph_json(polytope.graph()),
        "atoms": atoms,
        "total_weight": mix.total_weight(),
        "marginal_error": marginal_error,
    })
    .to_string())
}

/// Decomposes `x` (comma-separated edge marginals) into a convex combination
/// of at most m paths reproducing those marginals, the distribution a
/// learner actually samples from.
#[wasm_bindgen]
pub fn demo_decompose(graph: &str, x: &str) -> String {
    decompose_impl(graph, x).unwrap_or_else(err_json)
}

fn dynamics_impl(graph: &str, agents: usize, t_max: u64, seed: u64) -> Result<String, String> {
    if !(1..=AGENT_CAP).contains(&agents) {
        return Err(format!("agents must lie in 1..={AGENT_CAP}"));
    }
    if !(1..=T_MAX_CAP).contains(&t_max) {
        return Err(format!("t_max must lie in 1..={T_MAX_CAP}"));
    }
    let (dag, s, t) = preset_graph(graph)?;
    let m = dag.edge_count();
    // Linear costs c(l) = l on every edge: the classic congestion instance.
    let tables: Vec<Vec<f64>> = vec![(0..=agents).map(|l| l as f64).collect(); m];
    let game = CongestionGame::new(dag, vec![(s, t); agents], tables).map_err(|e| e.to_string())?;
    let stride = (t_max / 120).max(1);
    let run = run_dynamics(
        &game,
        SchedulePreset::Default,
        InitMode::FeasibleConstruction,
        t_max,
        seed,
        stride,
    )
    .map_err(|e| e.to_string())?;

    let ts: Vec<u64> = run.records.iter().map(|r| r.t).collect();
    let avg_regret: Vec<Vec<f64>> = (0..agents)
        .map(|i| run.records.iter().map(|r| r.avg_regret[i]).collect())
        .collect();
    let exploit_rel_avg: Vec<Option<f64>> = run
        .records
        .iter()
        .map(|r| r.exploitability_avg.and_then(|e| e.relative))
        .collect();
    let potential: Vec<Option<f64>> = run.records.iter().map(|r| r.potential).collect();
    let final_avg: Vec<&[f64]> = run.avg_marginals.iter().map(|x| x.as_slice()).collect();
    Ok(json!({
        "graph": graph_json(game.graph()),
        "t": ts,
        "avg_regret": avg_regret,
        "exploit_rel_avg": exploit_rel_avg,
        "potential": potential,
        "final_avg_marginals": final_avg,
    })
    .to_string())
}

/// Runs `agents` simultaneous learners on the preset graph with linear edge
/// costs for `t_max` rounds and returns the recorded metric series plus the
/// time-averaged marginals, ready for charting.
#[wasm_bindgen]
pub fn demo_dynamics(graph: &str, agents: usize, t_max: u64, seed: u64) -> String {
    dynamics_impl(graph, agents, t_max, seed).unwrap_or_else(err_json)
}
