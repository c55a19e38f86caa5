//! Congestion-game semantics: realized loads and costs for pure profiles,
//! and the fractional layer used by the learning diagnostics: per-edge
//! Poisson-binomial load distributions, the fractional potential and its
//! exact gradient, expected costs, best responses, exploitability, the
//! projected-gradient stationarity gap, and a brute-force pure-equilibrium
//! oracle for tiny instances.
//!
//! Fractional quantities treat agents' path choices as independent draws
//! from their own mixtures. That is exactly how the dynamics sample, so the
//! product-form expectations here are exact, not approximations.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{enumerate_paths, shortest_path, Dag, EdgeId, NodeId, Path};
use crate::polytope::{project, BoundedAwayView, FractionalStrategy, PathPolytope};

/// Enumeration cap for [`CongestionGame::brute_force_pure_ne`].
pub const PROFILE_CAP: u64 = 1_000_000;

/// An n-agent network congestion game with tabulated edge costs.
///
/// `cost_tables[e][l]` is the cost of edge `e` at integer load `l`, for
/// `l in 0..=n`; tables must be nonnegative and nondecreasing. Per-agent
/// path polytopes (with their projection factorizations) are built once
/// here and shared.
#[derive(Debug)]
pub struct CongestionGame {
    graph: Arc<Dag>,
    agents: Vec<(NodeId, NodeId)>,
    cost_tables: Vec<Vec<f64>>,
    /// cum_tables[e][s] = sum of cost_tables[e][0..=s]
    cum_tables: Vec<Vec<f64>>,
    c_max: f64,
    polytopes: Vec<Arc<PathPolytope>>,
}

/// A joint strategy profile, pure or fractional.
#[derive(Debug, Clone, PartialEq)]
pub enum JointProfile {
    Pure(Vec<Path>),
    Fractional(Vec<FractionalStrategy>),
}

impl JointProfile {
    /// Per-agent edge marginals (pure paths become indicator vectors).
    pub fn marginals(&self, m: usize) -> Vec<FractionalStrategy> {
        match self {
            JointProfile::Pure(paths) => paths
                .iter()
                .map(|p| FractionalStrategy::new(p.indicator(m)))
                .collect(),
            JointProfile::Fractional(xs) => xs.to_vec(),
        }
    }
}

/// Per-edge probability distributions over integer load.
#[derive(Debug, Clone)]
pub struct LoadDistribution {
    per_edge: Vec<Vec<f64>>,
}

impl LoadDistribution {
    /// P[load on edge e = s] for s = 0..=#included agents.
    pub fn edge(&self, e: EdgeId) -> &[f64] {
        &self.per_edge[e]
    }
}

/// Best-response gain of the most exploitable agent, in absolute terms and
/// relative to that agent's best-response value. `relative` is `None` when
/// some best-response value is below 1e-12 (division would be meaningless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploitability {
    pub absolute: f64,
    pub relative: Option<f64>,
}

impl CongestionGame {
    pub fn new(
        graph: Arc<Dag>,
        agents: Vec<(NodeId, NodeId)>,
        cost_tables: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = agents.len();
        let m = graph.edge_count();
        if cost_tables.len() != m {
            return Err(Error::InvalidCosts {
                detail: format!("{} tables for {} edges", cost_tables.len(), m),
            });
        }
        for (e, table) in cost_tables.iter().enumerate() {
            if table.len() != n + 1 {
                return Err(Error::InvalidCosts {
                    detail: format!(
                        "edge {e}: table has {} entries, need n+1 = {}",
                        table.len(),
                        n + 1
                    ),
                });
            }
            for (l, &c) in table.iter().enumerate() {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidCosts {
                        detail: format!("edge {e}: c({l}) = {c} is not a finite nonnegative cost"),
                    });
                }
                if l > 0 && c < table[l - 1] {
                    return Err(Error::InvalidCosts {
                        detail: format!("edge {e}: c({l}) = {c} < c({}) = {}", l - 1, table[l - 1]),
                    });
                }
            }
        }
        let mut polytopes = Vec::with_capacity(n);
        for &(s, t) in &agents {
            polytopes.push(Arc::new(PathPolytope::new(Arc::clone(&graph), s, t)?));
        }
        let c_max = cost_tables.iter().map(|t| t[n]).fold(0.0, f64::max);
        let cum_tables = cost_tables
            .iter()
            .map(|t| {
                t.iter()
                    .scan(0.0, |acc, &c| {
                        *acc += c;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Ok(CongestionGame {
            graph,
            agents,
            cost_tables,
            cum_tables,
            c_max,
            polytopes,
        })
    }

    pub fn graph(&self) -> &Arc<Dag> {
        &self.graph
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn agents(&self) -> &[(NodeId, NodeId)] {
        &self.agents
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Cost of edge `e` at integer load `l`.
    pub fn cost(&self, e: EdgeId, l: usize) -> f64 {
        self.cost_tables[e][l]
    }

    pub fn cost_tables(&self) -> &[Vec<f64>] {
        &self.cost_tables
    }

    /// The cached path polytope of agent `i`.
    pub fn polytope(&self, i: usize) -> &Arc<PathPolytope> {
        &self.polytopes[i]
    }

    /// Realized per-edge loads of a pure profile.
    pub fn pure_loads(&self, paths: &[Path]) -> Vec<u32> {
        assert_eq!(paths.len(), self.agents.len(), "one path per agent");
        let mut loads = vec![0u32; self.graph.edge_count()];
        for path in paths {
            for &e in path.edges() {
                loads[e] += 1;
            }
        }
        loads
    }

    /// Realized cost of each agent under a pure profile.
    pub fn agent_cost(&self, paths: &[Path]) -> Vec<f64> {
        let loads = self.pure_loads(paths);
        paths
            .iter()
            .map(|p| {
                p.edges()
                    .iter()
                    .map(|&e| self.cost_tables[e][loads[e] as usize])
                    .sum()
            })
            .collect()
    }

    /// Per-edge Poisson-binomial distribution of the number of included
    /// agents on the edge, by the O(n^2) Bernoulli convolution. With
    /// `exclude_agent` the distribution of L_{-i,e} used by gradients.
    pub fn load_distribution(
        &self,
        marginals: &[FractionalStrategy],
        exclude_agent: Option<usize>,
    ) -> LoadDistribution {
        assert_eq!(
            marginals.len(),
            self.agents.len(),
            "one marginal vector per agent"
        );
        let m = self.graph.edge_count();
        let mut per_edge = Vec::with_capacity(m);
        for e in 0..m {
            let mut dist = vec![1.0];
            for (j, x) in marginals.iter().enumerate() {
                if Some(j) == exclude_agent {
                    continue;
                }
                let q = x[e];
                let mut next = vec![0.0; dist.len() + 1];
                for (s, &p) in dist.iter().enumerate() {
                    next[s] += p * (1.0 - q);
                    next[s + 1] += p * q;
                }
                dist = next;
            }
            per_edge.push(dist);
        }
        LoadDistribution { per_edge }
    }

    /// The fractional potential: sum over edges of E[sum_{i=0}^{L_e} c_e(i)]
    /// under the independent-agent load distribution. Equals the exhaustive
    /// subset-sum definition, evaluated without 2^n enumeration.
    pub fn potential(&self, marginals: &[FractionalStrategy]) -> f64 {
        let ld = self.load_distribution(marginals, None);
        (0..self.graph.edge_count())
            .map(|e| {
                ld.edge(e)
                    .iter()
                    .zip(&self.cum_tables[e])
                    .map(|(&p, &cum)| p * cum)
                    .sum::<f64>()
            })
            .sum()
    }

    /// E[c_e(1 + L_{-i,e})] for every edge: the expected cost agent `i`
    /// would pay on edge `e` given everyone else's marginals.
    fn deviation_weights(&self, marginals: &[FractionalStrategy], i: usize) -> Vec<f64> {
        let ld = self.load_distribution(marginals, Some(i));
        (0..self.graph.edge_count())
            .map(|e| {
                ld.edge(e)
                    .iter()
                    .enumerate()
                    .map(|(s, &p)| p * self.cost_tables[e][s + 1])
                    .sum()
            })
            .collect()
    }

    /// Exact gradient of the fractional potential: dPhi/dx_{ie} =
    /// E[c_e(L_{-i,e} + 1)] on agent i's active edges, 0 elsewhere
    /// (inactive coordinates are pinned, not free variables).
    pub fn grad_potential(&self, marginals: &[FractionalStrategy]) -> Vec<Vec<f64>> {
        (0..self.agents.len())
            .map(|i| {
                let mut w = self.deviation_weights(marginals, i);
                for (e, we) in w.iter_mut().enumerate() {
                    if !self.polytopes[i].is_active(e) {
                        *we = 0.0;
                    }
                }
                w
            })
            .collect()
    }

    /// Expected cost of agent `i` under independent sampling from the
    /// agents' mixtures: sum_e x_{ie} * E[c_e(1 + L_{-i,e})].
    pub fn expected_agent_cost(&self, marginals: &[FractionalStrategy], i: usize) -> f64 {
        let w = self.deviation_weights(marginals, i);
        marginals[i].iter().zip(&w).map(|(&x, &we)| x * we).sum()
    }

    /// Agent i's best pure response against the others' marginals, as the
    /// shortest path under deviation weights. Ties resolve to the lowest
    /// edge id via the shortest-path contract.
    pub fn best_response_value(
        &self,
        marginals: &[FractionalStrategy],
        i: usize,
    ) -> Result<(Path, f64)> {
        let w = self.deviation_weights(marginals, i);
        let (s, t) = self.agents[i];
        shortest_path(&self.graph, s, t, &w)
    }

    /// Largest unilateral best-response gain over agents, absolute and
    /// relative. Zero exactly at a mixed equilibrium; tiny negative float
    /// noise is clamped to 0.
    pub fn exploitability(&self, marginals: &[FractionalStrategy]) -> Result<Exploitability> {
        let mut absolute: f64 = 0.0;
        let mut relative: Option<f64> = Some(0.0);
        for i in 0..self.agents.len() {
            let current = self.expected_agent_cost(marginals, i);
            let (_, br) = self.best_response_value(marginals, i)?;
            let gain = (current - br).max(0.0);
            absolute = absolute.max(gain);
            if br < 1e-12 {
                relative = None;
            } else if let Some(rel) = relative {
                relative = Some(rel.max(gain / br));
            }
        }
        Ok(Exploitability { absolute, relative })
    }

    /// Projected-gradient stationarity gap
    /// `|| x - Pi_{X^mu}[x - lambda * grad Phi(x)] ||_2` with the smoothness
    /// step lambda = 1 / (2 n^2 c_max sqrt(m)); the projection separates
    /// across agents. Requires `mu <= 1/|E_i|` for every agent.
    pub fn stationarity_gap(&self, marginals: &[FractionalStrategy], mu: f64) -> Result<f64> {
        let n = self.agents.len() as f64;
        let m = self.graph.edge_count() as f64;
        let lambda = if self.c_max > 0.0 {
            1.0 / (2.0 * n * n * self.c_max * m.sqrt())
        } else {
            // Zero-cost game: the gradient vanishes and any step works.
            0.0
        };
        let grads = self.grad_potential(marginals);
        let mut gap_sq = 0.0;
        for (i, grad) in grads.iter().enumerate() {
            let x = &marginals[i];
            let y: Vec<f64> = x
                .iter()
                .zip(grad)
                .map(|(&xe, &ge)| xe - lambda * ge)
                .collect();
            let view = BoundedAwayView::new(&self.polytopes[i], mu);
            let proj = project(&view, &y)?;
            gap_sq += x
                .iter()
                .zip(proj.iter())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        Ok(gap_sq.sqrt())
    }

    /// Exhaustively enumerates pure profiles and returns the eps-approximate
    /// pure Nash equilibria (no unilateral deviation improves by more than
    /// `eps`). Errors with [`Error::TooLarge`] beyond [`PROFILE_CAP`] profiles.
    pub fn brute_force_pure_ne(&self, eps: f64) -> Result<Vec<JointProfile>> {
        let cap = PROFILE_CAP;
        let mut per_agent: Vec<Vec<Path>> = Vec::with_capacity(self.agents.len());
        let mut total: u128 = 1;
        for &(s, t) in &self.agents {
            let paths =
                enumerate_paths(&self.graph, s, t, cap as usize).map_err(|err| match err {
                    Error::CapExceeded { .. } => Error::TooLarge {
                        size: (cap as u128) + 1,
                        cap,
                    },
                    other => other,
                })?;
            total = total.saturating_mul(paths.len() as u128);
            if total > cap as u128 {
                return Err(Error::TooLarge { size: total, cap });
            }
            per_agent.push(paths);
        }

        let n = self.agents.len();
        let mut equilibria = Vec::new();
        let mut index = vec![0usize; n];
        loop {
            let profile: Vec<Path> = index
                .iter()
                .enumerate()
                .map(|(i, &j)| per_agent[i][j].clone())
                .collect();
            let loads = self.pure_loads(&profile);
            let costs = self.agent_cost(&profile);
            let mut is_ne = true;
            'agents: for i in 0..n {
                // Load seen by a deviation of agent i: others' loads plus one.
                let mut minus_i = loads.clone();
                for &e in profile[i].edges() {
                    minus_i[e] -= 1;
                }
                for alt in &per_agent[i] {
                    let alt_cost: f64 = alt
                        .edges()
                        .iter()
                        .map(|&e| self.cost_tables[e][(minus_i[e] + 1) as usize])
                        .sum();
                    if alt_cost < costs[i] - eps {
                        is_ne = false;
                        break 'agents;
                    }
                }
            }
            if is_ne {
                equilibria.push(JointProfile::Pure(profile));
            }
            // Odometer increment over the profile index.
            let mut pos = n;
            loop {
                if pos == 0 {
                    return Ok(equilibria);
                }
                pos -= 1;
                index[pos] += 1;
                if index[pos] < per_agent[pos].len() {
                    break;
                }
                index[pos] = 0;
            }
        }
    }
}
