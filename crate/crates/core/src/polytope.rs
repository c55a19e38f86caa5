//! Path polytopes and their bounded-away restrictions.
//!
//! For an agent with terminals (s, t) the feasible set is the s-t path
//! polytope of the DAG: unit flow out of s, unit flow into t, conservation
//! at internal nodes, coordinates in [0, 1], and exactly 0 on edges that lie
//! on no s-t path. The bounded-away view additionally forces `x_e >= mu` on
//! every active edge, which is what lets importance-weighted cost estimates
//! stay bounded.
//!
//! Three nontrivial pieces live here:
//!
//! - Euclidean projection onto the bounded-away polytope by Dykstra's
//!   alternating projection between the affine flow subspace (closed form
//!   via a Cholesky factorization of the constraint Gram matrix, computed
//!   once per polytope) and the box `[mu, 1]` on active edges.
//! - Carathéodory decomposition of a polytope point into a convex
//!   combination of at most m paths with exactly matching edge marginals:
//!   repeatedly strip the smallest positive coordinate along a
//!   positive-support path.
//! - A closed-form sort-based projection onto the lower-bounded simplex,
//!   which is both the exact answer for parallel-edge graphs and the
//!   cross-check oracle for the iterative projection.

use std::ops::Deref;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{find_positive_path, Dag, EdgeId, NodeId, Path};
use crate::{EPS_FEAS, EPS_FLOW, EPS_PROJ, PROJ_MAX_ITERS, PROJ_RESIDUAL_TOL};

/// Per-edge marginal selection probabilities of one agent; length is the
/// graph's edge count, with zeros on the agent's inactive edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalStrategy(Vec<f64>);

impl FractionalStrategy {
    pub fn new(x: Vec<f64>) -> Self {
        FractionalStrategy(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FractionalStrategy {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FractionalStrategy {
    fn from(x: Vec<f64>) -> Self {
        FractionalStrategy(x)
    }
}

/// The s-t path polytope of a DAG, with the flow-constraint system and its
/// factorization cached for repeated projections. Immutable and shareable.
#[derive(Debug)]
pub struct PathPolytope {
    graph: Arc<Dag>,
    source: NodeId,
    sink: NodeId,
    /// active edge ids, ascending
    active: Vec<EdgeId>,
    /// edge id -> position in `active`
    active_index: Vec<Option<usize>>,
    /// flow equalities over active coordinates: rows of (active index, coefficient)
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    /// Cholesky factor of A * A^T for the closed-form affine projection
    gram_chol: nalgebra::Cholesky<f64, Dyn>,
}

impl PathPolytope {
    /// Builds the polytope, computing active edges and factorizing the flow
    /// system. Errors with [`Error::Unreachable`] when no s-t path exists.
    pub fn new(graph: Arc<Dag>, source: NodeId, sink: NodeId) -> Result<Self> {
        for node in [source, sink] {
            if node >= graph.node_count() {
                return Err(Error::InvalidNode {
                    node,
                    node_count: graph.node_count(),
                });
            }
        }
        let active = crate::graph::active_edges(&graph, source, sink);
        if active.is_empty() {
            return Err(Error::Unreachable {
                from: source,
                to: sink,
            });
        }
        let mut active_index = vec![None; graph.edge_count()];
        for (i, &e) in active.iter().enumerate() {
            active_index[e] = Some(i);
        }

        // One row per active node except the sink, whose constraint is the
        // sum of the others. The source row counts outgoing flow only: in a
        // DAG no edge into the source can be active.
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut rhs = Vec::new();
        for v in 0..graph.node_count() {
            if v == sink {
                continue;
            }
            let ins: Vec<usize> = graph
                .in_edges(v)
                .iter()
                .filter_map(|&e| active_index[e])
                .collect();
            let outs: Vec<usize> = graph
                .out_edges(v)
                .iter()
                .filter_map(|&e| active_index[e])
                .collect();
            if ins.is_empty() && outs.is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(ins.len() + outs.len());
            if v == source {
                debug_assert!(ins.is_empty(), "active edge into the source");
                for j in outs {
                    row.push((j, 1.0));
                }
                rhs.push(1.0);
            } else {
                for j in ins {
                    row.push((j, 1.0));
                }
                for j in outs {
                    row.push((j, -1.0));
                }
                rhs.push(0.0);
            }
            rows.push(row);
        }

        let k = active.len();
        let r = rows.len();
        let mut dense = DMatrix::<f64>::zeros(r, k);
        for (i, row) in rows.iter().enumerate() {
            for &(j, c) in row {
                dense[(i, j)] = c;
            }
        }
        let gram = &dense * dense.transpose();
        let gram_chol = nalgebra::Cholesky::new(gram)
            .expect("flow system has full row rank on a connected active subgraph");

        Ok(PathPolytope {
            graph,
            source,
            sink,
            active,
            active_index,
            rows,
            rhs,
            gram_chol,
        })
    }

    pub fn graph(&self) -> &Arc<Dag> {
        &self.graph
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    /// Active edge ids in ascending order.
    pub fn active(&self) -> &[EdgeId] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn is_active(&self, e: EdgeId) -> bool {
        self.active_index[e].is_some()
    }

    /// Largest admissible exploration floor, `1 / |active|`.
    pub fn max_mu(&self) -> f64 {
        1.0 / self.active.len() as f64
    }

    fn to_active(&self, x: &[f64]) -> Vec<f64> {
        self.active.iter().map(|&e| x[e]).collect()
    }

    fn from_active(&self, v: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.graph.edge_count()];
        for (i, &e) in self.active.iter().enumerate() {
            x[e] = v[i];
        }
        x
    }

    /// Max absolute violation of the flow equalities, in active coordinates.
    fn flow_residual_active(&self, v: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| {
                let s: f64 = row.iter().map(|&(j, c)| c * v[j]).sum();
                (s - b).abs()
            })
            .fold(0.0, f64::max)
    }

    /// In-place Euclidean projection of `v` (active coordinates) onto the
    /// affine flow subspace: v -= A^T (A A^T)^{-1} (A v - b).
    fn affine_project(&self, v: &mut [f64]) {
        let mut lam = DVector::from_fn(self.rows.len(), |i, _| {
            let s: f64 = self.rows[i].iter().map(|&(j, c)| c * v[j]).sum();
            s - self.rhs[i]
        });
        self.gram_chol.solve_mut(&mut lam);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, c) in row {
                v[j] -= c * lam[i];
            }
        }
    }

    /// Worst violation of path-polytope membership: nonzero mass on inactive
    /// edges, coordinates outside [0, 1], or flow-equality residual.
    pub fn membership_violation(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.graph.edge_count(), "one coordinate per edge");
        let mut worst: f64 = 0.0;
        for (e, &xe) in x.iter().enumerate() {
            if self.active_index[e].is_none() {
                worst = worst.max(xe.abs());
            } else {
                worst = worst.max(-xe).max(xe - 1.0);
            }
        }
        let v = self.to_active(x);
        worst.max(self.flow_residual_active(&v))
    }

    /// Membership within tolerance `tol` (use [`EPS_FEAS`] for the standard check).
    pub fn is_member(&self, x: &[f64], tol: f64) -> bool {
        self.membership_violation(x) <= tol
    }

    /// A uniformly random s-t walk over active edges (each step picks one of
    /// the node's active out-edges with equal probability). Used to seed
    /// learners with a randomized initial mixture.
    pub fn random_active_path(&self, rng: &mut impl Rng) -> Path {
        let mut edges = Vec::new();
        let mut at = self.source;
        while at != self.sink {
            let candidates: Vec<EdgeId> = self
                .graph
                .out_edges(at)
                .iter()
                .copied()
                .filter(|&e| self.active_index[e].is_some())
                .collect();
            let e = candidates[rng.random_range(0..candidates.len())];
            edges.push(e);
            at = self.graph.head(e);
        }
        Path::new(edges)
    }
}

/// A path polytope with the exploration floor `x_e >= mu` on active edges.
///
/// Plain data; operations validate `mu` against the polytope on use.
#[derive(Debug, Clone, Copy)]
pub struct BoundedAwayView<'a> {
    pub base: &'a PathPolytope,
    pub mu: f64,
}

impl<'a> BoundedAwayView<'a> {
    pub fn new(base: &'a PathPolytope, mu: f64) -> Self {
        BoundedAwayView { base, mu }
    }

    /// The floor must be representable: `mu <= 1 / |active|` (a floor of 0
    /// degenerates to the unrestricted polytope and is permitted).
    pub fn validate(&self) -> Result<()> {
        assert!(
            self.mu.is_finite() && self.mu >= 0.0,
            "mu must be finite and >= 0"
        );
        let max_mu = self.base.max_mu();
        if self.mu > max_mu {
            return Err(Error::MuTooLarge {
                mu: self.mu,
                max_mu,
            });
        }
        Ok(())
    }

    /// Base membership violation, plus how far any active edge sits below `mu`.
    pub fn membership_violation(&self, x: &[f64]) -> f64 {
        let mut worst = self.base.membership_violation(x);
        for &e in self.base.active() {
            worst = worst.max(self.mu - x[e]);
        }
        worst
    }

    pub fn is_member(&self, x: &[f64], tol: f64) -> bool {
        self.membership_violation(x) <= tol
    }
}

/// A convex combination of paths realizing prescribed edge marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMix {
    atoms: Vec<(Path, f64)>,
}

impl PathMix {
    pub fn atoms(&self) -> &[(Path, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Edge marginals induced by the mix: sum of weights of atoms using each edge.
    pub fn marginals(&self, m: usize) -> Vec<f64> {
        let mut x = vec![0.0; m];
        for (path, w) in &self.atoms {
            for &e in path.edges() {
                x[e] += w;
            }
        }
        x
    }
}

/// The strictly feasible point of the bounded-away polytope obtained by
/// averaging one covering path per active edge: x = (1/|E_i|) * sum_e 1_{p^e},
/// where p^e is a path through e found on the all-ones support. Every active
/// edge is covered by its own path, so x_e >= 1/|E_i| >= mu.
pub fn feasible_bounded_point(view: &BoundedAwayView<'_>) -> Result<FractionalStrategy> {
    view.validate()?;
    let p = view.base;
    let g = p.graph().as_ref();
    let ones = p.from_active(&vec![1.0; p.active_count()]);
    let mut x = vec![0.0; g.edge_count()];
    for &e in p.active() {
        let path = find_positive_path(g, p.source(), p.sink(), &ones, e)?;
        for &pe in path.edges() {
            x[pe] += 1.0;
        }
    }
    let k = p.active_count() as f64;
    for xe in &mut x {
        *xe /= k;
    }
    Ok(FractionalStrategy::new(x))
}

/// Euclidean projection of `y` onto the bounded-away polytope.
///
/// Inactive coordinates are pinned to exactly 0; the active block is
/// projected by Dykstra's algorithm alternating between the affine flow
/// subspace and the box `[mu, 1]`, stopping when successive iterates move
/// less than [`EPS_PROJ`] or after [`PROJ_MAX_ITERS`] sweeps. The returned
/// point is box-exact; the flow residual is at convergence tolerance.
pub fn project(view: &BoundedAwayView<'_>, y: &[f64]) -> Result<FractionalStrategy> {
    view.validate()?;
    let p = view.base;
    assert_eq!(y.len(), p.graph().edge_count(), "one coordinate per edge");
    assert!(
        y.iter().all(|v| v.is_finite()),
        "projection input must be finite"
    );

    let k = p.active_count();
    let mut x = p.to_active(y);
    // Dykstra correction terms for the two sets (the affine correction is
    // kept for symmetry; it is provably unnecessary for affine sets).
    let mut p_corr = vec![0.0; k];
    let mut q_corr = vec![0.0; k];
    let mut a = vec![0.0; k];
    let mut converged = false;

    for _ in 0..PROJ_MAX_ITERS {
        for i in 0..k {
            a[i] = x[i] + p_corr[i];
        }
        p.affine_project(&mut a);
        for i in 0..k {
            p_corr[i] = x[i] + p_corr[i] - a[i];
        }
        // Convergence needs the box iterate to stop moving AND to meet the
        // affine iterate: the box output alone can dwell unchanged on a
        // vertex for many sweeps while the corrections still accumulate, so
        // a successive-iterate test by itself fires early on infeasible
        // points.
        let mut delta_sq = 0.0;
        let mut gap_sq = 0.0;
        for i in 0..k {
            let with_corr = a[i] + q_corr[i];
            let clamped = with_corr.clamp(view.mu, 1.0);
            q_corr[i] = with_corr - clamped;
            let d = clamped - x[i];
            delta_sq += d * d;
            let g = clamped - a[i];
            gap_sq += g * g;
            x[i] = clamped;
        }
        if (delta_sq + gap_sq).sqrt() < EPS_PROJ {
            converged = true;
            break;
        }
    }

    if !converged {
        let residual = p.flow_residual_active(&x);
        if residual > PROJ_RESIDUAL_TOL {
            return Err(Error::ProjectionDiverged {
                iters: PROJ_MAX_ITERS,
                residual,
            });
        }
    }
    Ok(FractionalStrategy::new(p.from_active(&x)))
}

/// Exact projection onto the lower-bounded simplex `{x : sum x = 1, x >= mu}`
/// by the standard sort-and-threshold construction on the shifted problem.
pub fn project_simplex_lb(y: &[f64], mu: f64) -> Result<Vec<f64>> {
    let n = y.len();
    assert!(n > 0, "empty simplex");
    let product = mu * n as f64;
    if product > 1.0 {
        return Err(Error::Infeasible { product });
    }
    let r = 1.0 - product;
    if r <= 0.0 {
        // The floor uses the whole budget; the simplex is the single point mu*1.
        return Ok(vec![mu; n]);
    }
    // Shift z = x - mu: project y - mu onto {z >= 0, sum z = r}.
    let v: Vec<f64> = y.iter().map(|&yi| yi - mu).collect();
    let mut sorted = v.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut prefix = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        prefix += u;
        let cand = (prefix - r) / (j + 1) as f64;
        if u - cand > 0.0 {
            tau = cand;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&vi| (vi - tau).max(0.0) + mu).collect())
}

/// The naive exploration transform `(1 - eps) * x + (eps / n) * 1`.
///
/// Kept as the contrast to bounded-away projection: on non-simplex polytopes
/// it violates flow conservation, which is exactly why projection is used
/// instead.
pub fn epsilon_greedy_mix(x: &[f64], eps: f64) -> Vec<f64> {
    assert!((0.0..=1.0).contains(&eps), "eps must lie in [0, 1]");
    let n = x.len() as f64;
    x.iter().map(|&xe| (1.0 - eps) * xe + eps / n).collect()
}

/// Decomposes a polytope point into a convex combination of at most m paths
/// whose marginals reproduce `x` exactly (up to clipped float dust).
///
/// Loop: while flow still leaves the source, strip the globally smallest
/// positive coordinate `x_min` along a positive-support path through its
/// edge (ties toward the lowest edge id). Each pass zeroes at least that
/// edge, bounding both atom count and iterations by m. Residues below
/// [`EPS_FLOW`] are clipped to 0 so the loop cannot spin on float dust.
///
/// Inputs need not be exactly flow-feasible: anything within [`EPS_FEAS`] is
/// accepted (iteratively projected points carry error at that scale), and
/// residual mass of that order that ends up stranded on edges no remaining
/// positive path crosses is dropped rather than failing the round.
pub fn caratheodory_decompose(p: &PathPolytope, x: &FractionalStrategy) -> Result<PathMix> {
    let violation = p.membership_violation(x);
    if violation > EPS_FEAS {
        return Err(Error::NotInPolytope {
            violation,
            tol: EPS_FEAS,
        });
    }
    let g = p.graph().as_ref();
    let m = g.edge_count();
    // Stranded mass scales with the input's flow error (one imbalance per
    // node) plus what clipping itself can introduce (one clip per edge).
    let dust = violation * g.node_count() as f64 + 2.0 * m as f64 * EPS_FLOW;
    let mut residual = x.as_slice().to_vec();
    let mut atoms: Vec<(Path, f64)> = Vec::new();

    loop {
        let outflow: f64 = g.out_edges(p.source()).iter().map(|&e| residual[e]).sum();
        if outflow <= dust {
            break;
        }
        if atoms.len() >= m {
            return Err(Error::DecompositionStalled { iter: atoms.len() });
        }
        let mut e_min = None;
        let mut x_min = f64::INFINITY;
        for &e in p.active() {
            if residual[e] > EPS_FLOW && residual[e] < x_min {
                x_min = residual[e];
                e_min = Some(e);
            }
        }
        let Some(e_min) = e_min else {
            // Outflow above tolerance but no positive support left.
            return Err(Error::DecompositionStalled { iter: atoms.len() });
        };
        match find_positive_path(g, p.source(), p.sink(), &residual, e_min) {
            Ok(path) => {
                for &e in path.edges() {
                    residual[e] -= x_min;
                    if residual[e] < EPS_FLOW {
                        residual[e] = 0.0;
                    }
                }
                atoms.push((path, x_min));
            }
            Err(Error::NoPositivePath { .. }) if x_min <= dust => {
                residual[e_min] = 0.0;
            }
            Err(err) => return Err(err),
        }
    }

    Ok(PathMix { atoms })
}

/// Draws one path from the mix, consuming exactly one uniform variate.
pub fn sample_path(mix: &PathMix, rng: &mut impl Rng) -> Path {
    assert!(!mix.is_empty(), "cannot sample from an empty mix");
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (path, w) in &mix.atoms {
        acc += w;
        if u < acc {
            return path.clone();
        }
    }
    // u landed in the float-dust gap between total_weight and 1.
    mix.atoms.last().expect("nonempty mix").0.clone()
}
