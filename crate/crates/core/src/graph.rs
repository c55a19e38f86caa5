//! Directed acyclic multigraphs with the path machinery the rest of the
//! crate builds on: active-edge computation by double reachability,
//! shortest paths by dynamic programming over a topological order, exhaustive
//! path enumeration for small-instance oracles, and positive-support path
//! extraction for flow decomposition.
//!
//! Parallel edges are first class: edges are identified by dense ids
//! `0..m`, never by their endpoint pair. All tie-breaking is by lowest
//! edge id so that every operation is deterministic.

use crate::error::{Error, Result};
use crate::EPS_FLOW;

pub type NodeId = usize;
pub type EdgeId = usize;

/// Immutable directed acyclic multigraph. Construct with [`build_dag`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    node_count: usize,
    /// edge id -> (tail, head)
    edges: Vec<(NodeId, NodeId)>,
    /// per node, outgoing edge ids in ascending order
    out_edges: Vec<Vec<EdgeId>>,
    /// per node, incoming edge ids in ascending order
    in_edges: Vec<Vec<EdgeId>>,
    /// nodes in a topological order
    topo_order: Vec<NodeId>,
}

impl Dag {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn tail(&self, e: EdgeId) -> NodeId {
        self.edges[e].0
    }

    pub fn head(&self, e: EdgeId) -> NodeId {
        self.edges[e].1
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_edges[v]
    }

    pub fn topo_order(&self) -> &[NodeId] {
        &self.topo_order
    }

    /// Nodes reachable from `s` along edges whose entry in `allowed` is true.
    fn reachable_forward(&self, s: NodeId, allowed: impl Fn(EdgeId) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.out_edges[u] {
                let v = self.head(e);
                if allowed(e) && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Nodes from which `t` is reachable along edges whose entry in `allowed` is true.
    fn reachable_backward(&self, t: NodeId, allowed: impl Fn(EdgeId) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        seen[t] = true;
        let mut stack = vec![t];
        while let Some(v) = stack.pop() {
            for &e in &self.in_edges[v] {
                let u = self.tail(e);
                if allowed(e) && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }
}

/// A simple directed s-t path, stored as the edge ids walked in order.
///
/// In a DAG every directed walk is automatically simple, so validity
/// reduces to consecutive edges sharing head and tail.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    edges: Vec<EdgeId>,
}

impl Path {
    pub fn new(edges: Vec<EdgeId>) -> Self {
        Path { edges }
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.contains(&e)
    }

    /// 0/1 membership vector of length `m`.
    pub fn indicator(&self, m: usize) -> Vec<f64> {
        let mut x = vec![0.0; m];
        for &e in &self.edges {
            x[e] = 1.0;
        }
        x
    }

    /// True iff the edges form a connected s->t walk in `g`.
    pub fn is_valid(&self, g: &Dag, s: NodeId, t: NodeId) -> bool {
        let mut at = s;
        for &e in &self.edges {
            if e >= g.edge_count() || g.tail(e) != at {
                return false;
            }
            at = g.head(e);
        }
        at == t && !self.edges.is_empty()
    }
}

/// Builds a [`Dag`] from an edge list, verifying acyclicity (Kahn's algorithm).
///
/// Edge ids are assigned densely in input order.
pub fn build_dag(nodes: usize, edge_list: &[(NodeId, NodeId)]) -> Result<Dag> {
    assert!(nodes >= 2, "a routing graph needs at least two nodes");
    for &(u, v) in edge_list {
        for node in [u, v] {
            if node >= nodes {
                return Err(Error::InvalidNode {
                    node,
                    node_count: nodes,
                });
            }
        }
    }
    let mut out_edges = vec![Vec::new(); nodes];
    let mut in_edges = vec![Vec::new(); nodes];
    for (e, &(u, v)) in edge_list.iter().enumerate() {
        out_edges[u].push(e);
        in_edges[v].push(e);
    }

    let mut indegree: Vec<usize> = in_edges.iter().map(Vec::len).collect();
    let mut queue: Vec<NodeId> = (0..nodes).filter(|&v| indegree[v] == 0).collect();
    let mut topo_order = Vec::with_capacity(nodes);
    while let Some(u) = queue.pop() {
        topo_order.push(u);
        for &e in &out_edges[u] {
            let v = edge_list[e].1;
            indegree[v] -= 1;
            if indegree[v] == 0 {
                queue.push(v);
            }
        }
    }
    if topo_order.len() != nodes {
        return Err(Error::CycleDetected);
    }

    Ok(Dag {
        node_count: nodes,
        edges: edge_list.to_vec(),
        out_edges,
        in_edges,
        topo_order,
    })
}

/// Edges lying on at least one s->t path: `{e=(u,v) : s reaches u and v reaches t}`,
/// by one forward and one backward reachability sweep. Returns ascending edge ids;
/// empty when `t` is unreachable (or `s == t`, since a DAG has no cycles).
pub fn active_edges(g: &Dag, s: NodeId, t: NodeId) -> Vec<EdgeId> {
    assert!(
        s < g.node_count() && t < g.node_count(),
        "endpoint out of range"
    );
    if s == t {
        return Vec::new();
    }
    let from_s = g.reachable_forward(s, |_| true);
    let to_t = g.reachable_backward(t, |_| true);
    (0..g.edge_count())
        .filter(|&e| from_s[g.tail(e)] && to_t[g.head(e)])
        .collect()
}

/// Minimum-weight s->t path by DP over the topological order.
///
/// Ties are broken toward the smallest edge id entering each node, which
/// pins a unique path for any weight vector.
pub fn shortest_path(g: &Dag, s: NodeId, t: NodeId, weights: &[f64]) -> Result<(Path, f64)> {
    assert_eq!(weights.len(), g.edge_count(), "one weight per edge");
    assert!(
        weights.iter().all(|w| w.is_finite()),
        "weights must be finite"
    );
    for node in [s, t] {
        if node >= g.node_count() {
            return Err(Error::InvalidNode {
                node,
                node_count: g.node_count(),
            });
        }
    }
    let mut dist = vec![f64::INFINITY; g.node_count()];
    let mut parent: Vec<Option<EdgeId>> = vec![None; g.node_count()];
    dist[s] = 0.0;
    for &v in g.topo_order() {
        if v == s {
            continue;
        }
        // in_edges are ascending, and only a strict improvement replaces the
        // incumbent, so the smallest edge id among minimizers wins.
        for &e in g.in_edges(v) {
            let u = g.tail(e);
            if dist[u].is_finite() {
                let cand = dist[u] + weights[e];
                if cand < dist[v] {
                    dist[v] = cand;
                    parent[v] = Some(e);
                }
            }
        }
    }
    if s == t || !dist[t].is_finite() {
        return Err(Error::Unreachable { from: s, to: t });
    }
    let mut edges = Vec::new();
    let mut v = t;
    while v != s {
        let e = parent[v].expect("finite dist implies a parent edge");
        edges.push(e);
        v = g.tail(e);
    }
    edges.reverse();
    Ok((Path::new(edges), dist[t]))
}

/// All simple s->t paths in lexicographic edge-id order.
///
/// Intended as a small-instance oracle; errors with [`Error::CapExceeded`]
/// as soon as more than `cap` paths exist.
pub fn enumerate_paths(g: &Dag, s: NodeId, t: NodeId, cap: usize) -> Result<Vec<Path>> {
    for node in [s, t] {
        if node >= g.node_count() {
            return Err(Error::InvalidNode {
                node,
                node_count: g.node_count(),
            });
        }
    }
    if s == t {
        return Ok(Vec::new());
    }
    // Restricting the walk to nodes that still reach t makes every branch of
    // the DFS end in a recorded path, so the cap triggers without wasted work.
    let to_t = g.reachable_backward(t, |_| true);
    let mut paths = Vec::new();
    let mut current = Vec::new();
    dfs_enumerate(g, s, t, &to_t, cap, &mut current, &mut paths)?;
    Ok(paths)
}

fn dfs_enumerate(
    g: &Dag,
    at: NodeId,
    t: NodeId,
    to_t: &[bool],
    cap: usize,
    current: &mut Vec<EdgeId>,
    paths: &mut Vec<Path>,
) -> Result<()> {
    if at == t {
        if paths.len() >= cap {
            return Err(Error::CapExceeded { cap });
        }
        paths.push(Path::new(current.clone()));
        return Ok(());
    }
    for &e in g.out_edges(at) {
        if to_t[g.head(e)] {
            current.push(e);
            dfs_enumerate(g, g.head(e), t, to_t, cap, current, paths)?;
            current.pop();
        }
    }
    Ok(())
}

/// DFS from `start` over edges with `x_e > EPS_FLOW`, recording the discovery
/// parent of each node. Out-edges are tried in ascending id order.
fn positive_dfs_parents(g: &Dag, start: NodeId, x: &[f64]) -> Vec<Option<EdgeId>> {
    let mut parent = vec![None; g.node_count()];
    let mut seen = vec![false; g.node_count()];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        // Reverse push order so the lowest edge id is explored first.
        for &e in g.out_edges(u).iter().rev() {
            let v = g.head(e);
            if x[e] > EPS_FLOW && !seen[v] {
                seen[v] = true;
                parent[v] = Some(e);
                stack.push(v);
            }
        }
    }
    parent
}

/// Walks parent pointers from `to` back to `from`; None if never discovered.
fn parent_walk(
    g: &Dag,
    parent: &[Option<EdgeId>],
    from: NodeId,
    to: NodeId,
) -> Option<Vec<EdgeId>> {
    let mut edges = Vec::new();
    let mut v = to;
    while v != from {
        let e = parent[v]?;
        edges.push(e);
        v = g.tail(e);
    }
    edges.reverse();
    Some(edges)
}

/// A simple s->t path through `required_edge` using only edges with
/// `x_e > EPS_FLOW`: forward DFS s -> tail(required_edge), then
/// head(required_edge) -> t, both preferring the lowest edge id.
///
/// For any `x` satisfying the flow constraints with `x[required_edge] > 0`
/// such a path exists, so [`Error::NoPositivePath`] signals numerical
/// corruption of `x` rather than an expected condition. The two segments
/// cannot share a node: that would close a directed cycle.
pub fn find_positive_path(
    g: &Dag,
    s: NodeId,
    t: NodeId,
    x: &[f64],
    required_edge: EdgeId,
) -> Result<Path> {
    assert_eq!(x.len(), g.edge_count(), "one marginal per edge");
    assert!(required_edge < g.edge_count(), "edge id out of range");
    if x[required_edge] <= EPS_FLOW {
        return Err(Error::NoPositivePath {
            edge: required_edge,
        });
    }
    let (u, v) = (g.tail(required_edge), g.head(required_edge));

    let from_s = positive_dfs_parents(g, s, x);
    let Some(mut edges) = parent_walk(g, &from_s, s, u) else {
        return Err(Error::NoPositivePath {
            edge: required_edge,
        });
    };
    edges.push(required_edge);
    let from_head = positive_dfs_parents(g, v, x);
    let Some(rest) = parent_walk(g, &from_head, v, t) else {
        return Err(Error::NoPositivePath {
            edge: required_edge,
        });
    };
    edges.extend(rest);
    Ok(Path::new(edges))
}
