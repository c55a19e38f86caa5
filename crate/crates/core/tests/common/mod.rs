//! Shared fixtures and independent oracles for the integration tests.
//!
//! Everything here recomputes results from definitions by brute force:
//! exhaustive face enumeration for projections, 2^n subset sums for
//! load-distribution quantities, full products of path sets for expected
//! costs. The oracles are deliberately slow and simple so that the fast
//! implementations in the crate can be checked against them.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use congame::graph::{build_dag, Dag, EdgeId, NodeId, Path};
use congame::polytope::PathPolytope;

pub fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn max_abs_diff(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    xs.iter()
        .zip(ys)
        .map(|(&a, &b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub fn l2_dist(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    xs.iter()
        .zip(ys)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn mean_and_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|&s| (s - mean) * (s - mean))
        .sum::<f64>()
        / (n - 1.0);
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Fixture graphs
// ---------------------------------------------------------------------------

/// Two nodes joined by `k` parallel edges; the path polytope is the k-simplex.
pub fn parallel(k: usize) -> Arc<Dag> {
    Arc::new(build_dag(2, &vec![(0, 1); k]).unwrap())
}

/// 0 -> {1, 2} -> 3 with edges 0:(0,1) 1:(0,2) 2:(1,3) 3:(2,3).
pub fn diamond() -> Arc<Dag> {
    Arc::new(build_dag(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap())
}

/// Diamond plus the chord 4:(1,2); three s-t paths {0,2} {1,3} {0,4,3}.
pub fn diamond_with_chord() -> Arc<Dag> {
    Arc::new(build_dag(4, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)]).unwrap())
}

/// Chain of `k` segments with `d` parallel edges each: k+1 nodes, k*d edges,
/// d^k source-to-sink paths. Edge ids run segment-major.
pub fn chain(k: usize, d: usize) -> Arc<Dag> {
    let mut edges = Vec::with_capacity(k * d);
    for seg in 0..k {
        for _ in 0..d {
            edges.push((seg, seg + 1));
        }
    }
    Arc::new(build_dag(k + 1, &edges).unwrap())
}

/// A random layered DAG with guaranteed s-t connectivity: node 0 is the
/// source, the last node the sink, `width` nodes per middle layer. Every
/// middle node gets at least one incoming and one outgoing edge; extra edges
/// (including skips over one layer) are sprinkled at random.
pub fn random_layered_dag(
    rng: &mut impl Rng,
    middle_layers: usize,
    width: usize,
) -> (Arc<Dag>, NodeId, NodeId) {
    assert!(middle_layers >= 1 && width >= 1);
    let mut layers: Vec<Vec<NodeId>> = vec![vec![0]];
    let mut next = 1;
    for _ in 0..middle_layers {
        layers.push((next..next + width).collect());
        next += width;
    }
    layers.push(vec![next]);
    let node_count = next + 1;

    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for w in layers.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        for &v in cur {
            let u = prev[rng.random_range(0..prev.len())];
            edges.push((u, v));
        }
        for &u in prev {
            if !edges.iter().any(|&(a, _)| a == u) {
                let v = cur[rng.random_range(0..cur.len())];
                edges.push((u, v));
            }
        }
        // extra in-layer-pair edges, parallels allowed
        for _ in 0..rng.random_range(0..=width) {
            let u = prev[rng.random_range(0..prev.len())];
            let v = cur[rng.random_range(0..cur.len())];
            edges.push((u, v));
        }
    }
    // occasional skip edges over one layer
    for li in 0..layers.len().saturating_sub(2) {
        if rng.random::<f64>() < 0.5 {
            let u = layers[li][rng.random_range(0..layers[li].len())];
            let v = layers[li + 2][rng.random_range(0..layers[li + 2].len())];
            edges.push((u, v));
        }
    }
    let dag = Arc::new(build_dag(node_count, &edges).unwrap());
    (dag, 0, node_count - 1)
}

/// A random point of the path polytope built as an explicit path mixture,
/// returned with its generating atoms. Exact membership up to float dust.
pub fn random_mixture_point(
    p: &PathPolytope,
    rng: &mut impl Rng,
    max_paths: usize,
) -> (Vec<f64>, Vec<(Path, f64)>) {
    let k = rng.random_range(1..=max_paths);
    let paths: Vec<Path> = (0..k).map(|_| p.random_active_path(rng)).collect();
    let mut weights: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut x = vec![0.0; p.graph().edge_count()];
    for (path, &w) in paths.iter().zip(&weights) {
        for &e in path.edges() {
            x[e] += w;
        }
    }
    (x, paths.into_iter().zip(weights).collect())
}

// ---------------------------------------------------------------------------
// Projection oracle: exhaustive active-set QP
// ---------------------------------------------------------------------------

/// Flow-equality system over the active coordinates, rebuilt from scratch:
/// one row per non-sink node touching an active edge (out-flow 1 at the
/// source, conservation elsewhere).
pub fn flow_system(
    g: &Dag,
    s: NodeId,
    t: NodeId,
    active: &[EdgeId],
) -> (DMatrix<f64>, DVector<f64>) {
    let idx: HashMap<EdgeId, usize> = active.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for v in 0..g.node_count() {
        if v == t {
            continue;
        }
        let mut row = vec![0.0; active.len()];
        let mut touched = false;
        for &e in g.out_edges(v) {
            if let Some(&j) = idx.get(&e) {
                row[j] += if v == s { 1.0 } else { -1.0 };
                touched = true;
            }
        }
        if v != s {
            for &e in g.in_edges(v) {
                if let Some(&j) = idx.get(&e) {
                    row[j] += 1.0;
                    touched = true;
                }
            }
        }
        if touched {
            rows.push(row);
            rhs.push(if v == s { 1.0 } else { 0.0 });
        }
    }
    let a = DMatrix::from_fn(rows.len(), active.len(), |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    (a, b)
}

/// Euclidean projection onto the bounded-away polytope by exhaustive
/// enumeration of box faces: every active coordinate is free, pinned at mu,
/// or pinned at 1; each face's equality-constrained least-squares problem is
/// solved through the KKT system, and the closest feasible candidate wins.
/// Exponential in the active-edge count; callers keep it at <= 10.
pub fn projection_oracle(p: &PathPolytope, mu: f64, y: &[f64]) -> Vec<f64> {
    let g = p.graph().as_ref();
    let active = p.active();
    let k = active.len();
    assert!(k <= 10, "3^k face enumeration");
    let (a, b) = flow_system(g, p.source(), p.sink(), active);
    let y_act = DVector::from_fn(k, |j, _| y[active[j]]);

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut state = vec![0u8; k]; // 0 free, 1 pinned at mu, 2 pinned at 1
    loop {
        let pins = state.iter().filter(|&&s| s != 0).count();
        let rows = a.nrows() + pins;
        let mut c = DMatrix::<f64>::zeros(rows, k);
        let mut d = DVector::<f64>::zeros(rows);
        c.view_mut((0, 0), (a.nrows(), k)).copy_from(&a);
        d.rows_mut(0, a.nrows()).copy_from(&b);
        let mut r = a.nrows();
        for (j, &s) in state.iter().enumerate() {
            if s != 0 {
                c[(r, j)] = 1.0;
                d[r] = if s == 1 { mu } else { 1.0 };
                r += 1;
            }
        }
        // min ||x - y||^2 s.t. Cx = d  =>  x = y + C^T lam with (C C^T) lam = d - C y
        let cct = &c * c.transpose();
        let rhs = &d - &c * &y_act;
        if let Ok(lam) = nalgebra::SVD::new(cct, true, true).solve(&rhs, 1e-12) {
            let x = &y_act + c.transpose() * lam;
            let consistent = (&c * &x - &d).amax() <= 1e-7;
            let feasible = x.iter().all(|&v| v >= mu - 1e-7 && v <= 1.0 + 1e-7);
            if consistent && feasible {
                let dist2 = (&x - &y_act).norm_squared();
                if best.as_ref().is_none_or(|(bd, _)| dist2 < *bd) {
                    best = Some((dist2, x));
                }
            }
        }
        // base-3 odometer over the face states
        let mut pos = k;
        loop {
            if pos == 0 {
                let (_, x_act) = best.expect("some face must contain the projection");
                let mut full = vec![0.0; g.edge_count()];
                for (j, &e) in active.iter().enumerate() {
                    full[e] = x_act[j];
                }
                return full;
            }
            pos -= 1;
            state[pos] += 1;
            if state[pos] < 3 {
                break;
            }
            state[pos] = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// Subset-enumeration oracles for fractional quantities
// ---------------------------------------------------------------------------

/// P[load = s] on one edge by enumerating all 2^n inclusion subsets.
pub fn load_dist_subset_oracle(probs: &[f64]) -> Vec<f64> {
    let n = probs.len();
    assert!(n <= 20);
    let mut dist = vec![0.0; n + 1];
    for mask in 0u32..(1 << n) {
        let mut pr = 1.0;
        for (i, &q) in probs.iter().enumerate() {
            pr *= if mask >> i & 1 == 1 { q } else { 1.0 - q };
        }
        dist[mask.count_ones() as usize] += pr;
    }
    dist
}

/// The fractional potential by direct subset enumeration:
/// sum_e sum_{S subset [n]} P[S selects e] * sum_{j=0}^{|S|} c_e(j).
pub fn potential_subset_oracle(cost_tables: &[Vec<f64>], marginals: &[Vec<f64>]) -> f64 {
    let n = marginals.len();
    assert!(n <= 20);
    let mut phi = 0.0;
    for (e, table) in cost_tables.iter().enumerate() {
        for mask in 0u32..(1 << n) {
            let mut pr = 1.0;
            for (i, x) in marginals.iter().enumerate() {
                pr *= if mask >> i & 1 == 1 { x[e] } else { 1.0 - x[e] };
            }
            let load = mask.count_ones() as usize;
            let cum: f64 = table[..=load].iter().sum();
            phi += pr * cum;
        }
    }
    phi
}

/// E[c_e(1 + L_{-i,e})] for every edge, by subset enumeration over the other
/// agents.
pub fn deviation_weight_oracle(
    cost_tables: &[Vec<f64>],
    marginals: &[Vec<f64>],
    i: usize,
) -> Vec<f64> {
    let n = marginals.len();
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    cost_tables
        .iter()
        .enumerate()
        .map(|(e, table)| {
            let mut w = 0.0;
            for mask in 0u32..(1 << others.len()) {
                let mut pr = 1.0;
                for (bit, &j) in others.iter().enumerate() {
                    let x = marginals[j][e];
                    pr *= if mask >> bit & 1 == 1 { x } else { 1.0 - x };
                }
                w += pr * table[mask.count_ones() as usize + 1];
            }
            w
        })
        .collect()
}

/// Central finite differences of `f` in coordinate `j` of a flat vector.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut hi = x.to_vec();
    hi[j] += h;
    let mut lo = x.to_vec();
    lo[j] -= h;
    (f(&hi) - f(&lo)) / (2.0 * h)
}

/// Expected cost of agent `i` under explicit independent path mixtures, by
/// enumerating the full product of atom choices. Independent of all
/// fractional machinery in the crate.
pub fn expected_cost_product_oracle(
    cost_tables: &[Vec<f64>],
    mixes: &[Vec<(Path, f64)>],
    i: usize,
    m: usize,
) -> f64 {
    let n = mixes.len();
    let mut total = 0.0;
    let mut index = vec![0usize; n];
    loop {
        let mut pr = 1.0;
        let mut loads = vec![0u32; m];
        for (j, &a) in index.iter().enumerate() {
            let (path, w) = &mixes[j][a];
            pr *= w;
            for &e in path.edges() {
                loads[e] += 1;
            }
        }
        let (path_i, _) = &mixes[i][index[i]];
        let cost: f64 = path_i
            .edges()
            .iter()
            .map(|&e| cost_tables[e][loads[e] as usize])
            .sum();
        total += pr * cost;
        let mut pos = n;
        loop {
            if pos == 0 {
                return total;
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < mixes[pos].len() {
                break;
            }
            index[pos] = 0;
        }
    }
}

/// The fractional potential under explicit independent path mixtures, again
/// by full product enumeration: E[sum_e sum_{j=0}^{load_e} c_e(j)].
pub fn potential_product_oracle(
    cost_tables: &[Vec<f64>],
    mixes: &[Vec<(Path, f64)>],
    m: usize,
) -> f64 {
    let n = mixes.len();
    let mut total = 0.0;
    let mut index = vec![0usize; n];
    loop {
        let mut pr = 1.0;
        let mut loads = vec![0u32; m];
        for (j, &a) in index.iter().enumerate() {
            let (path, w) = &mixes[j][a];
            pr *= w;
            for &e in path.edges() {
                loads[e] += 1;
            }
        }
        let phi: f64 = loads
            .iter()
            .enumerate()
            .map(|(e, &l)| cost_tables[e][..=(l as usize)].iter().sum::<f64>())
            .sum();
        total += pr * phi;
        let mut pos = n;
        loop {
            if pos == 0 {
                return total;
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < mixes[pos].len() {
                break;
            }
            index[pos] = 0;
        }
    }
}

/// Random nondecreasing cost tables with c(0) = 0 and increments bounded
/// away from zero, so finite-difference comparisons stay well conditioned.
pub fn random_cost_tables(rng: &mut impl Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            let mut c = 0.0;
            let mut table = Vec::with_capacity(n + 1);
            table.push(0.0);
            for _ in 0..n {
                c += 0.1 + 0.9 * rng.random::<f64>();
                table.push(c);
            }
            table
        })
        .collect()
}
