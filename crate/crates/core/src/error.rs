//! Crate-wide error type. One flat enum: errors cross module boundaries
//! freely (the learner propagates projection failures, dynamics propagates
//! learner failures) and callers match on the variant, not the module.

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The edge list contains a directed cycle; only DAGs are supported.
    #[error("graph contains a directed cycle")]
    CycleDetected,

    /// A node id is outside `0..node_count`.
    #[error("node {node} out of range for a graph with {node_count} nodes")]
    InvalidNode { node: usize, node_count: usize },

    /// No directed path exists between the requested endpoints.
    #[error("no path from node {from} to node {to}")]
    Unreachable { from: usize, to: usize },

    /// Path enumeration found more paths than the caller's cap.
    #[error("path count exceeds cap {cap}")]
    CapExceeded { cap: usize },

    /// No positive-support path through the required edge. Flow conservation
    /// guarantees one exists for any polytope point, so hitting this means
    /// the vector was corrupted beyond tolerance.
    #[error("no positive-support path through edge {edge}; flow conservation violated")]
    NoPositivePath { edge: usize },

    /// The exploration floor exceeds what the polytope can support.
    #[error("mu {mu} exceeds 1/|active| = {max_mu}")]
    MuTooLarge { mu: f64, max_mu: f64 },

    /// Dykstra's iteration hit its cap with the flow residual still large.
    /// Should not occur on feasible polytopes; diagnostic only.
    #[error("projection did not converge in {iters} iterations (residual {residual:.3e})")]
    ProjectionDiverged { iters: usize, residual: f64 },

    /// The lower-bounded simplex {sum = 1, x >= mu} is empty.
    #[error("simplex lower bound infeasible: mu * n = {product} > 1")]
    Infeasible { product: f64 },

    /// Decomposition input failed the polytope membership precheck.
    #[error("point violates polytope membership by {violation:.3e} (tolerance {tol:.1e})")]
    NotInPolytope { violation: f64, tol: f64 },

    /// A decomposition iteration removed no mass (numerical corruption).
    #[error("decomposition stalled at iteration {iter}")]
    DecompositionStalled { iter: usize },

    /// Semi-bandit feedback does not cover exactly the sampled path's edges.
    #[error("feedback does not match the sampled path: {detail}")]
    FeedbackMismatch { detail: String },

    /// Exhaustive enumeration would exceed the profile cap.
    #[error("{size} pure profiles exceed enumeration cap {cap}")]
    TooLarge { size: u128, cap: u64 },

    /// A series is unusable for log-log rate fitting.
    #[error("degenerate series: {detail}")]
    DegenerateSeries { detail: String },

    /// A cost table is malformed (wrong length, negative, or decreasing).
    #[error("invalid cost table: {detail}")]
    InvalidCosts { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
