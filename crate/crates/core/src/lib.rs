//! Semi-bandit projected-gradient learning in network congestion games.
//!
//! `congame` simulates agents that each repeatedly route one unit of flow
//! from a source to a sink in a shared directed acyclic graph. Edge costs
//! grow with the number of agents using the edge. Agents never see the cost
//! function: after committing to a path they observe only the realized cost
//! of each edge they traversed (semi-bandit feedback). Each agent runs
//! projected gradient descent on a fractional flow, kept strictly inside its
//! path polytope by a shrinking exploration floor, and plays a random path
//! from an exact convex decomposition of that flow.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: DAGs, paths, shortest paths, path enumeration.
//! - [`polytope`]: the flow polytope of one agent, projections onto it, and
//!   the convex decomposition of a flow into few paths.
//! - [`game`]: tabulated congestion costs, exact expected potential and its
//!   gradient under independent mixing, exploitability and stationarity
//!   diagnostics, a brute-force equilibrium finder for small instances.
//! - [`learner`]: the per-agent descent state machine and its step-size and
//!   exploration schedules.
//! - [`dynamics`]: round-based drivers for full games and for a single
//!   learner against scripted costs, plus a log-log rate fit.
//!
//! All randomness flows through caller-provided seeds; identical seeds give
//! identical trajectories. Numeric tolerances shared across modules are the
//! `EPS_*` constants below.

pub mod dynamics;
pub mod error;
pub mod game;
pub mod graph;
pub mod learner;
pub mod polytope;

pub use error::{Error, Result};

/// Flow below this is treated as zero when decomposing and routing.
pub const EPS_FLOW: f64 = 1e-12;

/// Slack allowed when checking a point for polytope membership.
pub const EPS_FEAS: f64 = 1e-9;

/// Projection stops when successive iterates move less than this in 2-norm.
pub const EPS_PROJ: f64 = 1e-10;

/// Projection iteration cap; exceeding it with a bad flow residual is an
/// error rather than a silent wrong answer.
pub const PROJ_MAX_ITERS: usize = 10_000;

/// Flow-conservation residual above which an unconverged projection is
/// reported as divergence instead of being returned.
pub const PROJ_RESIDUAL_TOL: f64 = 1e-6;
