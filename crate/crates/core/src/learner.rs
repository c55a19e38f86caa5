//! The per-agent semi-bandit learner: a projected-descent state machine over
//! the bounded-away path polytope.
//!
//! Each round the learner decomposes its fractional point into a path
//! mixture, samples one path, importance-weights the observed edge costs by
//! the pre-decomposition marginals (they coincide with the mixture marginals
//! by construction, but the contract pins the former), takes a gradient step
//! and projects back onto the polytope with the next round's exploration
//! floor. Step sizes and floors come from one of three closed-form schedules
//! or a custom-constant override.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Path};
use crate::polytope::{
    caratheodory_decompose, feasible_bounded_point, project, sample_path, BoundedAwayView,
    FractionalStrategy, PathMix, PathPolytope,
};

/// Step-size / exploration-floor schedule family.
///
/// `Custom` keeps the default exponents (t^{-3/5} step, t^{-1/5} floor) and
/// exposes the raw constants in front of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchedulePreset {
    /// gamma_t = t^{-3/5}, mu_t = min(1/m_i, t^{-1/5})
    Default,
    /// gamma_t = c_max^{-1} m^{-1/2} t^{-3/4}, mu_t = min(1/m_i, m^{-1/2} t^{-1/4})
    RegretOptimal,
    /// gamma_t = m^{-4/5} n^{-8/5} c_max^{-1} t^{-3/5},
    /// mu_t = min(1/m_i, n^{-6/5} m^{-11/10} t^{-1/5})
    NashTuned,
    /// gamma_t = c_gamma t^{-3/5}, mu_t = min(1/m_i, c_mu t^{-1/5})
    Custom { c_gamma: f64, c_mu: f64 },
}

/// A fully instantiated schedule for one agent: the preset plus the game
/// dimensions its formulas need (n agents, m total edges, m_i active edges,
/// c_max). Both sequences are nonincreasing and `mu(t) <= 1/m_i` for all t.
#[derive(Debug, Clone, Copy)]
pub struct Schedule {
    preset: SchedulePreset,
    n: usize,
    m_total: usize,
    m_active: usize,
    c_max: f64,
}

impl Schedule {
    pub fn new(
        preset: SchedulePreset,
        n: usize,
        m_total: usize,
        m_active: usize,
        c_max: f64,
    ) -> Self {
        assert!(
            n >= 1 && m_active >= 1 && m_total >= m_active,
            "bad dimensions"
        );
        match preset {
            SchedulePreset::RegretOptimal | SchedulePreset::NashTuned => {
                assert!(
                    c_max > 0.0 && c_max.is_finite(),
                    "this preset divides by c_max"
                );
            }
            SchedulePreset::Custom { c_gamma, c_mu } => {
                assert!(
                    c_gamma > 0.0 && c_mu > 0.0,
                    "custom constants must be positive"
                );
            }
            SchedulePreset::Default => {}
        }
        Schedule {
            preset,
            n,
            m_total,
            m_active,
            c_max,
        }
    }

    pub fn preset(&self) -> SchedulePreset {
        self.preset
    }

    pub fn active_count(&self) -> usize {
        self.m_active
    }

    /// Step size at round t (1-based).
    pub fn gamma(&self, t: u64) -> f64 {
        assert!(t >= 1);
        let t = t as f64;
        let m = self.m_total as f64;
        let n = self.n as f64;
        match self.preset {
            SchedulePreset::Default => t.powf(-0.6),
            SchedulePreset::RegretOptimal => t.powf(-0.75) / (self.c_max * m.sqrt()),
            SchedulePreset::NashTuned => m.powf(-0.8) * n.powf(-1.6) / self.c_max * t.powf(-0.6),
            SchedulePreset::Custom { c_gamma, .. } => c_gamma * t.powf(-0.6),
        }
    }

    /// Exploration floor at round t (1-based), capped at 1/m_i.
    pub fn mu(&self, t: u64) -> f64 {
        assert!(t >= 1);
        let t = t as f64;
        let m = self.m_total as f64;
        let n = self.n as f64;
        let cap = 1.0 / self.m_active as f64;
        let raw = match self.preset {
            SchedulePreset::Default => t.powf(-0.2),
            SchedulePreset::RegretOptimal => t.powf(-0.25) / m.sqrt(),
            SchedulePreset::NashTuned => n.powf(-1.2) * m.powf(-1.1) * t.powf(-0.2),
            SchedulePreset::Custom { c_mu, .. } => c_mu * t.powf(-0.2),
        };
        cap.min(raw)
    }
}

/// How the initial point x^1 is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// The covering-path average: deterministic, strictly feasible.
    FeasibleConstruction,
    /// Average of |E_i| uniformly random paths, projected onto the floor.
    UniformMix,
}

/// One agent's learning state. The iterate always satisfies the bounded-away
/// membership for the current round's floor (within projection tolerance).
#[derive(Debug, Clone)]
pub struct LearnerState {
    agent_id: usize,
    polytope: Arc<PathPolytope>,
    x: FractionalStrategy,
    t: u64,
    schedule: Schedule,
    last_mix: Option<PathMix>,
    last_path: Option<Path>,
}

/// Creates a learner at round t = 1 with x^1 in the bounded-away polytope at
/// the initial floor mu_1 = 1/|E_i| (which dominates every later floor).
pub fn init_learner(
    agent_id: usize,
    polytope: Arc<PathPolytope>,
    schedule: Schedule,
    init_mode: InitMode,
    rng: &mut impl Rng,
) -> Result<LearnerState> {
    assert_eq!(
        schedule.active_count(),
        polytope.active_count(),
        "schedule built for a different polytope"
    );
    let mu1 = polytope.max_mu();
    let view = BoundedAwayView::new(&polytope, mu1);
    let x = match init_mode {
        InitMode::FeasibleConstruction => feasible_bounded_point(&view)?,
        InitMode::UniformMix => {
            let m = polytope.graph().edge_count();
            let k = polytope.active_count();
            let mut sum = vec![0.0; m];
            for _ in 0..k {
                let path = polytope.random_active_path(rng);
                for &e in path.edges() {
                    sum[e] += 1.0;
                }
            }
            for s in &mut sum {
                *s /= k as f64;
            }
            project(&view, &sum)?
        }
    };
    Ok(LearnerState {
        agent_id,
        polytope,
        x,
        t: 1,
        schedule,
        last_mix: None,
        last_path: None,
    })
}

impl LearnerState {
    pub fn agent_id(&self) -> usize {
        self.agent_id
    }

    pub fn x(&self) -> &FractionalStrategy {
        &self.x
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// The exploration floor in force for the current round.
    pub fn mu_now(&self) -> f64 {
        self.schedule.mu(self.t)
    }

    pub fn polytope(&self) -> &Arc<PathPolytope> {
        &self.polytope
    }

    pub fn last_path(&self) -> Option<&Path> {
        self.last_path.as_ref()
    }

    pub fn last_mix(&self) -> Option<&PathMix> {
        self.last_mix.as_ref()
    }

    /// Decomposes the current iterate into a path mixture and samples this
    /// round's path from it (one uniform draw).
    pub fn choose(&mut self, rng: &mut impl Rng) -> Result<Path> {
        let mix = caratheodory_decompose(&self.polytope, &self.x)?;
        let path = sample_path(&mix, rng);
        self.last_mix = Some(mix);
        self.last_path = Some(path.clone());
        Ok(path)
    }

    /// Importance-weighted cost estimate from semi-bandit feedback:
    /// c_e / x_e on traversed edges, 0 elsewhere. `observed` must cover
    /// exactly the edges of the path returned by the latest [`choose`].
    ///
    /// [`choose`]: LearnerState::choose
    pub fn estimate_costs(&self, observed: &[(EdgeId, f64)]) -> Result<Vec<f64>> {
        let Some(path) = &self.last_path else {
            return Err(Error::FeedbackMismatch {
                detail: "no path sampled this round".to_owned(),
            });
        };
        let mut got: Vec<EdgeId> = observed.iter().map(|&(e, _)| e).collect();
        got.sort_unstable();
        let mut want: Vec<EdgeId> = path.edges().to_vec();
        want.sort_unstable();
        if got != want {
            return Err(Error::FeedbackMismatch {
                detail: format!("observed edges {got:?}, sampled path edges {want:?}"),
            });
        }
        let mut c_hat = vec![0.0; self.polytope.graph().edge_count()];
        for &(e, c) in observed {
            assert!(c.is_finite(), "observed cost must be finite");
            c_hat[e] = c / self.x[e];
        }
        Ok(c_hat)
    }

    /// Descent step and projection onto the next round's floor:
    /// x^{t+1} = Pi_{X^{mu_{t+1}}}[x^t - gamma_t c_hat], then t advances.
    pub fn update(&mut self, c_hat: &[f64]) -> Result<()> {
        assert_eq!(c_hat.len(), self.polytope.graph().edge_count());
        assert!(
            c_hat.iter().all(|c| c.is_finite()),
            "estimate must be finite"
        );
        let gamma = self.schedule.gamma(self.t);
        let y: Vec<f64> = self
            .x
            .iter()
            .zip(c_hat)
            .map(|(&xe, &ce)| xe - gamma * ce)
            .collect();
        self.t += 1;
        let mu_next = self.schedule.mu(self.t);
        let view = BoundedAwayView::new(&self.polytope, mu_next);
        self.x = project(&view, &y)?;
        self.last_mix = None;
        self.last_path = None;
        Ok(())
    }
}
