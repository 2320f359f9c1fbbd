//! Agent-based Monte Carlo counterpart of the mean-field model.
//!
//! Each step every agent earns a payoff from the current resource level and
//! incentive scheme, imitates a uniformly drawn peer with probability
//! `min(1, (F_j - F_i) / M)` when the peer earned more, and then the shared
//! pool is harvested and regrown by one discrete logistic update. Strategy
//! updates are synchronous: all comparisons use the payoffs and strategies of
//! the current step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cycles::BASIN_TOL;
use crate::dynamics::{detect_outcome, integrate, IntegratorConfig, Outcome, TerminalFlag, Trajectory};
use crate::equilibria::{equilibrium_report, FixedPoint};
use crate::error::{LabError, Result};
use crate::model::{IncentiveKind, ModelParams, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentRunConfig {
    pub params: ModelParams,
    pub kind: IncentiveKind,
    /// Imitation noise scale `M`.
    pub noise: f64,
    pub seed: u64,
    pub steps: u64,
    pub initial_cooperators: u32,
    pub initial_resource: f64,
}

impl AgentRunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(LabError::invalid("abm", "noise must be > 0"));
        }
        if self.initial_cooperators > self.params.group_size {
            return Err(LabError::invalid(
                "abm",
                "initial_cooperators must not exceed group_size",
            ));
        }
        if !(0.0..=self.params.capacity).contains(&self.initial_resource) {
            return Err(LabError::invalid("abm", "initial_resource outside [0, R_m]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// `true` for cooperators.
    pub strategies: Vec<bool>,
    pub resource: f64,
    pub step: u64,
}

impl AgentState {
    pub fn initial(config: &AgentRunConfig) -> Self {
        let n = config.params.group_size as usize;
        let c = config.initial_cooperators as usize;
        AgentState {
            strategies: (0..n).map(|i| i < c).collect(),
            resource: config.initial_resource,
            step: 0,
        }
    }

    pub fn cooperators(&self) -> usize {
        self.strategies.iter().filter(|&&s| s).count()
    }

    pub fn mean_field(&self) -> SystemState {
        SystemState::new(
            self.cooperators() as f64 / self.strategies.len() as f64,
            self.resource,
        )
    }
}

/// Per-agent payoffs for the current strategies and resource level.
pub fn agent_payoffs(state: &AgentState, config: &AgentRunConfig) -> Vec<f64> {
    let p = &config.params;
    let n = p.n();
    let quota = p.max_quota * state.resource / p.capacity;
    let cooperators = state.cooperators();
    let defectors = state.strategies.len() - cooperators;
    let delta = p.tax;
    // only members of the class that exists ever read their own value
    let (coop, defect) = match config.kind {
        IncentiveKind::Reward => (
            quota - delta + n * delta / cooperators.max(1) as f64,
            (1.0 + p.defection_rate) * quota - delta,
        ),
        IncentiveKind::Punishment => (
            quota - delta,
            (1.0 + p.defection_rate) * quota - delta - n * delta / defectors.max(1) as f64,
        ),
    };
    state
        .strategies
        .iter()
        .map(|&s| if s { coop } else { defect })
        .collect()
}

/// Discrete logistic regrowth minus this step's harvest, clamped to `[0, R_m]`.
pub fn resource_step(state: &AgentState, config: &AgentRunConfig) -> f64 {
    let p = &config.params;
    let y = state.resource;
    let quota = p.max_quota * y / p.capacity;
    let cooperators = state.cooperators() as f64;
    let defectors = state.strategies.len() as f64 - cooperators;
    let harvest = quota * (cooperators + (1.0 + p.defection_rate) * defectors);
    let next = y + p.growth_rate * y * (1.0 - y / p.capacity) - harvest;
    next.clamp(0.0, p.capacity)
}

/// Synchronous pairwise imitation against uniformly drawn peers.
pub fn imitation_step<R: Rng + ?Sized>(
    state: &AgentState,
    payoffs: &[f64],
    config: &AgentRunConfig,
    rng: &mut R,
) -> Vec<bool> {
    let n = state.strategies.len();
    let mut next = state.strategies.clone();
    if n < 2 {
        return next;
    }
    for i in 0..n {
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let gain = payoffs[j] - payoffs[i];
        if gain > 0.0 && state.strategies[j] != state.strategies[i] {
            let q = (gain / config.noise).min(1.0);
            if rng.gen::<f64>() < q {
                next[i] = state.strategies[j];
            }
        }
    }
    next
}

/// Runs `steps` rounds of payoffs, imitation and resource update, recording
/// `(cooperator fraction, resource)` after every round.
pub fn run_abm(config: &AgentRunConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AgentState::initial(config);
    let mut times = Vec::with_capacity(config.steps as usize + 1);
    let mut states = Vec::with_capacity(config.steps as usize + 1);
    times.push(0.0);
    states.push(state.mean_field());
    for _ in 0..config.steps {
        let payoffs = agent_payoffs(&state, config);
        state.strategies = imitation_step(&state, &payoffs, config, &mut rng);
        state.resource = resource_step(&state, config);
        state.step += 1;
        times.push(state.step as f64);
        states.push(state.mean_field());
    }
    Ok(Trajectory {
        times,
        states,
        terminal_flag: TerminalFlag::ReachedTEnd,
        clamp_events: 0,
    })
}

/// Fraction of the run averaged by [`summarize`].
pub const FINAL_WINDOW: f64 = 0.1;

/// Box tolerances `(|dx|, |dy| / R_m)` for matching a run to a fixed point.
pub const MATCH_TOL: (f64, f64) = (0.05, 0.05);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmSummary {
    pub seed: u64,
    pub steps: u64,
    pub window_len: usize,
    pub final_window_mean: SystemState,
    /// Label of the stable fixed point the window mean matches, if any.
    pub attractor: Option<String>,
}

pub fn final_window_mean(traj: &Trajectory, fraction: f64) -> (SystemState, usize) {
    let len = ((traj.len() as f64 * fraction).ceil() as usize).clamp(1, traj.len());
    let window = &traj.states[traj.len() - len..];
    let x = window.iter().map(|s| s.x).sum::<f64>() / len as f64;
    let y = window.iter().map(|s| s.y).sum::<f64>() / len as f64;
    (SystemState::new(x, y), len)
}

/// Averages the final tenth of a run and matches it to a stable fixed point.
pub fn summarize(config: &AgentRunConfig, traj: &Trajectory, stable: &[FixedPoint]) -> AbmSummary {
    let (mean, len) = final_window_mean(traj, FINAL_WINDOW);
    let cap = config.params.capacity;
    let attractor = stable
        .iter()
        .filter(|fp| {
            (fp.location.x - mean.x).abs() < MATCH_TOL.0
                && (fp.location.y - mean.y).abs() < MATCH_TOL.1 * cap
        })
        .min_by(|a, b| {
            config
                .params
                .scaled_distance(&a.location, &mean)
                .total_cmp(&config.params.scaled_distance(&b.location, &mean))
        })
        .map(|fp| fp.label.clone());
    AbmSummary {
        seed: config.seed,
        steps: config.steps,
        window_len: len,
        final_window_mean: mean,
        attractor,
    }
}

/// A run compared with the mean-field attractor reached from the same start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmCheck {
    pub summary: AbmSummary,
    pub reference: Option<FixedPoint>,
    /// `(|x_mean - x*|, |y_mean - y*| / R_m)`.
    pub error: Option<(f64, f64)>,
    pub matches_reference: bool,
}

/// The stable fixed point the deterministic model settles on from the run's
/// initial state, if it settles at all.
pub fn reference_attractor(
    config: &AgentRunConfig,
    integrator: &IntegratorConfig,
) -> Result<Option<FixedPoint>> {
    let p = &config.params;
    let start = SystemState::new(
        f64::from(config.initial_cooperators) / p.n(),
        config.initial_resource,
    );
    let report = equilibrium_report(config.kind, p)?;
    let stable: Vec<FixedPoint> = report.stable().cloned().collect();
    let traj = integrate(config.kind, p, start, integrator)?;
    Ok(match detect_outcome(p, &traj, &stable, BASIN_TOL) {
        Outcome::FixedPoint(label) => stable.into_iter().find(|fp| fp.label == label),
        Outcome::NonConvergent => None,
    })
}

/// Runs the agent model and checks its final-window mean against
/// [`reference_attractor`] within [`MATCH_TOL`].
pub fn check_against_reference(
    config: &AgentRunConfig,
    integrator: &IntegratorConfig,
) -> Result<(Trajectory, AbmCheck)> {
    let reference = reference_attractor(config, integrator)?;
    let traj = run_abm(config)?;
    let stable: Vec<FixedPoint> = equilibrium_report(config.kind, &config.params)?
        .stable()
        .cloned()
        .collect();
    let summary = summarize(config, &traj, &stable);
    let mean = summary.final_window_mean;
    let error = reference.as_ref().map(|fp| {
        (
            (mean.x - fp.location.x).abs(),
            (mean.y - fp.location.y).abs() / config.params.capacity,
        )
    });
    let matches_reference = error.is_some_and(|(ex, ey)| ex < MATCH_TOL.0 && ey < MATCH_TOL.1);
    Ok((
        traj,
        AbmCheck {
            summary,
            reference,
            error,
            matches_reference,
        },
    ))
}
