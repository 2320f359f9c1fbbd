//! Fixed-step RK4 integration of the coupled system.

use serde::{Deserialize, Serialize};

use crate::equilibria::{self, FixedPoint, Stability};
use crate::error::{LabError, Result};
use crate::model::{field_raw, IncentiveKind, ModelParams, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub step_size: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// Threshold on `max(|dx/dt|, |dy/dt| / R_m)`.
    pub convergence_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step_size: 0.01,
            t_end: 1e4,
            record_every: 100,
            convergence_tol: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(LabError::invalid("integrator", "step_size must be > 0"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(LabError::invalid("integrator", "t_end must be > 0"));
        }
        if self.record_every < 1 {
            return Err(LabError::invalid("integrator", "record_every must be >= 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(LabError::invalid("integrator", "convergence_tol must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalFlag {
    ReachedTEnd,
    Converged,
    /// Reached `t_end` after at least one state had to be clamped into the box.
    Clamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub terminal_flag: TerminalFlag,
    pub clamp_events: u64,
}

impl Trajectory {
    pub fn terminal(&self) -> SystemState {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// One classical RK4 stepper bound to a model.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rk4<'a> {
    pub kind: IncentiveKind,
    pub params: &'a ModelParams,
}

impl Rk4<'_> {
    #[inline]
    pub fn field(&self, x: f64, y: f64) -> (f64, f64) {
        field_raw(self.kind, self.params, x, y)
    }

    /// Advances one step of length `h`, given `k1` = field at the current state.
    #[inline]
    pub fn step(&self, x: f64, y: f64, k1: (f64, f64), h: f64) -> (f64, f64) {
        let half = 0.5 * h;
        let k2 = self.field(x + half * k1.0, y + half * k1.1);
        let k3 = self.field(x + half * k2.0, y + half * k2.1);
        let k4 = self.field(x + h * k3.0, y + h * k3.1);
        let sixth = h / 6.0;
        (
            x + sixth * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            y + sixth * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
    }

    /// Clamps into `[0,1] x [0,R_m]`, reporting whether anything moved.
    #[inline]
    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64, bool) {
        let cx = x.clamp(0.0, 1.0);
        let cy = y.clamp(0.0, self.params.capacity);
        (cx, cy, cx != x || cy != y)
    }

    /// Convergence test at a state whose field is `k`.
    ///
    /// An exactly stationary state always counts. Otherwise the scaled field
    /// norm must be below `tol` and the local linearization must be
    /// contracting, so slow passages near saddles are not mistaken for
    /// convergence.
    pub fn converged(&self, x: f64, y: f64, k: (f64, f64), tol: f64) -> bool {
        let norm = k.0.abs().max(k.1.abs() / self.params.capacity);
        if norm == 0.0 {
            return true;
        }
        if norm >= tol {
            return false;
        }
        let j = equilibria::jacobian(self.kind, self.params, &SystemState::new(x, y));
        j.trace() < 0.0 && j.determinant() > 0.0
    }
}

fn step_count(config: &IntegratorConfig) -> u64 {
    let n = config.t_end / config.step_size;
    let rounded = n.round();
    if (n - rounded).abs() < 1e-9 * n.max(1.0) {
        rounded as u64
    } else {
        n.ceil() as u64
    }
}

fn non_finite(time: f64, last_valid: SystemState) -> LabError {
    LabError::NumericalFailure {
        time,
        reason: "state became non-finite".into(),
        last_valid,
    }
}

/// Integrates from `initial` with classical fixed-step RK4, clamping into
/// the state box after every step.
pub fn integrate(
    kind: IncentiveKind,
    params: &ModelParams,
    initial: SystemState,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    params.validate()?;
    initial.validate(params)?;
    config.validate()?;

    let rk = Rk4 { kind, params };
    let n = step_count(config);
    let h = config.step_size;
    let (mut x, mut y) = (initial.x, initial.y);
    let mut times = vec![0.0];
    let mut states = vec![initial];
    let mut clamp_events = 0;
    let mut converged = false;
    let mut t = 0.0;

    for i in 0..n {
        let k1 = rk.field(x, y);
        if rk.converged(x, y, k1, config.convergence_tol) {
            converged = true;
            break;
        }
        let t_next = if i + 1 == n {
            config.t_end
        } else {
            (i + 1) as f64 * h
        };
        let (nx, ny) = rk.step(x, y, k1, t_next - t);
        if !(nx.is_finite() && ny.is_finite()) {
            return Err(non_finite(t, SystemState::new(x, y)));
        }
        let (cx, cy, clamped) = rk.clamp(nx, ny);
        clamp_events += u64::from(clamped);
        x = cx;
        y = cy;
        t = t_next;
        if (i + 1) % config.record_every as u64 == 0 || i + 1 == n {
            times.push(t);
            states.push(SystemState::new(x, y));
        }
    }
    if converged && *times.last().unwrap() != t {
        times.push(t);
        states.push(SystemState::new(x, y));
    }

    let terminal_flag = if converged {
        TerminalFlag::Converged
    } else if clamp_events > 0 {
        TerminalFlag::Clamped
    } else {
        TerminalFlag::ReachedTEnd
    };
    Ok(Trajectory {
        times,
        states,
        terminal_flag,
        clamp_events,
    })
}

/// Result of matching a terminal state against known equilibria.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    FixedPoint(String),
    NonConvergent,
}

impl Outcome {
    pub fn label(&self) -> &str {
        match self {
            Outcome::FixedPoint(label) => label,
            Outcome::NonConvergent => "non_convergent",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

pub(crate) fn match_terminal(
    params: &ModelParams,
    terminal: &SystemState,
    converged: bool,
    equilibria: &[FixedPoint],
    tol: f64,
) -> Outcome {
    equilibria
        .iter()
        // only attractors can end a generic trajectory; an unstable point
        // counts only when the run actually stopped on it
        .filter(|fp| converged || fp.stability == Stability::Stable)
        .map(|fp| (params.scaled_distance(&fp.location, terminal), fp))
        .filter(|(d, _)| *d <= tol)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, fp)| Outcome::FixedPoint(fp.label.clone()))
        .unwrap_or(Outcome::NonConvergent)
}

/// Labels the fixed point the trajectory ended at, if any lies within `tol`
/// (scaled distance) of the terminal state.
pub fn detect_outcome(
    params: &ModelParams,
    traj: &Trajectory,
    equilibria: &[FixedPoint],
    tol: f64,
) -> Outcome {
    match_terminal(
        params,
        &traj.terminal(),
        traj.terminal_flag == TerminalFlag::Converged,
        equilibria,
        tol,
    )
}
