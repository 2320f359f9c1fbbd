//! Limit-cycle detection by Poincaré-section returns, and basin-of-attraction
//! maps for multistable parameter sets.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{match_terminal, IntegratorConfig, Outcome, Rk4};
use crate::equilibria::{equilibrium_report, FixedPoint, Stability};
use crate::error::{LabError, Result};
use crate::model::{payoff_gap_at, IncentiveKind, ModelParams, SystemState};
use crate::parallel;

/// Cap on stored observation samples; longer windows are decimated.
const MAX_SAMPLES: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleConfig {
    pub transient: f64,
    pub observe: f64,
    /// Fixed RK4 step; `None` picks one from the parameter rate scales.
    pub step_size: Option<f64>,
    /// Successive return times that must agree.
    pub returns_required: usize,
    /// Allowed relative deviation of each return time from their mean.
    pub period_tolerance: f64,
    /// Scaled distance below which the orbit counts as sitting on a fixed point.
    pub clearance: f64,
    pub convergence_tol: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            transient: 2e6,
            observe: 3.5e6,
            step_size: None,
            returns_required: 5,
            period_tolerance: 0.01,
            clearance: 1e-3,
            convergence_tol: 1e-9,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.transient >= 0.0 && self.transient.is_finite()) {
            return Err(LabError::invalid("cycle", "transient must be >= 0"));
        }
        if !(self.observe > 0.0 && self.observe.is_finite()) {
            return Err(LabError::invalid("cycle", "observe must be > 0"));
        }
        if let Some(h) = self.step_size {
            if !(h > 0.0 && h.is_finite()) {
                return Err(LabError::invalid("cycle", "step_size must be > 0"));
            }
        }
        if self.returns_required < 2 {
            return Err(LabError::invalid("cycle", "returns_required must be >= 2"));
        }
        if !(self.period_tolerance > 0.0) || !(self.clearance > 0.0) {
            return Err(LabError::invalid(
                "cycle",
                "period_tolerance and clearance must be > 0",
            ));
        }
        Ok(())
    }

    /// The step actually used for `params`.
    pub fn resolved_step(&self, params: &ModelParams) -> f64 {
        self.step_size.unwrap_or_else(|| auto_step(params))
    }
}

/// Step from the largest rate scale of the log-coordinate field.
fn auto_step(params: &ModelParams) -> f64 {
    let scale = params.n() * params.tax
        + params.defection_rate * params.max_quota
        + params.growth_rate
        + params.e_d();
    (0.1 / scale).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub found: bool,
    /// Mean of the last `returns_required` return times.
    pub period_estimate: f64,
    /// Coefficient of variation of those return times.
    pub period_cv: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// `(min x, min 1-x, min y)` over one cycle. Kept separately because an
    /// orbit hugging `x = 1` has an upper x bound that rounds to 1.0.
    pub boundary_margin: (f64, f64, f64),
    pub section_x: f64,
    pub section_crossings: usize,
    pub return_times: Vec<f64>,
    /// Closest scaled approach to any fixed point during observation.
    pub min_fixed_point_distance: f64,
    pub converged_to: Option<SystemState>,
    pub step_size: f64,
    pub diagnostic: String,
}

impl CycleReport {
    fn empty(step_size: f64, diagnostic: impl Into<String>) -> Self {
        CycleReport {
            found: false,
            period_estimate: 0.0,
            period_cv: 0.0,
            x_range: (0.0, 0.0),
            y_range: (0.0, 0.0),
            boundary_margin: (0.0, 0.0, 0.0),
            section_x: 0.0,
            section_crossings: 0,
            return_times: Vec::new(),
            min_fixed_point_distance: f64::INFINITY,
            converged_to: None,
            step_size,
            diagnostic: diagnostic.into(),
        }
    }
}

struct Sample {
    t: f64,
    x: f64,
    not_x: f64,
    y: f64,
}

enum Step {
    Moved(f64, f64),
    Converged,
}

/// Integration coordinates. Interior orbits run in `(logit x, ln y)`, where
/// close approaches to the boundary neither underflow nor get absorbed;
/// boundary starts stay on their invariant line in plain coordinates.
enum Chart<'a> {
    Plain(Rk4<'a>),
    Log(Rk4<'a>),
}

impl Chart<'_> {
    fn enter(&self, s: SystemState) -> (f64, f64) {
        match self {
            Chart::Plain(_) => (s.x, s.y),
            Chart::Log(_) => ((s.x / (1.0 - s.x)).ln(), s.y.ln()),
        }
    }

    #[inline]
    fn state(&self, a: f64, b: f64) -> (f64, f64) {
        match self {
            Chart::Plain(_) => (a, b),
            Chart::Log(_) => (logistic(a), b.exp()),
        }
    }

    #[inline]
    fn sample(&self, t: f64, a: f64, b: f64) -> Sample {
        let (x, y) = self.state(a, b);
        let not_x = match self {
            Chart::Plain(_) => 1.0 - a,
            Chart::Log(_) => logistic(-a),
        };
        Sample { t, x, not_x, y }
    }

    #[inline]
    fn log_field(rk: &Rk4<'_>, u: f64, v: f64) -> (f64, f64) {
        let p = rk.params;
        let x = logistic(u);
        let not_x = logistic(-u);
        let y = v.exp();
        let share_arg = match rk.kind {
            IncentiveKind::Reward => x,
            IncentiveKind::Punishment => not_x,
        };
        let du = payoff_gap_at(p, share_arg, y);
        let dv = p.growth_rate * (1.0 - y / p.capacity)
            - p.e_c() * (1.0 + not_x * p.defection_rate);
        (du, dv)
    }

    fn advance(&self, a: f64, b: f64, h: f64, t: f64, tol: f64) -> Result<Step> {
        let (na, nb) = match self {
            Chart::Plain(rk) => {
                let k1 = rk.field(a, b);
                if rk.converged(a, b, k1, tol) {
                    return Ok(Step::Converged);
                }
                let (nx, ny) = rk.step(a, b, k1, h);
                if nx.is_finite() && ny.is_finite() {
                    let (cx, cy, _) = rk.clamp(nx, ny);
                    (cx, cy)
                } else {
                    (nx, ny)
                }
            }
            Chart::Log(rk) => {
                let k1 = Self::log_field(rk, a, b);
                let (x, y) = self.state(a, b);
                let plain = (x * logistic(-a) * k1.0, y * k1.1);
                if rk.converged(x, y, plain, tol) {
                    return Ok(Step::Converged);
                }
                let half = 0.5 * h;
                let k2 = Self::log_field(rk, a + half * k1.0, b + half * k1.1);
                let k3 = Self::log_field(rk, a + half * k2.0, b + half * k2.1);
                let k4 = Self::log_field(rk, a + h * k3.0, b + h * k3.1);
                let sixth = h / 6.0;
                (
                    a + sixth * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                    b + sixth * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                )
            }
        };
        if !(na.is_finite() && nb.is_finite()) {
            let (x, y) = self.state(a, b);
            return Err(LabError::NumericalFailure {
                time: t,
                reason: "state became non-finite".into(),
                last_valid: SystemState::new(x, y),
            });
        }
        Ok(Step::Moved(na, nb))
    }
}

#[inline]
fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Integrates through a transient, then looks for periodic returns to the
/// section `{x = mean observed x, dx/dt > 0}`.
///
/// A cycle is reported when the last `returns_required` return times agree
/// within `period_tolerance` and the orbit over the final return interval is
/// not confined to a `clearance`-ball around any fixed point.
pub fn detect_limit_cycle(
    kind: IncentiveKind,
    params: &ModelParams,
    initial: SystemState,
    config: &CycleConfig,
) -> Result<CycleReport> {
    params.validate()?;
    initial.validate(params)?;
    config.validate()?;

    let fixed: Vec<SystemState> = equilibrium_report(kind, params)?
        .points
        .iter()
        .map(|p| p.location)
        .collect();
    let rk = Rk4 { kind, params };
    let interior = initial.x > 0.0 && initial.x < 1.0 && initial.y > 0.0;
    let chart = if interior {
        Chart::Log(rk)
    } else {
        Chart::Plain(rk)
    };
    let h = config.resolved_step(params);
    let tol = config.convergence_tol;
    let transient_steps = (config.transient / h).round() as u64;
    let observe_steps = ((config.observe / h).round() as u64).max(1);
    let stride = observe_steps.div_ceil(MAX_SAMPLES).max(1);

    let converged_report = |a: f64, b: f64, t: f64| {
        let (x, y) = chart.state(a, b);
        let mut report =
            CycleReport::empty(h, format!("trajectory converged to ({x}, {y}) at t = {t}"));
        report.converged_to = Some(SystemState::new(x, y));
        report
    };

    let (mut a, mut b) = chart.enter(initial);
    for i in 0..transient_steps {
        let t = i as f64 * h;
        match chart.advance(a, b, h, t, tol)? {
            Step::Moved(na, nb) => (a, b) = (na, nb),
            Step::Converged => return Ok(converged_report(a, b, t)),
        }
    }

    let t0 = transient_steps as f64 * h;
    let mut samples = Vec::with_capacity((observe_steps / stride + 2) as usize);
    samples.push(chart.sample(t0, a, b));
    let mut sum_x = 0.0;
    let mut min_dist_sq = f64::INFINITY;
    for i in 0..observe_steps {
        let t = t0 + i as f64 * h;
        match chart.advance(a, b, h, t, tol)? {
            Step::Moved(na, nb) => (a, b) = (na, nb),
            Step::Converged => return Ok(converged_report(a, b, t)),
        }
        let (x, y) = chart.state(a, b);
        sum_x += x;
        for fp in &fixed {
            let dx = x - fp.x;
            let dy = (y - fp.y) / params.capacity;
            min_dist_sq = min_dist_sq.min(dx * dx + dy * dy);
        }
        if (i + 1) % stride == 0 || i + 1 == observe_steps {
            samples.push(chart.sample(t + h, a, b));
        }
    }
    let section_x = sum_x / observe_steps as f64;

    let mut crossings = Vec::new();
    let mut crossing_index = Vec::new();
    for (i, w) in samples.windows(2).enumerate() {
        if w[0].x < section_x && w[1].x >= section_x {
            let frac = (section_x - w[0].x) / (w[1].x - w[0].x);
            crossings.push(w[0].t + frac * (w[1].t - w[0].t));
            crossing_index.push(i + 1);
        }
    }
    let return_times: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();

    let mut report = CycleReport {
        section_x,
        section_crossings: crossings.len(),
        return_times: return_times.clone(),
        min_fixed_point_distance: min_dist_sq.sqrt(),
        ..CycleReport::empty(h, "")
    };
    let needed = config.returns_required;
    if return_times.len() < needed {
        report.diagnostic = format!(
            "only {} return(s) observed, {needed} required",
            return_times.len()
        );
        return Ok(report);
    }

    let last = &return_times[return_times.len() - needed..];
    let mean = last.iter().sum::<f64>() / needed as f64;
    let var = last.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / needed as f64;
    let max_dev = last
        .iter()
        .map(|t| (t - mean).abs() / mean)
        .fold(0.0, f64::max);
    report.period_estimate = mean;
    report.period_cv = var.sqrt() / mean;

    // ranges and confinement over the final return interval
    let from = crossing_index[crossing_index.len() - 2];
    let to = crossing_index[crossing_index.len() - 1];
    let window = &samples[from..=to];
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut not_x_lo = f64::INFINITY;
    for s in window {
        not_x_lo = not_x_lo.min(s.not_x);
        x_lo = x_lo.min(s.x);
        x_hi = x_hi.max(s.x);
        y_lo = y_lo.min(s.y);
        y_hi = y_hi.max(s.y);
    }
    report.x_range = (x_lo, x_hi);
    report.y_range = (y_lo, y_hi);
    report.boundary_margin = (x_lo, not_x_lo, y_lo);
    let confined = fixed.iter().any(|fp| {
        window
            .iter()
            .all(|s| params.scaled_distance(fp, &SystemState::new(s.x, s.y)) < config.clearance)
    });

    if max_dev > config.period_tolerance {
        report.diagnostic = format!(
            "return times disagree: max relative deviation {max_dev:.3e}"
        );
    } else if confined {
        report.diagnostic = "orbit confined near a fixed point".into();
    } else if !(x_hi > x_lo && y_hi > y_lo) {
        report.diagnostic = "degenerate cycle amplitude".into();
    } else {
        report.found = true;
        report.diagnostic = format!("period {mean:.6e} over {needed} returns");
    }
    Ok(report)
}

#[inline]
fn advance(rk: &Rk4<'_>, x: f64, y: f64, k1: (f64, f64), h: f64, t: f64) -> Result<(f64, f64)> {
    let (nx, ny) = rk.step(x, y, k1, h);
    if !(nx.is_finite() && ny.is_finite()) {
        return Err(LabError::NumericalFailure {
            time: t,
            reason: "state became non-finite".into(),
            last_valid: SystemState::new(x, y),
        });
    }
    let (cx, cy, _) = rk.clamp(nx, ny);
    Ok((cx, cy))
}

/// Label for cells whose trajectory did not settle by `t_end`.
pub const UNRESOLVED: &str = "unresolved";

/// Scaled distance used to assign a basin cell to an attractor.
pub const BASIN_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinCell {
    pub x0: f64,
    pub y0: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub x_resolution: usize,
    pub y_resolution: usize,
    /// Row-major over `x0` then `y0`.
    pub cells: Vec<BasinCell>,
    pub attractor_legend: BTreeMap<String, FixedPoint>,
}

impl BasinGrid {
    pub fn count(&self, label: &str) -> usize {
        self.cells.iter().filter(|c| c.label == label).count()
    }
}

/// Where the trajectory from `initial` ends up, integrating without recording.
pub(crate) fn settle(
    kind: IncentiveKind,
    params: &ModelParams,
    initial: SystemState,
    config: &IntegratorConfig,
) -> Result<(SystemState, bool)> {
    let rk = Rk4 { kind, params };
    let h = config.step_size;
    let n = (config.t_end / h).ceil() as u64;
    let (mut x, mut y) = (initial.x, initial.y);
    for i in 0..n {
        let k1 = rk.field(x, y);
        if rk.converged(x, y, k1, config.convergence_tol) {
            return Ok((SystemState::new(x, y), true));
        }
        (x, y) = advance(&rk, x, y, k1, h, i as f64 * h)?;
    }
    Ok((SystemState::new(x, y), false))
}

/// Labels every cell centre of a uniform grid over `(0,1) x (0,R_m)` by the
/// stable fixed point its trajectory converges to.
pub fn basin_map(
    kind: IncentiveKind,
    params: &ModelParams,
    resolution: (usize, usize),
    config: &IntegratorConfig,
) -> Result<BasinGrid> {
    config.validate()?;
    let (nx, ny) = resolution;
    if nx < 2 || ny < 2 {
        return Err(LabError::invalid("basin", "resolution must be >= 2 per axis"));
    }
    let report = equilibrium_report(kind, params)?;
    let stable: Vec<FixedPoint> = report.stable().cloned().collect();
    if stable.is_empty() {
        return Err(LabError::Precondition(
            "no stable fixed point to map basins for; use limit-cycle detection instead".into(),
        ));
    }

    let centres: Vec<SystemState> = (0..nx)
        .flat_map(|i| {
            (0..ny).map(move |j| {
                SystemState::new(
                    (i as f64 + 0.5) / nx as f64,
                    (j as f64 + 0.5) / ny as f64 * params.capacity,
                )
            })
        })
        .collect();

    let labels: Vec<Result<String>> = parallel::run(|| {
        centres
            .par_iter()
            .map(|&start| {
                let (end, converged) = settle(kind, params, start, config)?;
                let outcome = if converged {
                    match_terminal(params, &end, true, &stable, BASIN_TOL)
                } else {
                    Outcome::NonConvergent
                };
                Ok(match outcome {
                    Outcome::FixedPoint(label) => label,
                    Outcome::NonConvergent => UNRESOLVED.to_string(),
                })
            })
            .collect()
    });

    let mut cells = Vec::with_capacity(centres.len());
    for (start, label) in centres.iter().zip(labels) {
        cells.push(BasinCell {
            x0: start.x,
            y0: start.y,
            label: label?,
        });
    }
    let attractor_legend = stable
        .into_iter()
        .filter(|fp| fp.stability == Stability::Stable)
        .map(|fp| (fp.label.clone(), fp))
        .collect();
    Ok(BasinGrid {
        x_resolution: nx,
        y_resolution: ny,
        cells,
        attractor_legend,
    })
}
