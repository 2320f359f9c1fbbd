//! Model constants, state, payoff kernels and the two coupled vector fields.
//!
//! The cooperator fraction `x` follows replicator dynamics driven by the
//! payoff gap between cooperators and defectors; the resource `y` grows
//! logistically and is harvested at the quota `b_m y / R_m` (cooperators) or
//! `(1 + alpha)` times that (defectors). A universal tax `delta` funds either
//! a reward shared by cooperators or a fine shared by defectors.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Scalar constants of the coupled model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Players per group, `N`.
    pub group_size: u32,
    /// Logistic growth rate `r`.
    pub growth_rate: f64,
    /// Per-player tax `delta`.
    pub tax: f64,
    /// Over-extraction rate `alpha` of defectors.
    pub defection_rate: f64,
    /// Quota per player at full capacity, `b_m`.
    pub max_quota: f64,
    /// Carrying capacity `R_m`.
    pub capacity: f64,
}

impl ModelParams {
    pub fn new(
        group_size: u32,
        growth_rate: f64,
        tax: f64,
        defection_rate: f64,
        max_quota: f64,
        capacity: f64,
    ) -> Result<Self> {
        let params = ModelParams {
            group_size,
            growth_rate,
            tax,
            defection_rate,
            max_quota,
            capacity,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.growth_rate,
            self.tax,
            self.defection_rate,
            self.max_quota,
            self.capacity,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(LabError::invalid("params", "all constants must be finite"));
        }
        if self.group_size < 2 {
            return Err(LabError::invalid("params", "group_size must be >= 2"));
        }
        if self.capacity <= 0.0 {
            return Err(LabError::invalid("params", "capacity must be > 0"));
        }
        if self.max_quota <= 0.0 {
            return Err(LabError::invalid("params", "max_quota must be > 0"));
        }
        if self.growth_rate < 0.0 {
            return Err(LabError::invalid("params", "growth_rate must be >= 0"));
        }
        if self.tax < 0.0 {
            return Err(LabError::invalid("params", "tax must be >= 0"));
        }
        if self.defection_rate < 0.0 {
            return Err(LabError::invalid("params", "defection_rate must be >= 0"));
        }
        Ok(())
    }

    pub(crate) fn n(&self) -> f64 {
        f64::from(self.group_size)
    }

    /// Aggregate extraction rate of a fully cooperating group, `b_m N / R_m`.
    pub fn e_c(&self) -> f64 {
        self.max_quota * self.n() / self.capacity
    }

    /// Aggregate extraction rate of a fully defecting group.
    pub fn e_d(&self) -> f64 {
        self.e_c() * (1.0 + self.defection_rate)
    }

    /// Scaled distance `sqrt(dx^2 + (dy / R_m)^2)` between two states.
    pub fn scaled_distance(&self, a: &SystemState, b: &SystemState) -> f64 {
        let dx = a.x - b.x;
        let dy = (a.y - b.y) / self.capacity;
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncentiveKind {
    /// Tax revenue is split among cooperators.
    Reward,
    /// Tax revenue is levied as a fine split among defectors.
    Punishment,
}

impl std::str::FromStr for IncentiveKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reward" => Ok(IncentiveKind::Reward),
            "punishment" => Ok(IncentiveKind::Punishment),
            other => Err(LabError::invalid(
                "kind",
                format!("expected `reward` or `punishment`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for IncentiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IncentiveKind::Reward => "reward",
            IncentiveKind::Punishment => "punishment",
        })
    }
}

/// Mean-field state: cooperator fraction `x` and resource level `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemState {
    pub x: f64,
    pub y: f64,
}

impl SystemState {
    pub const fn new(x: f64, y: f64) -> Self {
        SystemState { x, y }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(0.0..=1.0).contains(&self.x) {
            return Err(LabError::invalid(
                "state",
                format!("x = {} outside [0, 1]", self.x),
            ));
        }
        if !(0.0..=params.capacity).contains(&self.y) {
            return Err(LabError::invalid(
                "state",
                format!("y = {} outside [0, {}]", self.y, params.capacity),
            ));
        }
        Ok(())
    }
}

/// Time derivatives of the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub dx: f64,
    pub dy: f64,
}

impl Rates {
    /// `max(|dx|, |dy| / R_m)`, the norm used by convergence tests.
    pub fn scaled_norm(&self, params: &ModelParams) -> f64 {
        self.dx.abs().max(self.dy.abs() / params.capacity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthRegime {
    Slow,
    Moderate,
    Rapid,
    /// `r` sits on one of the thresholds.
    Boundary,
}

impl std::fmt::Display for GrowthRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GrowthRegime::Slow => "slow",
            GrowthRegime::Moderate => "moderate",
            GrowthRegime::Rapid => "rapid",
            GrowthRegime::Boundary => "boundary",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub regime: GrowthRegime,
    pub e_c: f64,
    pub e_d: f64,
}

/// Resource share of a rule-abiding player, `b_m y / R_m`.
pub fn per_capita_quota(params: &ModelParams, y: f64) -> Result<f64> {
    if !(0.0..=params.capacity).contains(&y) {
        return Err(LabError::Domain(format!(
            "resource {y} outside [0, {}]",
            params.capacity
        )));
    }
    Ok(params.max_quota * y / params.capacity)
}

/// Resource share of a defector, `(1 + alpha)` times the quota.
pub fn defector_take(params: &ModelParams, y: f64) -> Result<f64> {
    Ok(per_capita_quota(params, y)? * (1.0 + params.defection_rate))
}

/// `(1 - (1 - u)^n) / u`, extended by its limit `n` at `u = 0`.
///
/// This is the expected reward multiplier at cooperator fraction `u`, and the
/// expected fine multiplier at defector fraction `u`.
pub(crate) fn share_factor(n: u32, u: f64) -> f64 {
    if u == 0.0 {
        return f64::from(n);
    }
    let nf = f64::from(n);
    if (0.0..=1.0).contains(&u) && nf * u < 0.5 {
        // avoids cancellation in 1 - (1 - u)^n
        -(nf * (-u).ln_1p()).exp_m1() / u
    } else {
        (1.0 - (1.0 - u).powi(n as i32)) / u
    }
}

/// Derivative of [`share_factor`] with respect to `u`.
pub(crate) fn share_factor_slope(n: u32, u: f64) -> f64 {
    let nf = f64::from(n);
    if nf * u.abs() < 1e-4 {
        // series: G(u) = sum_k C(n,k+1) (-u)^k
        let c2 = nf * (nf - 1.0) / 2.0;
        let c3 = c2 * (nf - 2.0) / 3.0;
        let c4 = c3 * (nf - 3.0) / 4.0;
        return -c2 + 2.0 * c3 * u - 3.0 * c4 * u * u;
    }
    let tail = (1.0 - u).powi(n as i32 - 1);
    (nf * tail - share_factor(n, u)) / u
}

pub(crate) fn payoff_gap_raw(kind: IncentiveKind, params: &ModelParams, x: f64, y: f64) -> f64 {
    let share_arg = match kind {
        IncentiveKind::Reward => x,
        IncentiveKind::Punishment => 1.0 - x,
    };
    payoff_gap_at(params, share_arg, y)
}

/// Payoff gap given the share-factor argument directly (`x` for reward,
/// `1 - x` for punishment), for callers that hold it more precisely than `x`.
#[inline]
pub(crate) fn payoff_gap_at(params: &ModelParams, share_arg: f64, y: f64) -> f64 {
    let harvest_gap = params.max_quota * y / params.capacity * params.defection_rate;
    params.tax * share_factor(params.group_size, share_arg) - harvest_gap
}

/// Closed-form cooperator-minus-defector payoff `P_C - P_D`.
///
/// The removable singularities (reward at `x = 0`, punishment at `x = 1`)
/// evaluate to their limit `N delta - alpha b_m y / R_m`.
pub fn payoff_diff_closed(kind: IncentiveKind, params: &ModelParams, state: &SystemState) -> f64 {
    payoff_gap_raw(kind, params, state.x, state.y)
}

#[inline]
pub(crate) fn field_raw(kind: IncentiveKind, params: &ModelParams, x: f64, y: f64) -> (f64, f64) {
    let dx = x * (1.0 - x) * payoff_gap_raw(kind, params, x, y);
    let quota = params.max_quota * y / params.capacity;
    let dy = params.growth_rate * y * (1.0 - y / params.capacity)
        - params.n() * quota * (1.0 + (1.0 - x) * params.defection_rate);
    (dx, dy)
}

/// Right-hand side of the coupled replicator/resource system.
pub fn vector_field(kind: IncentiveKind, params: &ModelParams, state: &SystemState) -> Rates {
    let (dx, dy) = field_raw(kind, params, state.x, state.y);
    Rates { dx, dy }
}

pub fn classify_regime(params: &ModelParams) -> Regime {
    let e_c = params.e_c();
    let e_d = params.e_d();
    let r = params.growth_rate;
    let tol = 1e-12 * e_d.max(1.0);
    let regime = if (r - e_c).abs() <= tol || (r - e_d).abs() <= tol {
        GrowthRegime::Boundary
    } else if r < e_c {
        GrowthRegime::Slow
    } else if r < e_d {
        GrowthRegime::Moderate
    } else {
        GrowthRegime::Rapid
    };
    Regime { regime, e_c, e_d }
}

/// The two strict inequalities governing the reward model's interior point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteriorConditions {
    /// `delta - alpha b_m + alpha N b_m^2 / (r R_m)`; must be negative.
    pub at_full_cooperation: f64,
    /// `N delta - alpha b_m + alpha N b_m^2 / (r R_m) + alpha^2 N b_m^2 / (r R_m)`;
    /// must be positive.
    pub at_full_defection: f64,
    pub exists: bool,
    /// Set when either expression is exactly zero.
    pub tie: bool,
}

pub fn reward_interior_conditions(params: &ModelParams) -> Result<InteriorConditions> {
    let r = params.growth_rate;
    if r == 0.0 {
        return Err(LabError::Domain(
            "interior existence requires growth_rate > 0".into(),
        ));
    }
    let n = params.n();
    let a = params.defection_rate;
    let bm = params.max_quota;
    let crowding = a * n * bm * bm / (r * params.capacity);
    let first = params.tax - a * bm + crowding;
    let second = n * params.tax - a * bm + crowding + a * crowding;
    Ok(InteriorConditions {
        at_full_cooperation: first,
        at_full_defection: second,
        exists: first < 0.0 && second > 0.0,
        tie: first == 0.0 || second == 0.0,
    })
}

/// Whether the reward model has exactly one interior fixed point.
pub fn reward_interior_exists(params: &ModelParams) -> Result<bool> {
    Ok(reward_interior_conditions(params)?.exists)
}

/// Largest group size accepted by [`payoff_diff_sum`].
pub const ORACLE_MAX_GROUP: u32 = 64;

/// `P_C - P_D` evaluated directly from the binomial expectations over the
/// composition of the other `N - 1` group members.
///
/// Kept as an independent check on [`payoff_diff_closed`].
pub fn payoff_diff_sum(
    kind: IncentiveKind,
    params: &ModelParams,
    state: &SystemState,
) -> Result<f64> {
    let n = params.group_size;
    if n > ORACLE_MAX_GROUP {
        return Err(LabError::OracleSize {
            size: n,
            bound: ORACLE_MAX_GROUP,
        });
    }
    let weights = binomial_weights(n - 1, state.x);
    let nf = f64::from(n);
    let quota = params.max_quota * state.y / params.capacity;
    let delta = params.tax;
    let mut coop = 0.0;
    let mut defect = 0.0;
    for (k, w) in weights.iter().enumerate() {
        // k cooperators among the other N - 1 players
        let k = k as f64;
        match kind {
            IncentiveKind::Reward => {
                coop += w * (quota - delta + nf * delta / (k + 1.0));
                defect += w * (quota * (1.0 + params.defection_rate) - delta);
            }
            IncentiveKind::Punishment => {
                let defectors = nf - 1.0 - k + 1.0;
                coop += w * (quota - delta);
                defect +=
                    w * (quota * (1.0 + params.defection_rate) - delta - nf * delta / defectors);
            }
        }
    }
    Ok(coop - defect)
}

/// `C(m, k) p^k (1 - p)^(m - k)` for `k = 0..=m`, built by term ratios from
/// the end with the larger leading term.
fn binomial_weights(m: u32, p: f64) -> Vec<f64> {
    let len = m as usize + 1;
    let mut w = vec![0.0; len];
    if p <= 0.0 {
        w[0] = 1.0;
        return w;
    }
    if p >= 1.0 {
        w[len - 1] = 1.0;
        return w;
    }
    let q = 1.0 - p;
    if p <= 0.5 {
        w[0] = q.powi(m as i32);
        for k in 0..m as usize {
            w[k + 1] = w[k] * (m as usize - k) as f64 / (k + 1) as f64 * (p / q);
        }
    } else {
        w[len - 1] = p.powi(m as i32);
        for k in (1..len).rev() {
            // w[k-1] = w[k] * k / (m - k + 1) * q / p
            w[k - 1] = w[k] * k as f64 / (m as usize - k + 1) as f64 * (q / p);
        }
    }
    w
}
