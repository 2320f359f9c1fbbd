//! Fixed points of the coupled system and their linear stability.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::{
    classify_regime, payoff_gap_raw, reward_interior_conditions, share_factor_slope,
    IncentiveKind, ModelParams, Regime, SystemState,
};

/// Eigenvalue real parts within this band count as zero.
pub const EIGEN_TOL: f64 = 1e-9;

/// Bound on the scaled field residual at a fixed point.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Uniform scan intervals on `[0, 1]` used to bracket interior roots.
pub const INTERIOR_SCAN_INTERVALS: usize = 10_000;

const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    /// `(0, 0)` or `(1, 0)`.
    Corner,
    /// `x = 1` with a sustained resource.
    CoopBoundary,
    /// `x = 0` with a sustained resource.
    DefectBoundary,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

/// Row-major 2x2 matrix of partial derivatives of `(dx/dt, dy/dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian(pub [[f64; 2]; 2]);

impl Jacobian {
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn determinant(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Both eigenvalues from trace and determinant.
    pub fn eigenvalues(&self) -> [Eigenvalue; 2] {
        let tr = self.trace();
        let det = self.determinant();
        let half = 0.5 * tr;
        let disc = half * half - det;
        if disc >= 0.0 {
            let root = disc.sqrt();
            // larger-magnitude root first, the other from the product
            let big = if half >= 0.0 { half + root } else { half - root };
            let small = if big != 0.0 { det / big } else { 0.0 };
            let (a, b) = if big >= small { (big, small) } else { (small, big) };
            [Eigenvalue { re: a, im: 0.0 }, Eigenvalue { re: b, im: 0.0 }]
        } else {
            let im = (-disc).sqrt();
            [Eigenvalue { re: half, im }, Eigenvalue { re: half, im: -im }]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub label: String,
    pub location: SystemState,
    pub kind: FixedPointKind,
    pub eigenvalues: [Eigenvalue; 2],
    pub stability: Stability,
    pub residual: f64,
}

pub fn stability_of(eigenvalues: &[Eigenvalue; 2]) -> Stability {
    let [a, b] = eigenvalues.map(|e| e.re);
    if a < -EIGEN_TOL && b < -EIGEN_TOL {
        Stability::Stable
    } else if a > EIGEN_TOL && b > EIGEN_TOL {
        Stability::Unstable
    } else if (a < -EIGEN_TOL && b > EIGEN_TOL) || (a > EIGEN_TOL && b < -EIGEN_TOL) {
        Stability::Saddle
    } else {
        Stability::Marginal
    }
}

/// Boundary equilibria: both corners always, `(1, R_m - N b_m / r)` when
/// `r > E_C` and `(0, R_m - N b_m (1 + alpha) / r)` when `r > E_D`.
///
/// The boundary set does not depend on the incentive scheme.
pub fn boundary_fixed_points(params: &ModelParams) -> Vec<(FixedPointKind, SystemState)> {
    let mut out = vec![
        (FixedPointKind::Corner, SystemState::new(0.0, 0.0)),
        (FixedPointKind::Corner, SystemState::new(1.0, 0.0)),
    ];
    let r = params.growth_rate;
    if r > 0.0 {
        let harvest = params.n() * params.max_quota / r;
        let coop_y = params.capacity - harvest;
        if coop_y > 0.0 {
            out.push((FixedPointKind::CoopBoundary, SystemState::new(1.0, coop_y)));
        }
        let defect_y = params.capacity - harvest * (1.0 + params.defection_rate);
        if defect_y > 0.0 {
            out.push((FixedPointKind::DefectBoundary, SystemState::new(0.0, defect_y)));
        }
    }
    out
}

/// Resource level on the non-trivial y-nullcline at cooperator fraction `x`.
fn nullcline_resource(params: &ModelParams, x: f64) -> f64 {
    params.capacity
        - params.n() * params.max_quota / params.growth_rate
            * (1.0 + (1.0 - x) * params.defection_rate)
}

/// Interior equilibria, in increasing `x`.
///
/// Scans the payoff gap along the y-nullcline on a uniform grid, brackets
/// sign changes and bisects each to `|dx| < 1e-12`. Roots whose resource
/// level falls outside `(0, R_m)` are dropped.
pub fn interior_fixed_points(kind: IncentiveKind, params: &ModelParams) -> Vec<SystemState> {
    if params.growth_rate <= 0.0 {
        return Vec::new();
    }
    let gap = |x: f64| payoff_gap_raw(kind, params, x, nullcline_resource(params, x));
    let n = INTERIOR_SCAN_INTERVALS;
    let nodes: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let x = i as f64 / n as f64;
            (x, gap(x))
        })
        .collect();

    let mut roots = Vec::new();
    for i in 0..n {
        let (a, ga) = nodes[i];
        let (b, gb) = nodes[i + 1];
        if ga == 0.0 {
            if i > 0 {
                roots.push(a);
            }
            continue;
        }
        if ga * gb < 0.0 {
            roots.push(bisect(&gap, a, b, ga));
        }
    }

    roots
        .into_iter()
        .filter(|&x| x > 0.0 && x < 1.0)
        .map(|x| SystemState::new(x, nullcline_resource(params, x)))
        .filter(|s| s.y > 0.0 && s.y < params.capacity)
        .collect()
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    while hi - lo >= BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Analytic Jacobian of the vector field; the smooth extension is used at
/// the removable singularities.
pub fn jacobian(kind: IncentiveKind, params: &ModelParams, state: &SystemState) -> Jacobian {
    let SystemState { x, y } = *state;
    let n = params.n();
    let a = params.defection_rate;
    let bm = params.max_quota;
    let cap = params.capacity;

    let gap = payoff_gap_raw(kind, params, x, y);
    let gap_slope = params.tax
        * match kind {
            IncentiveKind::Reward => share_factor_slope(params.group_size, x),
            IncentiveKind::Punishment => -share_factor_slope(params.group_size, 1.0 - x),
        };
    let logistic = x * (1.0 - x);

    let fx_x = (1.0 - 2.0 * x) * gap + logistic * gap_slope;
    let fx_y = -logistic * a * bm / cap;
    let fy_x = n * bm * y * a / cap;
    let fy_y =
        params.growth_rate * (1.0 - 2.0 * y / cap) - n * bm / cap * (1.0 + (1.0 - x) * a);
    Jacobian([[fx_x, fx_y], [fy_x, fy_y]])
}

fn scaled_residual(kind: IncentiveKind, params: &ModelParams, s: &SystemState) -> f64 {
    let f = crate::model::vector_field(kind, params, s);
    f.dx.abs().max(f.dy.abs() / params.capacity.max(1.0))
}

fn kind_of(location: &SystemState) -> FixedPointKind {
    let on_edge = location.x == 0.0 || location.x == 1.0;
    match (on_edge, location.y == 0.0) {
        (true, true) => FixedPointKind::Corner,
        (true, false) if location.x == 1.0 => FixedPointKind::CoopBoundary,
        (true, false) => FixedPointKind::DefectBoundary,
        (false, _) => FixedPointKind::Interior,
    }
}

fn default_label(kind: FixedPointKind, location: &SystemState) -> String {
    match kind {
        FixedPointKind::Corner if location.x == 0.0 => "corner_0_0".into(),
        FixedPointKind::Corner => "corner_1_0".into(),
        FixedPointKind::CoopBoundary => "full_cooperation".into(),
        FixedPointKind::DefectBoundary => "full_defection".into(),
        FixedPointKind::Interior => "interior".into(),
    }
}

/// Eigen-decomposition and stability class of an equilibrium.
pub fn classify(
    kind: IncentiveKind,
    params: &ModelParams,
    location: SystemState,
) -> Result<FixedPoint> {
    let residual = scaled_residual(kind, params, &location);
    if !(residual < RESIDUAL_TOL) {
        return Err(LabError::Residual {
            state: location,
            residual,
        });
    }
    let eigenvalues = jacobian(kind, params, &location).eigenvalues();
    let fp_kind = kind_of(&location);
    Ok(FixedPoint {
        label: default_label(fp_kind, &location),
        location,
        kind: fp_kind,
        eigenvalues,
        stability: stability_of(&eigenvalues),
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub kind: IncentiveKind,
    pub params: ModelParams,
    pub regime: Regime,
    pub points: Vec<FixedPoint>,
    /// Anomalies worth a human look (unexpected root counts, predicate ties).
    pub warnings: Vec<String>,
}

impl EquilibriumReport {
    pub fn stable(&self) -> impl Iterator<Item = &FixedPoint> {
        self.points
            .iter()
            .filter(|p| p.stability == Stability::Stable)
    }

    pub fn find(&self, label: &str) -> Option<&FixedPoint> {
        self.points.iter().find(|p| p.label == label)
    }
}

/// All boundary and interior equilibria, classified and sorted by `(x, y)`.
pub fn equilibrium_report(kind: IncentiveKind, params: &ModelParams) -> Result<EquilibriumReport> {
    params.validate()?;
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for (_, location) in boundary_fixed_points(params) {
        points.push(classify(kind, params, location)?);
    }

    let interior = interior_fixed_points(kind, params);
    let bound = match kind {
        IncentiveKind::Reward => 1,
        IncentiveKind::Punishment => 2,
    };
    if interior.len() > bound {
        warnings.push(format!(
            "{} interior fixed points found, expected at most {bound}",
            interior.len()
        ));
    }
    if kind == IncentiveKind::Reward && params.growth_rate > 0.0 {
        let cond = reward_interior_conditions(params)?;
        if cond.tie {
            warnings.push("interior existence condition is tied at zero".into());
        }
        if cond.exists == interior.is_empty() {
            warnings.push(format!(
                "existence predicate says {} but the root finder found {} interior point(s)",
                cond.exists,
                interior.len()
            ));
        }
    }
    let numbered = interior.len() > 1;
    for (i, location) in interior.into_iter().enumerate() {
        let mut fp = classify(kind, params, location)?;
        if numbered {
            fp.label = format!("interior_{}", i + 1);
        }
        points.push(fp);
    }

    points.sort_by(|a, b| {
        a.location
            .x
            .total_cmp(&b.location.x)
            .then(a.location.y.total_cmp(&b.location.y))
    });
    Ok(EquilibriumReport {
        kind,
        params: *params,
        regime: classify_regime(params),
        points,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(r: f64, delta: f64) -> ModelParams {
        ModelParams::new(1000, r, delta, 0.5, 0.5, 1000.0).unwrap()
    }

    fn locations(points: &[(FixedPointKind, SystemState)]) -> Vec<(f64, f64)> {
        points.iter().map(|(_, s)| (s.x, s.y)).collect()
    }

    #[test]
    fn boundary_sets_by_regime() {
        let slow = boundary_fixed_points(&params(0.25, 0.2));
        assert_eq!(locations(&slow), vec![(0.0, 0.0), (1.0, 0.0)]);

        let moderate = boundary_fixed_points(&params(0.6, 0.2));
        assert_eq!(moderate.len(), 3);
        assert!((moderate[2].1.y - 166.666_666_666_666_7).abs() < 1e-9);

        let rapid = boundary_fixed_points(&params(1.0, 0.2));
        assert_eq!(
            locations(&rapid),
            vec![(0.0, 0.0), (1.0, 0.0), (1.0, 500.0), (0.0, 250.0)]
        );
    }

    #[test]
    fn interior_examples() {
        let roots = interior_fixed_points(IncentiveKind::Reward, &params(0.6, 0.02));
        assert_eq!(roots.len(), 1);
        assert!((roots[0].x - 0.831).abs() < 1e-3 && (roots[0].y - 96.3).abs() < 0.1);

        assert!(interior_fixed_points(IncentiveKind::Reward, &params(0.6, 0.2)).is_empty());

        let roots = interior_fixed_points(IncentiveKind::Punishment, &params(0.6, 0.004));
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!((roots[0].x - 0.76).abs() < 1e-6);
        assert!((roots[1].x - 0.84).abs() < 1e-6);
    }

    #[test]
    fn jacobian_examples() {
        let p = params(0.6, 0.2);
        let j = jacobian(IncentiveKind::Reward, &p, &SystemState::new(1.0, 0.0));
        assert!((j.0[1][1] - (p.growth_rate - p.e_c())).abs() < 1e-15);

        let inert = ModelParams {
            tax: 0.0,
            defection_rate: 0.0,
            ..p
        };
        for kind in [IncentiveKind::Reward, IncentiveKind::Punishment] {
            let j = jacobian(kind, &inert, &SystemState::new(0.37, 420.0));
            assert_eq!(j.0[0], [0.0, 0.0]);
        }

        let j = jacobian(
            IncentiveKind::Reward,
            &p,
            &SystemState::new(1.0, 1000.0 - 500.0 / 0.6),
        );
        assert!(j.eigenvalues().iter().all(|e| e.re < 0.0));
    }

    #[test]
    fn eigenvalues_of_known_matrices() {
        let ev = Jacobian([[0.0, 1.0], [-1.0, 0.0]]).eigenvalues();
        assert_eq!(ev[0].re, 0.0);
        assert_eq!(ev[0].im.abs(), 1.0);
        assert_eq!(stability_of(&ev), Stability::Marginal);

        let ev = Jacobian([[2.0, 0.0], [0.0, -3.0]]).eigenvalues();
        assert_eq!((ev[0].re, ev[1].re), (2.0, -3.0));
        assert_eq!(stability_of(&ev), Stability::Saddle);

        let ev = Jacobian([[-1.0, 5.0], [0.0, -1e-3]]).eigenvalues();
        assert!((ev[0].re + 1e-3).abs() < 1e-15 && (ev[1].re + 1.0).abs() < 1e-15);
        assert_eq!(stability_of(&ev), Stability::Stable);

        let ev = Jacobian([[1.0, -2.0], [2.0, 1.0]]).eigenvalues();
        assert_eq!(stability_of(&ev), Stability::Unstable);
    }

    #[test]
    fn classify_examples() {
        let p = params(0.25, 0.2);
        let origin = classify(IncentiveKind::Reward, &p, SystemState::new(0.0, 0.0)).unwrap();
        assert!(matches!(
            origin.stability,
            Stability::Unstable | Stability::Saddle
        ));
        let depleted = classify(IncentiveKind::Reward, &p, SystemState::new(1.0, 0.0)).unwrap();
        assert_eq!(depleted.stability, Stability::Stable);

        let rapid = params(1.0, 0.2);
        let coop = classify(IncentiveKind::Reward, &rapid, SystemState::new(1.0, 500.0)).unwrap();
        assert_eq!(coop.stability, Stability::Stable);
        assert_eq!(coop.kind, FixedPointKind::CoopBoundary);

        let err = classify(IncentiveKind::Reward, &rapid, SystemState::new(0.5, 500.0));
        assert!(matches!(err, Err(LabError::Residual { .. })));
    }

    #[test]
    fn reports() {
        let slow = equilibrium_report(IncentiveKind::Reward, &params(0.25, 0.2)).unwrap();
        assert_eq!(slow.points.len(), 2);
        assert_eq!(slow.stable().count(), 1);

        let bistable = equilibrium_report(IncentiveKind::Punishment, &params(0.6, 0.004)).unwrap();
        assert_eq!(bistable.points.len(), 5);
        let stable: Vec<_> = bistable.stable().map(|p| p.label.as_str()).collect();
        assert_eq!(stable, vec!["interior_1", "full_cooperation"]);
        assert!(bistable.warnings.is_empty(), "{:?}", bistable.warnings);

        let cycle = ModelParams::new(10, 0.006, 0.0001, 0.5, 0.5, 1000.0).unwrap();
        let report = equilibrium_report(IncentiveKind::Punishment, &cycle).unwrap();
        assert_eq!(report.points.len(), 4);
        assert_eq!(report.stable().count(), 0);

        let sorted = report
            .points
            .windows(2)
            .all(|w| (w[0].location.x, w[0].location.y) <= (w[1].location.x, w[1].location.y));
        assert!(sorted);
    }
}
