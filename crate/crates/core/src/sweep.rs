//! One- and two-axis parameter scans of regime and equilibrium structure.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{equilibrium_report, FixedPointKind};
use crate::error::{LabError, Result};
use crate::model::{reward_interior_conditions, GrowthRegime, IncentiveKind, ModelParams};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    GroupSize,
    GrowthRate,
    Tax,
    DefectionRate,
    MaxQuota,
    Capacity,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::GroupSize => "N",
            SweepParam::GrowthRate => "r",
            SweepParam::Tax => "delta",
            SweepParam::DefectionRate => "alpha",
            SweepParam::MaxQuota => "b_m",
            SweepParam::Capacity => "R_m",
        }
    }

    fn apply(self, params: &mut ModelParams, value: f64) {
        match self {
            SweepParam::GroupSize => params.group_size = value.round() as u32,
            SweepParam::GrowthRate => params.growth_rate = value,
            SweepParam::Tax => params.tax = value,
            SweepParam::DefectionRate => params.defection_rate = value,
            SweepParam::MaxQuota => params.max_quota = value,
            SweepParam::Capacity => params.capacity = value,
        }
    }
}

impl FromStr for SweepParam {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "N" | "group_size" => SweepParam::GroupSize,
            "r" | "growth_rate" => SweepParam::GrowthRate,
            "delta" | "tax" => SweepParam::Tax,
            "alpha" | "defection_rate" => SweepParam::DefectionRate,
            "b_m" | "max_quota" => SweepParam::MaxQuota,
            "R_m" | "capacity" => SweepParam::Capacity,
            other => {
                return Err(LabError::invalid(
                    "sweep axis",
                    format!("unknown parameter {other:?}"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: SweepParam,
    pub start: f64,
    pub end: f64,
    pub samples: usize,
}

impl AxisSpec {
    pub fn validate(&self) -> Result<()> {
        let what = "sweep axis";
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err(LabError::invalid(what, "range must be finite"));
        }
        if self.samples == 0 {
            return Err(LabError::invalid(what, "samples must be >= 1"));
        }
        // a single sample is only meaningful for a degenerate range
        if self.samples == 1 && self.start != self.end {
            return Err(LabError::invalid(
                what,
                "a single sample requires start == end",
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.samples == 1 {
            return vec![self.start];
        }
        let last = (self.samples - 1) as f64;
        (0..self.samples)
            .map(|i| self.start + (self.end - self.start) * i as f64 / last)
            .collect()
    }
}

/// Parses `name:start:end:samples`.
impl FromStr for AxisSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [name, start, end, samples] = parts[..] else {
            return Err(LabError::invalid(
                "sweep axis",
                format!("expected name:start:end:samples, got {s:?}"),
            ));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| LabError::invalid("sweep axis", format!("bad number {v:?}")))
        };
        let spec = AxisSpec {
            param: name.trim().parse()?,
            start: num(start)?,
            end: num(end)?,
            samples: samples
                .trim()
                .parse()
                .map_err(|_| LabError::invalid("sweep axis", format!("bad sample count {samples:?}")))?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn validate_axes(axes: &[AxisSpec]) -> Result<()> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(LabError::invalid("sweep", "one or two axes required"));
    }
    if axes.len() == 2 && axes[0].param == axes[1].param {
        return Err(LabError::invalid("sweep", "axes must sweep different parameters"));
    }
    axes.iter().try_for_each(AxisSpec::validate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StablePoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub regime: GrowthRegime,
    pub e_c: f64,
    pub e_d: f64,
    pub fixed_points: usize,
    pub interior_points: usize,
    pub stable_points: Vec<StablePoint>,
    /// Reward only: the closed-form interior-existence predicate.
    pub interior_predicate: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axes: Vec<AxisSpec>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.axes.iter().map(|a| a.param.name().to_string()).collect();
        h.extend(
            [
                "regime",
                "e_c",
                "e_d",
                "fixed_points",
                "interior_points",
                "stable_count",
                "stable_points",
                "interior_predicate",
            ]
            .map(String::from),
        );
        h
    }
}

/// Evaluates regime and equilibria at every grid point (first axis outer).
pub fn sweep(kind: IncentiveKind, template: &ModelParams, axes: &[AxisSpec]) -> Result<SweepTable> {
    validate_axes(axes)?;
    let grids: Vec<Vec<f64>> = axes.iter().map(AxisSpec::values).collect();
    let points: Vec<Vec<f64>> = match &grids[..] {
        [a] => a.iter().map(|&v| vec![v]).collect(),
        [a, b] => a
            .iter()
            .flat_map(|&u| b.iter().map(move |&v| vec![u, v]))
            .collect(),
        _ => unreachable!(),
    };

    let rows: Vec<Result<SweepRow>> = parallel::run(|| {
        points
            .par_iter()
            .map(|values| {
                let mut params = *template;
                for (axis, &v) in axes.iter().zip(values) {
                    axis.param.apply(&mut params, v);
                }
                params.validate()?;
                let report = equilibrium_report(kind, &params)?;
                let interior_predicate = match kind {
                    IncentiveKind::Reward if params.growth_rate > 0.0 => {
                        Some(reward_interior_conditions(&params)?.exists)
                    }
                    _ => None,
                };
                Ok(SweepRow {
                    values: values.clone(),
                    regime: report.regime.regime,
                    e_c: report.regime.e_c,
                    e_d: report.regime.e_d,
                    fixed_points: report.points.len(),
                    interior_points: report
                        .points
                        .iter()
                        .filter(|p| p.kind == FixedPointKind::Interior)
                        .count(),
                    stable_points: report
                        .stable()
                        .map(|p| StablePoint {
                            label: p.label.clone(),
                            x: p.location.x,
                            y: p.location.y,
                        })
                        .collect(),
                    interior_predicate,
                    warnings: report.warnings.clone(),
                })
            })
            .collect()
    });
    Ok(SweepTable {
        axes: axes.to_vec(),
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template() -> ModelParams {
        ModelParams::new(1000, 1.0, 0.04, 0.5, 0.5, 1000.0).unwrap()
    }

    #[test]
    fn axis_parsing() {
        let a: AxisSpec = "delta:0:0.1:11".parse().unwrap();
        assert_eq!(a.param, SweepParam::Tax);
        assert_eq!(a.values().len(), 11);
        assert!((a.values()[10] - 0.1).abs() < 1e-15);
        assert!("delta:0:0.1".parse::<AxisSpec>().is_err());
        assert!("beta:0:1:3".parse::<AxisSpec>().is_err());
        assert!("r:0:1:1".parse::<AxisSpec>().is_err());
        assert!("r:0:nan:3".parse::<AxisSpec>().is_err());
        assert!("r:0.5:0.5:1".parse::<AxisSpec>().is_ok());
    }

    #[test]
    fn single_point_sweep_gives_one_row() {
        let axes = ["delta:0.04:0.04:1".parse().unwrap()];
        let t = sweep(IncentiveKind::Reward, &template(), &axes).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].stable_points.len(), 1);
        assert_eq!(t.rows[0].stable_points[0].label, "interior");
    }

    #[test]
    fn growth_sweep_visits_all_regimes() {
        // E_C = 0.5, E_D = 0.75
        let axes = ["r:0.25:1.0:5".parse().unwrap()];
        let t = sweep(IncentiveKind::Reward, &template(), &axes).unwrap();
        let regimes: Vec<GrowthRegime> = t.rows.iter().map(|r| r.regime).collect();
        assert!(regimes.contains(&GrowthRegime::Slow));
        assert!(regimes.contains(&GrowthRegime::Moderate));
        assert!(regimes.contains(&GrowthRegime::Rapid));
    }

    #[test]
    fn tax_sweep_switches_attractor() {
        // interior exists iff delta < alpha b_m - alpha N b_m^2/(r R_m) = 0.125
        let axes = ["delta:0.05:0.2:4".parse().unwrap()];
        let t = sweep(IncentiveKind::Reward, &template(), &axes).unwrap();
        let first: Vec<&str> = t
            .rows
            .iter()
            .map(|r| r.stable_points[0].label.as_str())
            .collect();
        assert_eq!(first, ["interior", "interior", "full_cooperation", "full_cooperation"]);
    }

    #[test]
    fn two_axes_are_row_major() {
        let axes = [
            "r:0.6:1.0:3".parse().unwrap(),
            "delta:0.01:0.2:2".parse().unwrap(),
        ];
        let t = sweep(IncentiveKind::Punishment, &template(), &axes).unwrap();
        assert_eq!(t.rows.len(), 6);
        assert_eq!(t.rows[1].values, vec![0.6, 0.2]);
        assert!(t.rows.iter().all(|r| r.interior_predicate.is_none()));
        assert!(validate_axes(&[axes[0], axes[0]]).is_err());
    }
}
