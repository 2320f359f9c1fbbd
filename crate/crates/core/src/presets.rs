//! Named presets. Parameter values live in [`PRESET_TABLE`] only.

use crate::config::{AbmSettings, AbmStart, Command, ExperimentConfig};
use crate::dynamics::IntegratorConfig;
use crate::error::{LabError, Result};
use crate::model::{IncentiveKind, ModelParams, SystemState};

use IncentiveKind::{Punishment as P, Reward as R};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetRow {
    pub id: &'static str,
    pub kind: IncentiveKind,
    pub group_size: u32,
    pub growth_rate: f64,
    pub tax: f64,
    pub defection_rate: f64,
    pub max_quota: f64,
    pub capacity: f64,
    /// Imitation noise `M` for agent-based presets.
    pub noise: Option<f64>,
}

impl PresetRow {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            group_size: self.group_size,
            growth_rate: self.growth_rate,
            tax: self.tax,
            defection_rate: self.defection_rate,
            max_quota: self.max_quota,
            capacity: self.capacity,
        }
    }
}

const fn row(
    id: &'static str,
    kind: IncentiveKind,
    group_size: u32,
    growth_rate: f64,
    tax: f64,
    noise: Option<f64>,
) -> PresetRow {
    PresetRow {
        id,
        kind,
        group_size,
        growth_rate,
        tax,
        defection_rate: 0.5,
        max_quota: 0.5,
        capacity: 1000.0,
        noise,
    }
}

/// One row per preset.
pub const PRESET_TABLE: [PresetRow; 19] = [
    row("fig1", R, 1000, 0.25, 0.2, None),
    row("fig2a", R, 1000, 0.6, 0.2, None),
    row("fig2b", R, 1000, 0.6, 0.02, None),
    row("fig3a", R, 1000, 1.0, 0.00002, None),
    row("fig3b", R, 1000, 1.0, 0.2, None),
    row("fig3c", R, 1000, 1.0, 0.04, None),
    row("fig4", P, 1000, 0.25, 0.2, None),
    row("fig5r1", P, 1000, 0.6, 0.004, None),
    row("fig5r2", P, 1000, 0.9, 0.003, None),
    row("fig6", P, 10, 0.006, 0.0001, None),
    row("fig7a", R, 1000, 0.25, 0.2, Some(1.0)),
    row("fig7b", R, 1000, 0.6, 0.2, Some(1.0)),
    row("fig7c", R, 1000, 0.6, 0.02, Some(0.1)),
    row("fig7d", R, 1000, 1.0, 0.00002, Some(1.0)),
    row("fig7e", R, 1000, 1.0, 0.2, Some(1.0)),
    row("fig7f", R, 1000, 1.0, 0.04, Some(1.0)),
    row("fig8a", P, 1000, 0.25, 0.2, Some(1.0)),
    row("fig8b", P, 1000, 0.6, 0.004, Some(2.0)),
    row("fig8c", P, 1000, 0.9, 0.003, Some(1.0)),
];

pub fn preset_ids() -> impl Iterator<Item = &'static str> {
    PRESET_TABLE.iter().map(|r| r.id)
}

pub fn preset_row(id: &str) -> Result<&'static PresetRow> {
    PRESET_TABLE
        .iter()
        .find(|r| r.id == id)
        .ok_or_else(|| LabError::UnknownPreset(id.to_string()))
}

/// Ids of the deterministic (mean-field) presets.
pub fn deterministic_ids() -> impl Iterator<Item = &'static str> {
    PRESET_TABLE.iter().filter(|r| r.noise.is_none()).map(|r| r.id)
}

/// Ids of the agent-based presets.
pub fn agent_ids() -> impl Iterator<Item = &'static str> {
    PRESET_TABLE.iter().filter(|r| r.noise.is_some()).map(|r| r.id)
}

/// Starting points for bistable agent-based presets, chosen well inside each
/// basin. Others start from half cooperators at half capacity.
fn agent_starts(id: &str) -> Vec<AbmStart> {
    let start = |cooperators, resource| AbmStart {
        cooperators,
        resource,
    };
    match id {
        "fig8b" => vec![start(700, 60.0), start(900, 100.0)],
        "fig8c" => vec![start(980, 500.0), start(100, 500.0)],
        _ => vec![start(500, 500.0)],
    }
}

/// The full experiment for a preset id.
pub fn preset(id: &str) -> Result<ExperimentConfig> {
    let row = preset_row(id)?;
    let params = row.params();
    let mut config = ExperimentConfig::new(Command::Simulate, row.kind, params);
    config.initial = Some(SystemState::new(0.5, params.capacity / 2.0));
    config.integrator = IntegratorConfig {
        t_end: 1e4,
        ..IntegratorConfig::default()
    };
    match (id, row.noise) {
        (_, Some(noise)) => {
            config.commands = vec![Command::Equilibria, Command::Abm];
            config.abm = AbmSettings {
                noise,
                steps: if noise > 1.0 { 4000 } else { 2000 },
                seeds: vec![1, 2, 3],
                starts: agent_starts(id),
            };
        }
        ("fig5r1" | "fig5r2", None) => {
            config.commands = vec![Command::Simulate, Command::Equilibria, Command::Basin];
        }
        ("fig6", None) => {
            config.commands = vec![Command::Simulate, Command::Equilibria, Command::Cycle];
            config.initial = Some(SystemState::new(0.9, 0.2 * params.capacity));
            config.integrator.t_end = 1e6;
            config.integrator.record_every = 10_000;
        }
        _ => config.commands = vec![Command::Simulate, Command::Equilibria],
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_unique_and_all_build() {
        let mut ids: Vec<&str> = preset_ids().collect();
        for id in &ids {
            preset(id).unwrap();
        }
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), PRESET_TABLE.len());
        assert_eq!(deterministic_ids().count(), 10);
        assert_eq!(agent_ids().count(), 9);
    }

    #[test]
    fn unknown_id() {
        assert!(matches!(preset("fig9"), Err(LabError::UnknownPreset(_))));
    }

    #[test]
    fn limit_cycle_preset() {
        let c = preset("fig6").unwrap();
        assert_eq!(c.kind, IncentiveKind::Punishment);
        assert_eq!(c.params.group_size, 10);
        assert_eq!(c.integrator.t_end, 1e6);
        assert_eq!(c.initial_state(), SystemState::new(0.9, 200.0));
    }
}
