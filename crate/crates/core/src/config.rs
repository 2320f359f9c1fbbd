//! JSON experiment documents consumed by the command-line front end.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cycles::CycleConfig;
use crate::dynamics::IntegratorConfig;
use crate::error::{LabError, Result};
use crate::model::{IncentiveKind, ModelParams, SystemState};
use crate::sweep::AxisSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Equilibria,
    Cycle,
    Basin,
    Abm,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Equilibria => "equilibria",
            Command::Cycle => "cycle",
            Command::Basin => "basin",
            Command::Abm => "abm",
            Command::Sweep => "sweep",
        }
    }
}

/// Encoding for tabular outputs (trajectories, basin cells, sweep rows).
/// Reports are always JSON.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(LabError::invalid(
                "format",
                format!("unknown format {other:?}; expected csv or json"),
            )),
        }
    }
}

/// One agent-based starting point: initial cooperator count and resource.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbmStart {
    pub cooperators: u32,
    pub resource: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbmSettings {
    /// Imitation noise `M`.
    pub noise: f64,
    pub steps: u64,
    pub seeds: Vec<u64>,
    /// Empty means a single start at half cooperators, half capacity.
    pub starts: Vec<AbmStart>,
}

impl Default for AbmSettings {
    fn default() -> Self {
        AbmSettings {
            noise: 1.0,
            steps: 2000,
            seeds: vec![1, 2, 3],
            starts: Vec::new(),
        }
    }
}

impl AbmSettings {
    pub fn resolved_starts(&self, params: &ModelParams) -> Vec<AbmStart> {
        if self.starts.is_empty() {
            vec![AbmStart {
                cooperators: params.group_size / 2,
                resource: params.capacity / 2.0,
            }]
        } else {
            self.starts.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run in order; outputs of different commands never share a file name.
    pub commands: Vec<Command>,
    pub kind: IncentiveKind,
    pub params: ModelParams,
    /// Defaults to `(0.5, R_m / 2)`.
    #[serde(default)]
    pub initial: Option<SystemState>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub cycle: CycleConfig,
    /// Basin grid cells along x and y.
    #[serde(default = "default_grid")]
    pub grid: (usize, usize),
    #[serde(default)]
    pub abm: AbmSettings,
    #[serde(default)]
    pub sweep: Vec<AxisSpec>,
    /// Output directory; nothing is written when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_grid() -> (usize, usize) {
    (21, 21)
}

impl ExperimentConfig {
    pub fn new(command: Command, kind: IncentiveKind, params: ModelParams) -> Self {
        ExperimentConfig {
            commands: vec![command],
            kind,
            params,
            initial: None,
            integrator: IntegratorConfig::default(),
            cycle: CycleConfig::default(),
            grid: default_grid(),
            abm: AbmSettings::default(),
            sweep: Vec::new(),
            output: None,
            format: OutputFormat::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn initial_state(&self) -> SystemState {
        self.initial
            .unwrap_or(SystemState::new(0.5, self.params.capacity / 2.0))
    }

    /// Checks every nested setting the listed commands will use.
    pub fn validate(&self) -> Result<()> {
        if self.commands.is_empty() {
            return Err(LabError::invalid("commands", "at least one command required"));
        }
        self.params.validate()?;
        for command in &self.commands {
            match command {
                Command::Simulate => {
                    self.integrator.validate()?;
                    self.initial_state().validate(&self.params)?;
                }
                Command::Equilibria => {}
                Command::Cycle => {
                    self.cycle.validate()?;
                    self.initial_state().validate(&self.params)?;
                }
                Command::Basin => {
                    self.integrator.validate()?;
                    if self.grid.0 < 2 || self.grid.1 < 2 {
                        return Err(LabError::invalid("grid", "resolution must be >= 2 per axis"));
                    }
                }
                Command::Abm => {
                    self.integrator.validate()?;
                    if self.abm.seeds.is_empty() {
                        return Err(LabError::invalid("abm.seeds", "at least one seed required"));
                    }
                    for start in self.abm.resolved_starts(&self.params) {
                        self.abm_run(start, self.abm.seeds[0]).validate()?;
                    }
                }
                Command::Sweep => {
                    crate::sweep::validate_axes(&self.sweep)?;
                }
            }
        }
        Ok(())
    }

    pub fn abm_run(&self, start: AbmStart, seed: u64) -> crate::abm::AgentRunConfig {
        crate::abm::AgentRunConfig {
            params: self.params,
            kind: self.kind,
            noise: self.abm.noise,
            seed,
            steps: self.abm.steps,
            initial_cooperators: start.cooperators,
            initial_resource: start.resource,
        }
    }
}
