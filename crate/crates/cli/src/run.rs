use std::path::{Path, PathBuf};

use commons_lab::abm::check_against_reference;
use commons_lab::config::{Command, ExperimentConfig, OutputFormat};
use commons_lab::cycles::{basin_map, detect_limit_cycle, UNRESOLVED};
use commons_lab::dynamics::{detect_outcome, integrate};
use commons_lab::equilibria::{equilibrium_report, FixedPoint};
use commons_lab::io::{fmt_f64, write_basin_csv, write_json, write_sweep_csv, write_trajectory_csv};
use commons_lab::sweep::sweep;
use commons_lab::Result;
use serde_json::json;

/// Scaled distance for naming the fixed point a simulation ends on.
const OUTCOME_TOL: f64 = 1e-2;

struct Sink<'a> {
    dir: Option<&'a Path>,
    format: OutputFormat,
}

impl Sink<'_> {
    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.map(|d| d.join(name))
    }

    fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<()> {
        match self.path(name) {
            Some(p) => write_json(&p, value),
            None => Ok(()),
        }
    }
}

/// Runs every configured command and returns the one-line summary.
pub fn run(config: &ExperimentConfig) -> Result<String> {
    config.validate()?;
    if let Some(dir) = &config.output {
        std::fs::create_dir_all(dir)?;
    }
    let sink = Sink {
        dir: config.output.as_deref(),
        format: config.format,
    };
    let mut parts = Vec::new();
    for &command in &config.commands {
        parts.push(run_one(command, config, &sink)?);
    }
    Ok(parts.join("; "))
}

fn stable_points(config: &ExperimentConfig) -> Result<Vec<FixedPoint>> {
    Ok(equilibrium_report(config.kind, &config.params)?
        .stable()
        .cloned()
        .collect())
}

fn run_one(command: Command, config: &ExperimentConfig, sink: &Sink<'_>) -> Result<String> {
    let (kind, params) = (config.kind, &config.params);
    match command {
        Command::Simulate => {
            let traj = integrate(kind, params, config.initial_state(), &config.integrator)?;
            let outcome = detect_outcome(params, &traj, &stable_points(config)?, OUTCOME_TOL);
            let end = traj.terminal();
            match (sink.path("trajectory.csv"), sink.format) {
                (Some(p), OutputFormat::Csv) => write_trajectory_csv(&p, &traj)?,
                _ => sink.json("trajectory.json", &traj)?,
            }
            sink.json(
                "simulate.json",
                &json!({
                    "kind": kind,
                    "params": params,
                    "initial": config.initial_state(),
                    "integrator": config.integrator,
                    "terminal": end,
                    "t_final": traj.times.last(),
                    "terminal_flag": traj.terminal_flag,
                    "clamp_events": traj.clamp_events,
                    "outcome": outcome.label(),
                }),
            )?;
            Ok(format!(
                "simulate: {:?} at ({}, {}) -> {}",
                traj.terminal_flag,
                fmt_f64(end.x),
                fmt_f64(end.y),
                outcome
            ))
        }
        Command::Equilibria => {
            let report = equilibrium_report(kind, params)?;
            sink.json("equilibria.json", &report)?;
            let stable: Vec<&str> = report.stable().map(|p| p.label.as_str()).collect();
            Ok(format!(
                "equilibria: {} points, {} stable [{}], regime {}",
                report.points.len(),
                stable.len(),
                stable.join(", "),
                report.regime.regime
            ))
        }
        Command::Cycle => {
            let report = detect_limit_cycle(kind, params, config.initial_state(), &config.cycle)?;
            sink.json("cycle.json", &report)?;
            Ok(if report.found {
                format!(
                    "cycle: found, period {} (cv {})",
                    fmt_f64(report.period_estimate),
                    fmt_f64(report.period_cv)
                )
            } else {
                format!("cycle: not found ({})", report.diagnostic)
            })
        }
        Command::Basin => {
            let grid = basin_map(kind, params, config.grid, &config.integrator)?;
            let mut counts = std::collections::BTreeMap::new();
            for c in &grid.cells {
                *counts.entry(c.label.clone()).or_insert(0usize) += 1;
            }
            let mut doc = json!({
                "x_resolution": grid.x_resolution,
                "y_resolution": grid.y_resolution,
                "legend": grid.attractor_legend,
                "counts": counts,
            });
            match (sink.path("basin.csv"), sink.format) {
                (Some(p), OutputFormat::Csv) => write_basin_csv(&p, &grid)?,
                _ => doc["cells"] = serde_json::to_value(&grid.cells)?,
            }
            sink.json("basin.json", &doc)?;
            let listed: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
            Ok(format!(
                "basin: {}x{} cells, {} unresolved [{}]",
                grid.x_resolution,
                grid.y_resolution,
                grid.count(UNRESOLVED),
                listed.join(", ")
            ))
        }
        Command::Abm => {
            let mut checks = Vec::new();
            for (i, start) in config.abm.resolved_starts(params).into_iter().enumerate() {
                for &seed in &config.abm.seeds {
                    let run = config.abm_run(start, seed);
                    let (traj, check) = check_against_reference(&run, &config.integrator)?;
                    let stem = format!("abm_start{i}_seed{seed}");
                    match (sink.path(&format!("{stem}.csv")), sink.format) {
                        (Some(p), OutputFormat::Csv) => write_trajectory_csv(&p, &traj)?,
                        _ => sink.json(&format!("{stem}.json"), &traj)?,
                    }
                    checks.push(json!({ "start": start, "check": check }));
                }
            }
            let matched = checks
                .iter()
                .filter(|c| c["check"]["matches_reference"] == true)
                .count();
            sink.json("abm.json", &checks)?;
            Ok(format!(
                "abm: {matched}/{} runs match the mean-field attractor",
                checks.len()
            ))
        }
        Command::Sweep => {
            let table = sweep(kind, params, &config.sweep)?;
            match (sink.path("sweep.csv"), sink.format) {
                (Some(p), OutputFormat::Csv) => write_sweep_csv(&p, &table)?,
                _ => sink.json("sweep.json", &table)?,
            }
            Ok(format!("sweep: {} rows", table.rows.len()))
        }
    }
}
