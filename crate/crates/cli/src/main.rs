use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use commons_lab::config::{AbmStart, Command, ExperimentConfig, OutputFormat};
use commons_lab::presets::{preset, preset_ids};
use commons_lab::sweep::AxisSpec;
use commons_lab::{IncentiveKind, LabError, ModelParams, Result, SystemState};

mod run;

#[derive(Parser, Debug)]
#[command(
    name = "commons-lab",
    version,
    about = "Replicator/resource dynamics under tax-reward and tax-punishment"
)]
struct Cli {
    /// JSON experiment document; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Encoding for tabular outputs: csv or json.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Print the resolved experiment document and exit without running.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// reward or punishment
    #[arg(long)]
    kind: Option<IncentiveKind>,
    /// Group size N.
    #[arg(long = "n")]
    group_size: Option<u32>,
    /// Resource growth rate r.
    #[arg(long = "r")]
    growth_rate: Option<f64>,
    /// Tax delta.
    #[arg(long = "delta")]
    tax: Option<f64>,
    /// Defector over-harvest alpha.
    #[arg(long = "alpha")]
    defection_rate: Option<f64>,
    /// Maximum quota b_m.
    #[arg(long = "bm")]
    max_quota: Option<f64>,
    /// Capacity R_m.
    #[arg(long = "capacity")]
    capacity: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct StartArgs {
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    y0: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct IntegratorArgs {
    #[arg(long)]
    t_end: Option<f64>,
    /// RK4 step size.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    convergence_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Integrate one trajectory.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        start: StartArgs,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
    /// Find and classify all fixed points.
    Equilibria {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Look for a limit cycle by Poincaré-section returns.
    Cycle {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        start: StartArgs,
        #[arg(long)]
        transient: Option<f64>,
        #[arg(long)]
        observe: Option<f64>,
        /// Fixed step for cycle integration (default: chosen from rates).
        #[arg(long)]
        cycle_step: Option<f64>,
    },
    /// Map basins of attraction on a grid of starts.
    Basin {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        integrator: IntegratorArgs,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
    },
    /// Agent-based runs checked against the mean-field attractor.
    Abm {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        integrator: IntegratorArgs,
        /// Imitation noise M.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        steps: Option<u64>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Initial cooperator count (replaces configured starts).
        #[arg(long)]
        cooperators: Option<u32>,
        /// Initial resource (with --cooperators).
        #[arg(long)]
        resource: Option<f64>,
    },
    /// Scan regime and equilibria over one or two parameters.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        /// name:start:end:samples, with name one of N, r, delta, alpha, b_m, R_m.
        #[arg(long = "axis")]
        axes: Vec<AxisSpec>,
    },
    /// Run a named preset.
    Preset {
        /// One of fig1 ... fig8c.
        id: String,
    },
}

fn invalid(what: &'static str, reason: impl Into<String>) -> LabError {
    LabError::Validation {
        what,
        reason: reason.into(),
    }
}

/// Defaults shared by the presets; only r, delta and kind are required.
fn base_from_flags(params: &ParamArgs, command: Command) -> Result<ExperimentConfig> {
    let kind = params
        .kind
        .ok_or_else(|| invalid("kind", "--kind is required without --config"))?;
    let p = ModelParams {
        group_size: 1000,
        growth_rate: params
            .growth_rate
            .ok_or_else(|| invalid("r", "--r is required without --config"))?,
        tax: params
            .tax
            .ok_or_else(|| invalid("delta", "--delta is required without --config"))?,
        defection_rate: 0.5,
        max_quota: 0.5,
        capacity: 1000.0,
    };
    Ok(ExperimentConfig::new(command, kind, p))
}

fn apply_params(c: &mut ExperimentConfig, a: &ParamArgs) {
    if let Some(v) = a.kind {
        c.kind = v;
    }
    let p = &mut c.params;
    if let Some(v) = a.group_size {
        p.group_size = v;
    }
    if let Some(v) = a.growth_rate {
        p.growth_rate = v;
    }
    if let Some(v) = a.tax {
        p.tax = v;
    }
    if let Some(v) = a.defection_rate {
        p.defection_rate = v;
    }
    if let Some(v) = a.max_quota {
        p.max_quota = v;
    }
    if let Some(v) = a.capacity {
        p.capacity = v;
    }
}

fn apply_start(c: &mut ExperimentConfig, a: &StartArgs) {
    if a.x0.is_some() || a.y0.is_some() {
        let cur = c.initial_state();
        c.initial = Some(SystemState::new(a.x0.unwrap_or(cur.x), a.y0.unwrap_or(cur.y)));
    }
}

fn apply_integrator(c: &mut ExperimentConfig, a: &IntegratorArgs) {
    let i = &mut c.integrator;
    if let Some(v) = a.t_end {
        i.t_end = v;
    }
    if let Some(v) = a.step {
        i.step_size = v;
    }
    if let Some(v) = a.record_every {
        i.record_every = v;
    }
    if let Some(v) = a.convergence_tol {
        i.convergence_tol = v;
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let file = match &cli.config {
        Some(path) => Some(ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let mut config = match (&cli.command, file) {
        (None, Some(c)) => c,
        (None, None) => return Err(invalid("command", "a subcommand or --config is required")),
        (Some(Sub::Preset { id }), _) => preset(id)?,
        (Some(sub), Some(mut c)) => {
            c.commands = vec![command_of(sub)];
            c
        }
        (Some(sub), None) => base_from_flags(params_of(sub), command_of(sub))?,
    };

    match &cli.command {
        Some(Sub::Simulate {
            params,
            start,
            integrator,
        }) => {
            apply_params(&mut config, params);
            apply_start(&mut config, start);
            apply_integrator(&mut config, integrator);
        }
        Some(Sub::Equilibria { params }) => apply_params(&mut config, params),
        Some(Sub::Cycle {
            params,
            start,
            transient,
            observe,
            cycle_step,
        }) => {
            apply_params(&mut config, params);
            apply_start(&mut config, start);
            if let Some(v) = transient {
                config.cycle.transient = *v;
            }
            if let Some(v) = observe {
                config.cycle.observe = *v;
            }
            if cycle_step.is_some() {
                config.cycle.step_size = *cycle_step;
            }
        }
        Some(Sub::Basin {
            params,
            integrator,
            nx,
            ny,
        }) => {
            apply_params(&mut config, params);
            apply_integrator(&mut config, integrator);
            config.grid = (nx.unwrap_or(config.grid.0), ny.unwrap_or(config.grid.1));
        }
        Some(Sub::Abm {
            params,
            integrator,
            noise,
            steps,
            seeds,
            cooperators,
            resource,
        }) => {
            apply_params(&mut config, params);
            apply_integrator(&mut config, integrator);
            if let Some(v) = noise {
                config.abm.noise = *v;
            }
            if let Some(v) = steps {
                config.abm.steps = *v;
            }
            if let Some(v) = seeds {
                config.abm.seeds = v.clone();
            }
            match (cooperators, resource) {
                (Some(c), r) => {
                    config.abm.starts = vec![AbmStart {
                        cooperators: *c,
                        resource: r.unwrap_or(config.params.capacity / 2.0),
                    }]
                }
                (None, Some(_)) => {
                    return Err(invalid("abm", "--resource requires --cooperators"))
                }
                (None, None) => {}
            }
        }
        Some(Sub::Sweep { params, axes }) => {
            apply_params(&mut config, params);
            if !axes.is_empty() {
                config.sweep = axes.clone();
            }
        }
        Some(Sub::Preset { .. }) | None => {}
    }

    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
    if let Some(f) = cli.format {
        config.format = f;
    }
    config.validate()?;
    Ok(config)
}

fn command_of(sub: &Sub) -> Command {
    match sub {
        Sub::Simulate { .. } => Command::Simulate,
        Sub::Equilibria { .. } => Command::Equilibria,
        Sub::Cycle { .. } => Command::Cycle,
        Sub::Basin { .. } => Command::Basin,
        Sub::Abm { .. } => Command::Abm,
        Sub::Sweep { .. } => Command::Sweep,
        Sub::Preset { .. } => unreachable!("presets carry their own commands"),
    }
}

fn params_of(sub: &Sub) -> &ParamArgs {
    match sub {
        Sub::Simulate { params, .. }
        | Sub::Equilibria { params }
        | Sub::Cycle { params, .. }
        | Sub::Basin { params, .. }
        | Sub::Abm { params, .. }
        | Sub::Sweep { params, .. } => params,
        Sub::Preset { .. } => unreachable!("presets carry their own parameters"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli).and_then(|config| {
        if cli.dump_config {
            println!("{}", config.to_json()?);
            Ok(())
        } else {
            let summary = run::run(&config)?;
            println!("{summary}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let LabError::UnknownPreset(_) = e {
                eprintln!(
                    "known presets: {}",
                    preset_ids().collect::<Vec<_>>().join(", ")
                );
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
