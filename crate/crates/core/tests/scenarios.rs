use commons_lab::cycles::{basin_map, detect_limit_cycle, CycleConfig, BASIN_TOL, UNRESOLVED};
use commons_lab::dynamics::{detect_outcome, integrate, IntegratorConfig, Outcome};
use commons_lab::equilibria::{equilibrium_report, Stability};
use commons_lab::{IncentiveKind, ModelParams, SystemState};

fn params(r: f64, delta: f64) -> ModelParams {
    ModelParams::new(1000, r, delta, 0.5, 0.5, 1000.0).unwrap()
}

#[test]
fn stable_points_are_stationary() {
    let cases = [
        (IncentiveKind::Reward, params(0.6, 0.2)),
        (IncentiveKind::Reward, params(1.0, 0.04)),
        (IncentiveKind::Punishment, params(0.6, 0.004)),
        (IncentiveKind::Punishment, params(0.25, 0.002)),
    ];
    let cfg = IntegratorConfig {
        t_end: 100.0,
        convergence_tol: 1e-300,
        ..Default::default()
    };
    for (kind, p) in cases {
        let report = equilibrium_report(kind, &p).unwrap();
        for fp in report.stable() {
            let traj = integrate(kind, &p, fp.location, &cfg).unwrap();
            for s in &traj.states {
                let d = p.scaled_distance(&fp.location, s);
                assert!(d < 1e-9, "{kind:?} {}: drifted {d:e}", fp.label);
            }
        }
    }
}

#[test]
fn trajectories_end_at_reported_attractors() {
    let kind = IncentiveKind::Punishment;
    let p = params(0.6, 0.004);
    let report = equilibrium_report(kind, &p).unwrap();
    let stable: Vec<_> = report.stable().cloned().collect();
    assert_eq!(stable.len(), 2);
    let cfg = IntegratorConfig::default();
    for fp in &stable {
        let l = fp.location;
        let start = SystemState::new((l.x - 0.01).max(0.0) + 0.005, (l.y * 0.99).max(1.0));
        let traj = integrate(kind, &p, start, &cfg).unwrap();
        let outcome = detect_outcome(&p, &traj, &report.points, BASIN_TOL);
        assert_eq!(outcome, Outcome::FixedPoint(fp.label.clone()), "from {start:?}");
    }
}

#[test]
fn basin_grid_partitions_starts() {
    let kind = IncentiveKind::Punishment;
    let p = params(0.6, 0.004);
    let grid = basin_map(kind, &p, (4, 4), &IntegratorConfig::default()).unwrap();
    assert_eq!(grid.cells.len(), 16);
    let labelled: usize = grid.attractor_legend.keys().map(|l| grid.count(l)).sum();
    assert_eq!(labelled + grid.count(UNRESOLVED), 16);
    for fp in grid.attractor_legend.values() {
        assert_eq!(fp.stability, Stability::Stable);
    }
    for (i, cell) in grid.cells.iter().enumerate() {
        let (ix, iy) = (i / 4, i % 4);
        assert!((cell.x0 - (ix as f64 + 0.5) / 4.0).abs() < 1e-12);
        assert!((cell.y0 - (iy as f64 + 0.5) * 250.0).abs() < 1e-9);
    }
    assert_eq!(grid, basin_map(kind, &p, (4, 4), &IntegratorConfig::default()).unwrap());
}

#[test]
fn converging_run_reports_no_cycle() {
    let p = params(0.6, 0.2);
    let report = detect_limit_cycle(
        IncentiveKind::Reward,
        &p,
        SystemState::new(0.5, 500.0),
        &CycleConfig::default(),
    )
    .unwrap();
    assert!(!report.found);
    let end = report.converged_to.expect("converged");
    assert!((end.x - 1.0).abs() < 1e-6);
    assert!((end.y - 1000.0 / 6.0).abs() < 1e-3, "{end:?}");
}
