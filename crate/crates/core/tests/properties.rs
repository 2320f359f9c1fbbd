use commons_lab::abm::{run_abm, AgentRunConfig};
use commons_lab::config::{Command, ExperimentConfig};
use commons_lab::dynamics::{integrate, IntegratorConfig};
use commons_lab::equilibria::{classify, equilibrium_report, jacobian, RESIDUAL_TOL};
use commons_lab::model::{classify_regime, payoff_diff_closed, vector_field, GrowthRegime};
use commons_lab::sweep::AxisSpec;
use commons_lab::{IncentiveKind, ModelParams, SystemState};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = IncentiveKind> {
    prop_oneof![Just(IncentiveKind::Reward), Just(IncentiveKind::Punishment)]
}

prop_compose! {
    fn params()(
        n in 2u32..2000,
        r in 0.001f64..2.0,
        delta in 0.0f64..0.5,
        alpha in 0.0f64..1.0,
        bm in 0.01f64..1.0,
        cap in 10.0f64..5000.0,
    ) -> ModelParams {
        ModelParams::new(n, r, delta, alpha, bm, cap).unwrap()
    }
}

prop_compose! {
    fn params_and_state()(p in params())(
        x in 0.0f64..=1.0,
        y in 0.0..=p.capacity,
        p in Just(p),
    ) -> (ModelParams, SystemState) {
        (p, SystemState::new(x, y))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn boundary_lines_are_invariant(k in kind(), (p, s) in params_and_state()) {
        for x in [0.0, 1.0] {
            prop_assert_eq!(vector_field(k, &p, &SystemState::new(x, s.y)).dx, 0.0);
        }
        prop_assert_eq!(vector_field(k, &p, &SystemState::new(s.x, 0.0)).dy, 0.0);
        prop_assert!(vector_field(k, &p, &SystemState::new(s.x, p.capacity)).dy <= 0.0);
    }

    #[test]
    fn payoff_gap_is_finite_and_bounded(k in kind(), (p, s) in params_and_state()) {
        let gap = payoff_diff_closed(k, &p, &s);
        prop_assert!(gap.is_finite());
        let n = f64::from(p.group_size);
        prop_assert!(gap <= n * p.tax + 1e-9);
        prop_assert!(gap >= p.tax - p.defection_rate * p.max_quota - 1e-9);
    }

    #[test]
    fn regime_matches_thresholds(p in params()) {
        let regime = classify_regime(&p);
        let expected = if p.growth_rate < regime.e_c {
            GrowthRegime::Slow
        } else if p.growth_rate > regime.e_d {
            GrowthRegime::Rapid
        } else {
            GrowthRegime::Moderate
        };
        prop_assert!(regime.regime == expected || regime.regime == GrowthRegime::Boundary);
    }

    #[test]
    fn reported_points_are_equilibria_in_the_box(k in kind(), p in params()) {
        let report = equilibrium_report(k, &p).unwrap();
        prop_assert!(report.points.len() >= 2);
        let mut labels: Vec<&str> = report.points.iter().map(|fp| fp.label.as_str()).collect();
        labels.sort();
        labels.dedup();
        prop_assert_eq!(labels.len(), report.points.len());
        for fp in &report.points {
            prop_assert!(fp.residual < RESIDUAL_TOL);
            fp.location.validate(&p).unwrap();
            let again = classify(k, &p, fp.location).unwrap();
            prop_assert_eq!(again.stability, fp.stability);
        }
    }

    #[test]
    fn trajectories_stay_in_the_box(k in kind(), (p, s) in params_and_state()) {
        let cfg = IntegratorConfig { t_end: 20.0, step_size: 0.01, record_every: 50, ..Default::default() };
        // fast parameter sets need a smaller step than 0.01; skip them
        let rate = f64::from(p.group_size) * p.tax + p.growth_rate + p.e_d();
        prop_assume!(rate * cfg.step_size < 0.5);
        let traj = integrate(k, &p, s, &cfg).unwrap();
        prop_assert_eq!(traj.times.len(), traj.states.len());
        prop_assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        for st in &traj.states {
            st.validate(&p).unwrap();
        }
    }

    #[test]
    fn agent_runs_are_bounded_and_reproducible(
        k in kind(),
        n in 2u32..200,
        frac in 0.0f64..=1.0,
        y_frac in 0.0f64..=1.0,
        seed in any::<u64>(),
        noise in 0.05f64..3.0,
    ) {
        let params = ModelParams::new(n, 0.6, 0.01, 0.5, 0.5, 1000.0).unwrap();
        let cfg = AgentRunConfig {
            params,
            kind: k,
            noise,
            seed,
            steps: 40,
            initial_cooperators: (frac * f64::from(n)).round() as u32,
            initial_resource: y_frac * 1000.0,
        };
        let a = run_abm(&cfg).unwrap();
        prop_assert_eq!(a.len(), 41);
        for s in &a.states {
            prop_assert!((0.0..=1.0).contains(&s.x));
            prop_assert!((0.0..=1000.0).contains(&s.y));
        }
        prop_assert_eq!(a, run_abm(&cfg).unwrap());
    }

    #[test]
    fn configs_round_trip(k in kind(), p in params(), x in 0.0f64..=1.0) {
        let mut c = ExperimentConfig::new(Command::Cycle, k, p);
        c.initial = Some(SystemState::new(x, p.capacity / 3.0));
        c.sweep = vec!["r:0.1:0.9:7".parse::<AxisSpec>().unwrap()];
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn jacobian_matches_central_differences(
        k in kind(),
        p in params(),
        x in 0.05f64..0.95,
        y_frac in 0.05f64..0.95,
    ) {
        let s = SystemState::new(x, y_frac * p.capacity);
        let j = jacobian(k, &p, &s).0;
        let hx = 1e-6;
        let hy = 1e-6 * p.capacity;
        let f = |x: f64, y: f64| vector_field(k, &p, &SystemState::new(x, y));
        let (xp, xm) = (f(x + hx, s.y), f(x - hx, s.y));
        let (yp, ym) = (f(x, s.y + hy), f(x, s.y - hy));
        let fd = [
            [(xp.dx - xm.dx) / (2.0 * hx), (yp.dx - ym.dx) / (2.0 * hy)],
            [(xp.dy - xm.dy) / (2.0 * hx), (yp.dy - ym.dy) / (2.0 * hy)],
        ];
        // compare in units where both coordinates live on [0,1]
        let scale = [[1.0, p.capacity], [1.0 / p.capacity, 1.0]];
        let size = f64::from(p.group_size) * p.tax + p.growth_rate + p.e_d() + 1.0;
        for i in 0..2 {
            for c in 0..2 {
                let err = (j[i][c] - fd[i][c]).abs() * scale[i][c];
                prop_assert!(err < 1e-5 * size, "entry {i}{c}: {} vs {}", j[i][c], fd[i][c]);
            }
        }
    }
}
