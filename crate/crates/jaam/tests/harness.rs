use jaam::config::{pow2_range, ExperimentConfig, Mode, Scheme};
use jaam::harness::{
    backstop_experiment, convergence_experiment, coupled_source, efficiency_experiment,
    path_schedule, reference_ratio, run_reference, single_path,
};
use jaam_core::model::PureJump;
use jaam_core::stepper::simulate_path;
use jaam_core::{LevyTerms, MapPair, ProblemId, StepParams};

fn small(problem: ProblemId) -> ExperimentConfig {
    ExperimentConfig {
        problem,
        h_max: pow2_range(-7, -4),
        h_ref: 2f64.powi(-10),
        paths: 100,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn reference_is_exact_for_pure_jumps() {
    let h_ref = 2f64.powi(-8);
    for lambda in [0.0, 8.0] {
        let problem = PureJump::new(vec![0.4, -0.3], lambda, 1.0).unwrap();
        for path in 0..50 {
            let schedule = path_schedule(&problem, 1, path).unwrap();
            let mut noise =
                coupled_source(&problem, &schedule, h_ref, LevyTerms::Auto, 1, path).unwrap();
            let end =
                run_reference(&problem, &schedule, &mut noise, h_ref, LevyTerms::Auto).unwrap();
            let factor = (0..schedule.len()).fold(1.0, |f, i| f * (1.0 + schedule.mark(i)[0]));
            assert!((end[0] - 0.4 * factor).abs() <= 1e-13);
            assert!((end[1] + 0.3 * factor).abs() <= 1e-13);
            if lambda == 0.0 {
                assert_eq!(end, vec![0.4, -0.3]);
            }
        }
    }
}

#[test]
fn reference_self_convergence_ratio() {
    let problem = ProblemId::OneDimAdditive.build(0.2).unwrap();
    let ratio = reference_ratio(&problem, 2f64.powi(-8), LevyTerms::Auto, 4, 100, 4).unwrap();
    assert!((1.5..=2.8).contains(&ratio), "{ratio}");
}

#[test]
fn coupled_adaptive_path_reproduces_reference() {
    let problem = ProblemId::OneDimAdditive
        .build(0.2)
        .unwrap()
        .with_intensity(0.0)
        .unwrap();
    let h = 2f64.powi(-8);
    let params = StepParams::new(h, 128.0, 1.0).unwrap().with_grid(h);
    for path in 0..20 {
        let schedule = path_schedule(&problem, 2, path).unwrap();
        let mut noise = coupled_source(&problem, &schedule, h, LevyTerms::Auto, 2, path).unwrap();
        let reference = run_reference(&problem, &schedule, &mut noise, h, LevyTerms::Auto).unwrap();
        let rec = simulate_path(
            &problem,
            &params,
            &MapPair::default(),
            &mut noise,
            &schedule,
            true,
        )
        .unwrap();
        assert!(rec.nodes.iter().all(|n| n.state_after_jump[0].abs() <= 1.0));
        assert!((rec.endpoint[0] - reference[0]).abs() <= 1e-10);
    }
}

#[test]
fn error_rows_are_consistent() {
    let mut cfg = small(ProblemId::OneDimAdditive);
    cfg.paths = 200;
    cfg.schemes = vec![Scheme::JaAmm];
    let table = convergence_experiment(&cfg, 4).unwrap();
    let mut inversions = 0;
    for pair in table.rows.windows(2) {
        let (a, b) = (
            pair[0].get(Scheme::JaAmm).unwrap(),
            pair[1].get(Scheme::JaAmm).unwrap(),
        );
        if a.rms_error >= b.rms_error {
            inversions += 1;
            assert!(a.rms_error - b.rms_error <= a.stderr.max(b.stderr));
        }
    }
    assert!(inversions <= 1);
    for row in &table.rows {
        // jump steps take time away from the non-jump steps, so h_mean may
        // exceed h_max by roughly the share of time they cover
        let h_min = row.h_max / cfg.rho;
        let slack = 1.0 + 2.0 * (row.mean_jumps + 1.0) * row.h_max;
        assert!(
            row.h_mean > h_min && row.h_mean <= row.h_max * slack,
            "{row:?}"
        );
        let r = row.get(Scheme::JaAmm).unwrap();
        assert!(r.rms_error >= 0.0 && r.stderr > 0.0);
    }
}

#[test]
fn doubling_paths_stays_within_the_error_band() {
    let mut cfg = small(ProblemId::OneDimMultiplicative);
    cfg.schemes = vec![Scheme::JaAmm, Scheme::JaTmil];
    let a = convergence_experiment(&cfg, 4).unwrap();
    cfg.paths *= 2;
    let b = convergence_experiment(&cfg, 4).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        for scheme in [Scheme::JaAmm, Scheme::JaTmil] {
            let (x, y) = (ra.get(scheme).unwrap(), rb.get(scheme).unwrap());
            assert!(
                (x.rms_error - y.rms_error).abs() <= 3.0 * x.stderr,
                "{x:?} {y:?}"
            );
        }
    }
}

#[test]
fn all_comparators_run_on_every_problem() {
    for id in ProblemId::ALL {
        let mut cfg = small(id);
        cfg.paths = 8;
        cfg.lambda = Some(3.0);
        let table = convergence_experiment(&cfg, 2).unwrap();
        assert_eq!(table.slopes.len(), 4);
        for row in &table.rows {
            assert_eq!(row.results.len(), 4);
            assert!(
                row.results.iter().all(|r| r.rms_error.is_finite()),
                "{id}: {row:?}"
            );
        }
    }
}

#[test]
fn efficiency_counts_and_timings() {
    let cfg = ExperimentConfig {
        mode: Mode::Efficiency,
        problem: ProblemId::OneDimMultiplicative,
        lambda: Some(4.0),
        ..small(ProblemId::OneDimMultiplicative)
    };
    let table = efficiency_experiment(&cfg, 2).unwrap();
    for row in &table.rows {
        let amm = row.get(Scheme::JaAmm).unwrap();
        assert!(amm.mean_steps <= cfg.rho / row.h_max + 4.0 * 3.0 + 1.0);
        for r in &row.results {
            assert!(r.cpu_seconds > 0.0);
        }
        for scheme in [Scheme::JaPmil, Scheme::JaSsbm, Scheme::JaTmil] {
            let expected = 1.0 / row.h_mean + 4.0;
            let got = row.get(scheme).unwrap().mean_steps;
            assert!(
                (got - expected).abs() <= 2.0,
                "{scheme}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn backstop_rows() {
    let cfg = ExperimentConfig {
        mode: Mode::Backstop,
        problem: ProblemId::OneDimMultiplicative,
        lambda: Some(0.0),
        paths: 50,
        ..small(ProblemId::OneDimMultiplicative)
    };
    let rows = backstop_experiment(&cfg, 2).unwrap();
    assert_eq!(rows.len(), cfg.rho_sweep.len() * cfg.h_max.len());
    assert!(rows
        .iter()
        .all(|r| r.jump_term == 0.0 && r.frequency >= r.norm_triggered_frequency));

    let lambda = ExperimentConfig {
        lambda: Some(2.0),
        ..cfg.clone()
    };
    let rows = backstop_experiment(&lambda, 2).unwrap();
    let r = &rows[0];
    assert!((r.jump_term - (1.0 - (-2.0 * r.h_max / r.rho).exp())).abs() < 1e-15);

    let bad = ExperimentConfig { kappa: 0.5, ..cfg };
    assert!(backstop_experiment(&bad, 1).is_err());
}

#[test]
fn high_intensity_path_completes() {
    let cfg = ExperimentConfig {
        problem: ProblemId::OneDimMultiplicative,
        lambda: Some(250.0),
        ..Default::default()
    };
    let (rec, schedule) = single_path(&cfg, 0).unwrap();
    assert_eq!(rec.jumps, schedule.len());
    assert!(schedule.len() > 150);
    let h_min = cfg.h_max[0] / cfg.rho;
    assert!(rec.steps <= (1.0 / h_min).ceil() as usize + 2 * schedule.len() + 2);
}
