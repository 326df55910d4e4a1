use jaam::config::{ExperimentConfig, Mode, Scheme};
use jaam::harness::efficiency_experiment;
use jaam_core::ProblemId;

#[test]
fn single_worker_timings_repeat() {
    let cfg = ExperimentConfig {
        mode: Mode::Efficiency,
        problem: ProblemId::OneDimMultiplicative,
        schemes: vec![Scheme::JaAmm, Scheme::JaTmil],
        h_max: vec![2f64.powi(-9)],
        paths: 300,
        ..Default::default()
    };
    // warm-up
    efficiency_experiment(&cfg, 1).unwrap();
    let totals: Vec<f64> = (0..3)
        .map(|_| {
            let t = efficiency_experiment(&cfg, 1).unwrap();
            t.rows[0].results.iter().map(|r| r.cpu_seconds).sum()
        })
        .collect();
    let mean = totals.iter().sum::<f64>() / 3.0;
    let sd = (totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    assert!(sd / mean < 0.2, "{totals:?}");
}
