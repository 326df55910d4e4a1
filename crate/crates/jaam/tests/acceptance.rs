//! Acceptance criteria. Each test writes one `criterion N ... PASS|FAIL`
//! line straight to stderr so it shows up even when output is captured.

use std::io::Write;

use jaam::config::{pow2_range, ExperimentConfig, Mode, Scheme};
use jaam::harness::{
    backstop_experiment, convergence_experiment, coupled_source, least_squares, path_schedule,
    run_reference,
};
use jaam::output::write_errors;
use jaam_core::maps::milstein;
use jaam_core::model::{make_2d, PureJump, TwoDimNoise};
use jaam_core::noise::levy::sample_levy_areas;
use jaam_core::stepper::simulate_path;
use jaam_core::{
    IteratedIntegrals, LevyTerms, MapPair, NoiseClass, ProblemId, Sjde, StepParams, WienerSource,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(n: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n:>2} [{name}]: {verdict} ({detail})\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn amm_only(
    problem: ProblemId,
    lambda: f64,
    paths: usize,
    h_max: Vec<f64>,
    h_ref: f64,
) -> ExperimentConfig {
    ExperimentConfig {
        problem,
        sigma: 0.2,
        lambda: Some(lambda),
        schemes: vec![Scheme::JaAmm],
        h_max,
        rho: 128.0,
        kappa: 1.0,
        paths,
        h_ref,
        seed: 2024,
        ..Default::default()
    }
}

#[test]
fn criterion_01_order_one_additive() {
    let cfg = amm_only(
        ProblemId::OneDimAdditive,
        2.0,
        200,
        pow2_range(-9, -5),
        2f64.powi(-14),
    );
    let table = convergence_experiment(&cfg, workers()).unwrap();
    let slope = table.slope(Scheme::JaAmm).unwrap();
    report(
        1,
        "order-one convergence, 1d-add",
        (0.8..=1.2).contains(&slope),
        format!("slope {slope:.4}"),
    );
}

#[test]
fn criterion_02_order_one_multiplicative() {
    let cfg = amm_only(
        ProblemId::OneDimMultiplicative,
        2.0,
        200,
        pow2_range(-9, -5),
        2f64.powi(-14),
    );
    let table = convergence_experiment(&cfg, workers()).unwrap();
    let slope = table.slope(Scheme::JaAmm).unwrap();
    report(
        2,
        "order-one convergence, 1d-mult",
        (0.75..=1.25).contains(&slope),
        format!("slope {slope:.4}"),
    );
}

#[test]
fn criterion_03_jump_intensity_robustness() {
    let mut pass = true;
    let mut detail = Vec::new();
    for lambda in [10.0, 50.0] {
        let cfg = amm_only(
            ProblemId::OneDimMultiplicative,
            lambda,
            100,
            pow2_range(-8, -5),
            2f64.powi(-13),
        );
        let table = convergence_experiment(&cfg, workers()).unwrap();
        let slope = table.slope(Scheme::JaAmm).unwrap();
        let smallest = table
            .rows
            .first()
            .unwrap()
            .get(Scheme::JaAmm)
            .unwrap()
            .rms_error;
        let largest = table
            .rows
            .last()
            .unwrap()
            .get(Scheme::JaAmm)
            .unwrap()
            .rms_error;
        pass &= (0.7..=1.3).contains(&slope) && smallest.is_finite() && smallest < largest;
        detail.push(format!(
            "lambda {lambda}: slope {slope:.4}, rms {smallest:.3e} < {largest:.3e}"
        ));
    }
    report(3, "jump-intensity robustness", pass, detail.join("; "));
}

#[test]
fn criterion_04_pure_jump_exactness() {
    let problem = PureJump::new(vec![0.5], 5.0, 1.0).unwrap();
    let params = StepParams::new(2f64.powi(-6), 128.0, 1.0).unwrap();
    let h_ref = 2f64.powi(-10);
    let mut worst: f64 = 0.0;
    for path in 0..1000 {
        let schedule = path_schedule(&problem, 7, path).unwrap();
        let exact = (0..schedule.len()).fold(0.5, |x, i| x * (1.0 + schedule.mark(i)[0]));
        let mut noise = WienerSource::on_demand_for_path(1, 1.0, 7, path);
        let adaptive = simulate_path(
            &problem,
            &params,
            &MapPair::default(),
            &mut noise,
            &schedule,
            false,
        )
        .unwrap();
        let mut coupled =
            coupled_source(&problem, &schedule, h_ref, LevyTerms::Auto, 7, path).unwrap();
        let reference =
            run_reference(&problem, &schedule, &mut coupled, h_ref, LevyTerms::Auto).unwrap();
        for y in [adaptive.endpoint[0], reference[0]] {
            worst = worst.max((y - exact).abs() / exact.abs());
        }
    }
    report(
        4,
        "pure-jump exactness",
        worst <= 1e-12,
        format!("max relative error {worst:.3e}"),
    );
}

/// Adaptive Milstein for `dX = (X - 3X^3) dt + s(1 - X^2) dW`, written
/// out by hand.
fn plain_adaptive_milstein(sigma: f64, h_max: f64, rho: f64, noise: &mut WienerSource) -> f64 {
    let h_min = h_max / rho;
    let (mut t, mut y) = (0.0f64, 0.5f64);
    while t < 1.0 {
        let h = (h_max / y.abs()).clamp(h_min, h_max);
        let t_next = (t + h).min(1.0);
        let h = t_next - t;
        let dw = noise.increment(t, t_next).unwrap()[0];
        let g = sigma * (1.0 - y * y);
        let dg = -2.0 * sigma * y;
        y = y + h * (y - 3.0 * y * y * y) + g * dw + 0.5 * dg * g * (dw * dw - h);
        t = t_next;
    }
    y
}

#[test]
fn criterion_05_no_jump_reduction() {
    let problem = ProblemId::OneDimMultiplicative
        .build(0.2)
        .unwrap()
        .with_intensity(0.0)
        .unwrap();
    let params = StepParams::new(2f64.powi(-6), 128.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for path in 0..100 {
        let schedule = path_schedule(&problem, 5, path).unwrap();
        assert!(schedule.is_empty());
        let mut noise = WienerSource::on_demand_for_path(1, 1.0, 5, path);
        let rec = simulate_path(
            &problem,
            &params,
            &MapPair::default(),
            &mut noise,
            &schedule,
            false,
        )
        .unwrap();
        let mut same = WienerSource::on_demand_for_path(1, 1.0, 5, path);
        let oracle = plain_adaptive_milstein(0.2, params.h_max, params.rho, &mut same);
        worst = worst.max((rec.endpoint[0] - oracle).abs());
    }
    report(
        5,
        "no-jump reduction",
        worst <= 1e-12,
        format!("max difference {worst:.3e}"),
    );
}

#[test]
fn criterion_06_one_step_consistency() {
    let sigma = 0.2;
    let problem = ProblemId::OneDimMultiplicative.build(sigma).unwrap();
    let x0 = 0.5;
    let fine_steps = 64;
    let samples = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut log_h = Vec::new();
    let mut log_err = Vec::new();
    for e in 6..=10 {
        let h = 2f64.powi(-e);
        let dt = h / fine_steps as f64;
        let sdt = dt.sqrt();
        let mut mse = 0.0;
        for _ in 0..samples {
            let (mut x, mut dw) = (x0, 0.0);
            for _ in 0..fine_steps {
                let d = sdt * normal(&mut rng);
                let g = sigma * (1.0 - x * x);
                x += dt * (x - 3.0 * x * x * x) + g * d - sigma * x * g * (d * d - dt);
                dw += d;
            }
            let y = milstein(
                &problem,
                &[x0],
                h,
                &IteratedIntegrals::symmetric(h, vec![dw]),
            )[0];
            mse += (x - y) * (x - y);
        }
        log_h.push(h.log2());
        log_err.push((mse / samples as f64).log2());
    }
    let exponent = least_squares(&log_h, &log_err).slope;
    report(
        6,
        "one-step mean-square consistency",
        exponent >= 2.7,
        format!("exponent {exponent:.4}"),
    );
}

#[test]
fn criterion_07_backstop_probability() {
    let base = ExperimentConfig {
        mode: Mode::Backstop,
        problem: ProblemId::OneDimMultiplicative,
        lambda: Some(2.0),
        h_max: vec![2f64.powi(-5)],
        rho_sweep: vec![8.0, 128.0],
        paths: 1000,
        seed: 77,
        ..Default::default()
    };
    let rows = backstop_experiment(&base, workers()).unwrap();
    let (low, high) = (rows[0].frequency, rows[1].frequency);

    let quiet = ExperimentConfig {
        problem: ProblemId::OneDimAdditive,
        sigma: 0.05,
        lambda: Some(0.0),
        rho_sweep: vec![128.0],
        ..base
    };
    let rows = backstop_experiment(&quiet, workers()).unwrap();
    let calm = rows[0].frequency;
    report(
        7,
        "backstop probability",
        high <= low && calm < 0.01 && rows[0].jump_term == 0.0,
        format!("rho 8: {low:.4e}, rho 128: {high:.4e}, lambda 0: {calm:.4e}"),
    );
}

/// Area `(1/2) int (W_1 dW_2 - W_2 dW_1)` of a random walk with `n` steps
/// over `[0, h]`.
fn riemann_area(rng: &mut ChaCha8Rng, h: f64, n: usize) -> f64 {
    let s = (h / n as f64).sqrt();
    let (mut w1, mut w2, mut area) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let d1 = s * normal(rng);
        let d2 = s * normal(rng);
        area += 0.5 * (w1 * d2 - w2 * d1);
        w1 += d1;
        w2 += d2;
    }
    area
}

#[test]
fn criterion_08_iterated_integral_identities() {
    let mut noise = WienerSource::on_demand_for_path(2, 1e9, 88, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000_000 {
        let h = rng.random_range(1e-4..0.5);
        let ii = noise
            .sample_iterated(0.0, h, NoiseClass::NonCommutative, LevyTerms::Fixed(4))
            .unwrap();
        for i in 0..2 {
            worst = worst.max((ii.get(i, i) - (ii.dw[i] * ii.dw[i] - h) / 2.0).abs());
        }
        worst = worst.max((ii.get(0, 1) + ii.get(1, 0) - ii.dw[0] * ii.dw[1]).abs());
    }

    let h = 1.0;
    let samples = 100_000;
    let mut oracle_rng = ChaCha8Rng::seed_from_u64(89);
    let oracle = (0..samples)
        .map(|_| riemann_area(&mut oracle_rng, h, 200).powi(2))
        .sum::<f64>()
        / samples as f64;
    let mut area_rng = ChaCha8Rng::seed_from_u64(90);
    let sampled = (0..samples)
        .map(|_| {
            let dw = [normal(&mut area_rng), normal(&mut area_rng)];
            sample_levy_areas(&mut area_rng, h, &dw, 50)[0].powi(2)
        })
        .sum::<f64>()
        / samples as f64;
    let rel = (sampled - oracle).abs() / oracle;
    report(
        8,
        "iterated-integral identities",
        worst <= 1e-15 && rel <= 0.05,
        format!("identity residual {worst:.3e}, area variance {sampled:.4} vs oracle {oracle:.4} ({:.2}%)", rel * 100.0),
    );
}

#[test]
fn criterion_09_mesh_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = Vec::new();
    let configs = 10_000;
    for c in 0..configs {
        let id = ProblemId::ALL[rng.random_range(0..5)];
        let lambda = rng.random_range(0.0..50.0);
        let problem = id.build(0.2).unwrap().with_intensity(lambda).unwrap();
        let h_max = 2f64.powi(-rng.random_range(2..8));
        let rho = 2f64.powi(rng.random_range(1..8));
        let kappa = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let mut params = StepParams::new(h_max, rho, kappa).unwrap();
        let schedule = path_schedule(&problem, 9, c).unwrap();
        let mut noise = if rng.random_bool(0.25) {
            let h_ref = 2f64.powi(-10);
            params = params.with_grid(h_ref);
            coupled_source(&problem, &schedule, h_ref, LevyTerms::Auto, 9, c).unwrap()
        } else {
            WienerSource::on_demand_for_path(problem.drivers(), 1.0, 9, c)
        };
        let rec = match simulate_path(
            &problem,
            &params,
            &MapPair::default(),
            &mut noise,
            &schedule,
            true,
        ) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("config {c}: {e}"));
                continue;
            }
        };
        let total: f64 = rec.nodes.iter().map(|n| n.h_used).sum();
        let nodes: Vec<f64> = rec.nodes.iter().map(|n| n.t_next).collect();
        let ok = (total - 1.0).abs() <= 1e-12
            && nodes.last() == Some(&1.0)
            && rec
                .nodes
                .iter()
                .all(|n| n.h_used > 0.0 && n.h_used <= h_max)
            && schedule.times().iter().all(|tau| nodes.contains(tau))
            && rec.jumps == schedule.len();
        if !ok {
            failures.push(format!(
                "config {c}: {id} lambda {lambda:.2} h_max {h_max} rho {rho} kappa {kappa}"
            ));
        }
    }
    report(
        9,
        "mesh invariants",
        failures.is_empty(),
        format!(
            "{configs} configurations, {} failures {:?}",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_10_commutative_invariance() {
    let g2 = make_2d(TwoDimNoise::G2, 0.2).unwrap();
    let g3 = make_2d(TwoDimNoise::G3, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut g2_worst: f64 = 0.0;
    let mut g3_changed = 0;
    let steps = 10_000;
    for _ in 0..steps {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let h: f64 = rng.random_range(1e-4..0.1);
        let dw = vec![h.sqrt() * normal(&mut rng), h.sqrt() * normal(&mut rng)];
        let area = h * normal(&mut rng) / 2.0;
        let ii = IteratedIntegrals::with_areas(h, dw, &[area]);
        let flipped = ii.with_areas_negated();
        let a = milstein(&g2, &x, h, &ii);
        let b = milstein(&g2, &x, h, &flipped);
        g2_worst = g2_worst.max(
            a.iter()
                .zip(&b)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max),
        );
        let a = milstein(&g3, &x, h, &ii);
        let b = milstein(&g3, &x, h, &flipped);
        if a.iter().zip(&b).any(|(u, v)| (u - v).abs() > 1e-10) {
            g3_changed += 1;
        }
    }
    let share = g3_changed as f64 / steps as f64;
    report(
        10,
        "commutative invariance",
        g2_worst <= 1e-12 && share > 0.99,
        format!(
            "G2 max change {g2_worst:.3e}, G3 changed on {:.2}% of steps",
            share * 100.0
        ),
    );
}

#[test]
fn criterion_11_determinism_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    for (k, problem) in [ProblemId::OneDimMultiplicative, ProblemId::TwoDimG3]
        .into_iter()
        .enumerate()
    {
        let cfg = ExperimentConfig {
            problem,
            lambda: Some(5.0),
            h_max: pow2_range(-6, -3),
            h_ref: 2f64.powi(-10),
            paths: 40,
            seed: 11,
            ..Default::default()
        };
        let mut bytes = Vec::new();
        for workers in [1, 8] {
            let table = convergence_experiment(&cfg, workers).unwrap();
            let path = dir.path().join(format!("errors-{k}-{workers}.csv"));
            write_errors(&table, &path).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        identical &= bytes[0] == bytes[1] && !bytes[0].is_empty();
    }
    report(
        11,
        "determinism across worker counts",
        identical,
        "errors.csv for 1 and 8 workers".into(),
    );
}
