//! Monte Carlo experiments.
//!
//! Every random quantity of path `m` comes from the streams of
//! `(seed, m)`, and per-path results are collected in path order before any
//! reduction, so tables do not depend on the worker count.
//!
//! Convergence runs couple all schemes to one fine Brownian path per
//! trajectory: a grid of spacing `h_ref` with the jump times inserted by
//! Brownian bridges. The reference solution is projected Milstein on that
//! grid. JA-AMM runs with its step ends rounded down to the grid; the
//! fixed-step comparators use `h_mean`, the mean non-jump step realised by
//! JA-AMM at the same `h_max`.

use std::time::Instant;

use jaam_core::maps::OneStepMap;
use jaam_core::rng::{path_stream, StreamTag};
use jaam_core::stepper::{simulate_fixed_step, simulate_path};
use jaam_core::{JumpSchedule, LevyTerms, PathRecord, ProblemId, Sjde, StepParams, WienerSource};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Scheme};
use crate::error::HarnessError;

/// Maps `f` over path indices `0..paths` on `workers` threads, keeping
/// path order.
pub fn run_paths<T, F>(workers: usize, paths: usize, f: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(u64) -> Result<T, HarnessError> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    pool.install(|| (0..paths as u64).into_par_iter().map(&f).collect())
}

fn abort(scheme: &'static str, path: u64) -> impl FnOnce(jaam_core::Error) -> HarnessError {
    move |source| HarnessError::Path {
        scheme,
        path,
        source,
    }
}

pub fn path_schedule<P: Sjde + ?Sized>(
    problem: &P,
    seed: u64,
    path: u64,
) -> Result<JumpSchedule, HarnessError> {
    let mut rng = path_stream(seed, path, StreamTag::Jumps);
    JumpSchedule::sample_for(problem, &mut rng).map_err(abort("schedule", path))
}

/// Fine-grid source of path `path` with the jump times registered. Lévy
/// areas are drawn only when the problem needs them.
pub fn coupled_source<P: Sjde + ?Sized>(
    problem: &P,
    schedule: &JumpSchedule,
    h_ref: f64,
    levy: LevyTerms,
    seed: u64,
    path: u64,
) -> Result<WienerSource, HarnessError> {
    let m = problem.drivers();
    let areas = problem.noise_class().needs_levy_area(m).then_some(levy);
    WienerSource::fine_grid_for_path(
        m,
        problem.horizon(),
        h_ref,
        schedule.times(),
        areas,
        seed,
        path,
    )
    .map_err(abort("noise", path))
}

/// Projected Milstein on the jump-adapted grid of spacing `h_ref`.
pub fn run_reference<P: Sjde + ?Sized>(
    problem: &P,
    schedule: &JumpSchedule,
    noise: &mut WienerSource,
    h_ref: f64,
    levy: LevyTerms,
) -> jaam_core::Result<Vec<f64>> {
    simulate_fixed_step(
        problem,
        h_ref,
        OneStepMap::projected(),
        noise,
        schedule,
        levy,
        false,
    )
    .map(|r| r.endpoint)
}

/// `mean |X(h) - X(h/2)| / mean |X(h/2) - X(h/4)|` for the reference
/// solver at `h = h_ref`; close to 2 for a first-order reference.
pub fn reference_ratio<P: Sjde + Sync + ?Sized>(
    problem: &P,
    h_ref: f64,
    levy: LevyTerms,
    seed: u64,
    paths: usize,
    workers: usize,
) -> Result<f64, HarnessError> {
    let diffs = run_paths(workers, paths, |path| {
        let schedule = path_schedule(problem, seed, path)?;
        let mut noise = coupled_source(problem, &schedule, h_ref / 4.0, levy, seed, path)?;
        let mut at = |h: f64| {
            run_reference(problem, &schedule, &mut noise, h, levy).map_err(abort("reference", path))
        };
        let (x1, x2, x4) = (at(h_ref)?, at(h_ref / 2.0)?, at(h_ref / 4.0)?);
        Ok((distance(&x1, &x2), distance(&x2, &x4)))
    })?;
    let coarse: f64 = diffs.iter().map(|d| d.0).sum();
    let fine: f64 = diffs.iter().map(|d| d.1).sum();
    Ok(coarse / fine)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Root mean square of `sqrt(sq)` and its delta-method standard error.
pub fn rms_with_stderr(squared: &[f64]) -> (f64, f64) {
    let n = squared.len() as f64;
    let mean = squared.iter().sum::<f64>() / n;
    let var = if squared.len() > 1 {
        squared.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let rms = mean.sqrt();
    let stderr = if rms > 0.0 {
        (var / n).sqrt() / (2.0 * rms)
    } else {
        0.0
    };
    (rms, stderr)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual.
    pub residual: f64,
}

/// Ordinary least squares line through `(x, y)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    LineFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeError {
    pub scheme: Scheme,
    pub rms_error: f64,
    pub stderr: f64,
    pub mean_steps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub h_max: f64,
    pub h_mean: f64,
    pub results: Vec<SchemeError>,
    /// Share of JA-AMM steps taken by the backstop map.
    pub backstop_frequency: f64,
    /// Share of JA-AMM steps that used the backstop only because a jump
    /// time or `T` cut them below `h_min`.
    pub truncated_backstop_frequency: f64,
    pub mean_jumps: f64,
}

impl ErrorRow {
    pub fn get(&self, scheme: Scheme) -> Option<&SchemeError> {
        self.results.iter().find(|r| r.scheme == scheme)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeSlope {
    pub scheme: Scheme,
    pub fit: LineFit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorTable {
    #[serde(serialize_with = "crate::config::as_str::serialize")]
    pub problem: ProblemId,
    pub paths: usize,
    pub rows: Vec<ErrorRow>,
    /// Fit of `log2 rms_error` against `log2 h_mean` per scheme.
    pub slopes: Vec<SchemeSlope>,
    pub reference_ratio: Option<f64>,
}

impl ErrorTable {
    pub fn slope(&self, scheme: Scheme) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.scheme == scheme)
            .map(|s| s.fit.slope)
    }
}

struct AmmSummary {
    endpoint: Vec<f64>,
    steps: usize,
    jumps: usize,
    backstop: usize,
    truncated_backstop: usize,
}

impl From<PathRecord> for AmmSummary {
    fn from(r: PathRecord) -> Self {
        AmmSummary {
            endpoint: r.endpoint,
            steps: r.steps,
            jumps: r.jumps,
            backstop: r.backstop_steps,
            truncated_backstop: r.truncated_backstop_steps,
        }
    }
}

fn h_mean(horizon: f64, runs: impl Iterator<Item = (usize, usize)>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (steps, jumps) in runs {
        sum += horizon / (steps - jumps).max(1) as f64;
        n += 1;
    }
    sum / n as f64
}

fn comparators(cfg: &ExperimentConfig) -> Vec<(Scheme, OneStepMap)> {
    cfg.schemes
        .iter()
        .filter_map(|s| s.fixed_map().map(|m| (*s, m)))
        .collect()
}

/// Strong endpoint errors against the coupled reference for every `h_max`
/// and scheme, with slope fits.
pub fn convergence_experiment(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<ErrorTable, HarnessError> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let horizon = problem.horizon();
    let levy = cfg.levy();
    let maps = cfg.maps();
    let params: Vec<StepParams> = cfg
        .h_max
        .iter()
        .map(|&h| cfg.step_params(h, cfg.rho).map(|p| p.with_grid(cfg.h_ref)))
        .collect::<Result<_, _>>()?;

    let first = run_paths(workers, cfg.paths, |path| {
        let schedule = path_schedule(&problem, cfg.seed, path)?;
        let mut noise = coupled_source(&problem, &schedule, cfg.h_ref, levy, cfg.seed, path)?;
        let reference = run_reference(&problem, &schedule, &mut noise, cfg.h_ref, levy)
            .map_err(abort("reference", path))?;
        let amm = params
            .iter()
            .map(|p| {
                simulate_path(&problem, p, &maps, &mut noise, &schedule, false)
                    .map(AmmSummary::from)
                    .map_err(abort(Scheme::JaAmm.id(), path))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((reference, amm))
    })?;

    let h_means: Vec<f64> = (0..params.len())
        .map(|k| h_mean(horizon, first.iter().map(|(_, a)| (a[k].steps, a[k].jumps))))
        .collect();

    let fixed = comparators(cfg);
    // endpoints[path][k][comparator]
    let endpoints = if fixed.is_empty() {
        Vec::new()
    } else {
        run_paths(workers, cfg.paths, |path| {
            let schedule = path_schedule(&problem, cfg.seed, path)?;
            let mut noise = coupled_source(&problem, &schedule, cfg.h_ref, levy, cfg.seed, path)?;
            let mut per_h = Vec::with_capacity(h_means.len());
            for &h in &h_means {
                let mut per_scheme = Vec::with_capacity(fixed.len());
                for (scheme, map) in &fixed {
                    let rec =
                        simulate_fixed_step(&problem, h, *map, &mut noise, &schedule, levy, false)
                            .map_err(abort(scheme.id(), path))?;
                    per_scheme.push((rec.endpoint, rec.steps));
                }
                per_h.push(per_scheme);
            }
            Ok(per_h)
        })?
    };

    let m = cfg.paths as f64;
    let mut rows = Vec::with_capacity(params.len());
    for (k, p) in params.iter().enumerate() {
        let mut results = Vec::with_capacity(cfg.schemes.len());
        for &scheme in &cfg.schemes {
            let (squared, steps): (Vec<f64>, Vec<usize>) =
                match fixed.iter().position(|(s, _)| *s == scheme) {
                    None => first
                        .iter()
                        .map(|(r, a)| (squared_distance(&a[k].endpoint, r), a[k].steps))
                        .unzip(),
                    Some(i) => first
                        .iter()
                        .zip(&endpoints)
                        .map(|((r, _), e)| (squared_distance(&e[k][i].0, r), e[k][i].1))
                        .unzip(),
                };
            let (rms_error, stderr) = rms_with_stderr(&squared);
            results.push(SchemeError {
                scheme,
                rms_error,
                stderr,
                mean_steps: steps.iter().sum::<usize>() as f64 / m,
            });
        }
        let total = |f: &dyn Fn(&AmmSummary) -> usize| {
            first.iter().map(|(_, a)| f(&a[k])).sum::<usize>() as f64
        };
        let steps = total(&|a| a.steps);
        rows.push(ErrorRow {
            h_max: p.h_max,
            h_mean: h_means[k],
            results,
            backstop_frequency: total(&|a| a.backstop) / steps,
            truncated_backstop_frequency: total(&|a| a.truncated_backstop) / steps,
            mean_jumps: total(&|a| a.jumps) / m,
        });
    }

    let slopes = cfg
        .schemes
        .iter()
        .map(|&scheme| {
            let x: Vec<f64> = rows.iter().map(|r| r.h_mean.log2()).collect();
            let y: Vec<f64> = rows
                .iter()
                .map(|r| r.get(scheme).unwrap().rms_error.log2())
                .collect();
            SchemeSlope {
                scheme,
                fit: least_squares(&x, &y),
            }
        })
        .collect();

    let reference_ratio = if cfg.reference_check_paths > 0 {
        Some(reference_ratio(
            &problem,
            cfg.h_ref,
            levy,
            cfg.seed,
            cfg.reference_check_paths,
            workers,
        )?)
    } else {
        None
    };

    Ok(ErrorTable {
        problem: cfg.problem,
        paths: cfg.paths,
        rows,
        slopes,
        reference_ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeTiming {
    pub scheme: Scheme,
    /// Mean seconds of stepping per path.
    pub cpu_seconds: f64,
    pub mean_steps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub h_max: f64,
    pub h_mean: f64,
    pub results: Vec<SchemeTiming>,
}

impl TimingRow {
    pub fn get(&self, scheme: Scheme) -> Option<&SchemeTiming> {
        self.results.iter().find(|r| r.scheme == scheme)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingTable {
    #[serde(serialize_with = "crate::config::as_str::serialize")]
    pub problem: ProblemId,
    pub paths: usize,
    pub rows: Vec<TimingRow>,
}

/// Mean stepping time per path for every scheme, each on its own
/// independent noise. No reference solution is computed.
pub fn efficiency_experiment(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<TimingTable, HarnessError> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let horizon = problem.horizon();
    let drivers = problem.drivers();
    let levy = cfg.levy();
    let maps = cfg.maps();
    let fixed = comparators(cfg);
    let m = cfg.paths;
    let mut rows = Vec::with_capacity(cfg.h_max.len());
    for &h_max in &cfg.h_max {
        let params = cfg.step_params(h_max, cfg.rho)?;
        let amm = run_paths(workers, m, |path| {
            let schedule = path_schedule(&problem, cfg.seed, path)?;
            let mut noise = WienerSource::on_demand_for_path(drivers, horizon, cfg.seed, path);
            let start = Instant::now();
            let rec = simulate_path(&problem, &params, &maps, &mut noise, &schedule, false)
                .map_err(abort(Scheme::JaAmm.id(), path))?;
            Ok((start.elapsed().as_secs_f64(), rec.steps, rec.jumps))
        })?;
        let h_mean = h_mean(horizon, amm.iter().map(|a| (a.1, a.2)));
        let summarize = |scheme, runs: &[(f64, usize)]| SchemeTiming {
            scheme,
            cpu_seconds: runs.iter().map(|r| r.0).sum::<f64>() / m as f64,
            mean_steps: runs.iter().map(|r| r.1).sum::<usize>() as f64 / m as f64,
        };
        let mut results = Vec::with_capacity(cfg.schemes.len());
        for &scheme in &cfg.schemes {
            let runs: Vec<(f64, usize)> = match fixed.iter().position(|(s, _)| *s == scheme) {
                None => amm.iter().map(|a| (a.0, a.1)).collect(),
                Some(i) => {
                    let map = fixed[i].1;
                    let offset = (i as u64 + 1) * m as u64;
                    run_paths(workers, m, |path| {
                        let index = offset + path;
                        let schedule = path_schedule(&problem, cfg.seed, index)?;
                        let mut noise =
                            WienerSource::on_demand_for_path(drivers, horizon, cfg.seed, index);
                        let start = Instant::now();
                        let rec = simulate_fixed_step(
                            &problem, h_mean, map, &mut noise, &schedule, levy, false,
                        )
                        .map_err(abort(scheme.id(), index))?;
                        Ok((start.elapsed().as_secs_f64(), rec.steps))
                    })?
                }
            };
            results.push(summarize(scheme, &runs));
        }
        rows.push(TimingRow {
            h_max,
            h_mean,
            results,
        });
    }
    Ok(TimingTable {
        problem: cfg.problem,
        paths: m,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BackstopRow {
    pub rho: f64,
    pub h_max: f64,
    /// Share of all steps taken by the backstop map.
    pub frequency: f64,
    /// Share of steps whose adaptive candidate collapsed to `h_min`.
    pub norm_triggered_frequency: f64,
    /// Share of steps cut below `h_min` by a jump time or `T`.
    pub truncated_frequency: f64,
    /// `1 - exp(-lambda h_max / rho)`.
    pub jump_term: f64,
    pub mean_steps: f64,
}

/// Step-level backstop frequency of JA-AMM for every `(rho, h_max)` pair.
/// Paths share seeds across `rho`, so the rows are paired samples.
pub fn backstop_experiment(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<Vec<BackstopRow>, HarnessError> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let horizon = problem.horizon();
    let lambda = problem.intensity();
    let maps = cfg.maps();
    let mut rows = Vec::new();
    for &rho in &cfg.rho_sweep {
        for &h_max in &cfg.h_max {
            let params = cfg.step_params(h_max, rho)?;
            let runs = run_paths(workers, cfg.paths, |path| {
                let schedule = path_schedule(&problem, cfg.seed, path)?;
                let mut noise =
                    WienerSource::on_demand_for_path(problem.drivers(), horizon, cfg.seed, path);
                let rec = simulate_path(&problem, &params, &maps, &mut noise, &schedule, false)
                    .map_err(abort(Scheme::JaAmm.id(), path))?;
                Ok((rec.steps, rec.backstop_steps, rec.truncated_backstop_steps))
            })?;
            let steps = runs.iter().map(|r| r.0).sum::<usize>() as f64;
            let backstop = runs.iter().map(|r| r.1).sum::<usize>() as f64;
            let truncated = runs.iter().map(|r| r.2).sum::<usize>() as f64;
            rows.push(BackstopRow {
                rho,
                h_max,
                frequency: backstop / steps,
                norm_triggered_frequency: (backstop - truncated) / steps,
                truncated_frequency: truncated / steps,
                jump_term: -(-lambda * h_max / rho).exp_m1(),
                mean_steps: steps / cfg.paths as f64,
            });
        }
    }
    Ok(rows)
}

/// One recorded JA-AMM path at the first `h_max`, on standalone noise.
pub fn single_path(
    cfg: &ExperimentConfig,
    path: u64,
) -> Result<(PathRecord, JumpSchedule), HarnessError> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let params = cfg.step_params(cfg.h_max[0], cfg.rho)?;
    let schedule = path_schedule(&problem, cfg.seed, path)?;
    let mut noise =
        WienerSource::on_demand_for_path(problem.drivers(), problem.horizon(), cfg.seed, path);
    let rec = simulate_path(&problem, &params, &cfg.maps(), &mut noise, &schedule, true)
        .map_err(abort(Scheme::JaAmm.id(), path))?;
    Ok((rec, schedule))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let fit = least_squares(&x, &y);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn rms_of_constant_errors() {
        let (rms, se) = rms_with_stderr(&[4.0; 10]);
        assert_eq!(rms, 2.0);
        assert_eq!(se, 0.0);
        assert_eq!(rms_with_stderr(&[0.0, 0.0]), (0.0, 0.0));
    }

    #[test]
    fn h_mean_excludes_jump_steps() {
        assert_eq!(
            h_mean(1.0, [(10, 2), (5, 1)].into_iter()),
            (1.0 / 8.0 + 1.0 / 4.0) / 2.0
        );
    }

    #[test]
    fn pool_preserves_order() {
        let out = run_paths(4, 100, |p| Ok(p * 2)).unwrap();
        assert_eq!(out, (0..100).map(|p| p * 2).collect::<Vec<u64>>());
    }
}
