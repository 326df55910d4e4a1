//! Jump-adapted adaptive mesh and the main/backstop stepping loop.
//!
//! From a node `(t_n, Y_n)` the next step is
//!
//! ```text
//! h_{n+1} = max(h_min, min(h_max, h_max / |Y_n|^{1/kappa}))  ^  (tau_next - t_n)  ^  (T - t_n)
//! ```
//!
//! with `h_min = h_max / rho`. The main map is used while the adaptive
//! candidate stays above `h_min`, which keeps `|Y_n| < rho^kappa` on every
//! main step; otherwise the backstop map takes the step. When the step ends
//! on a jump time the jump `gamma(zeta, Y-)` is added to the pre-jump state.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm};
use crate::maps::OneStepMap;
use crate::model::Sjde;
use crate::noise::{JumpSchedule, LevyTerms, WienerSource};

/// Which short steps go to the backstop map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BackstopRule {
    /// Any step shorter than `h_min` (including ones cut short by a jump time
    /// or by `T`) uses the backstop, as does every step whose adaptive
    /// candidate was clamped to `h_min`.
    #[default]
    Literal,
    /// Only steps whose adaptive candidate was clamped to `h_min` use the
    /// backstop.
    NormOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepParams {
    pub h_max: f64,
    pub rho: f64,
    pub kappa: f64,
    /// Reference-grid spacing. When set, adaptive step ends are rounded
    /// down onto this grid so that only jump times (and `T`) are off-grid.
    pub grid: Option<f64>,
    pub backstop_rule: BackstopRule,
    pub levy_terms: LevyTerms,
}

impl StepParams {
    pub fn new(h_max: f64, rho: f64, kappa: f64) -> Result<Self> {
        if !(h_max > 0.0 && h_max <= 1.0) {
            return Err(Error::param("h_max", "must lie in (0, 1]"));
        }
        if !(rho > 1.0 && rho.is_finite()) {
            return Err(Error::param("rho", "must be finite and greater than 1"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", "must be positive"));
        }
        Ok(StepParams {
            h_max,
            rho,
            kappa,
            grid: None,
            backstop_rule: BackstopRule::Literal,
            levy_terms: LevyTerms::Auto,
        })
    }

    pub fn with_grid(mut self, spacing: f64) -> Self {
        self.grid = Some(spacing);
        self
    }

    pub fn with_backstop_rule(mut self, rule: BackstopRule) -> Self {
        self.backstop_rule = rule;
        self
    }

    pub fn with_levy_terms(mut self, terms: LevyTerms) -> Self {
        self.levy_terms = terms;
        self
    }

    pub fn h_min(&self) -> f64 {
        self.h_max / self.rho
    }

    /// `R = rho^kappa`: main-map steps start from states with `|Y| < R`.
    pub fn path_bound(&self) -> f64 {
        libm::pow(self.rho, self.kappa)
    }
}

/// The next node chosen by [`propose_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proposal {
    pub t_next: f64,
    pub h: f64,
    pub use_backstop: bool,
    /// The adaptive candidate `h_max / |y|^{1/kappa}` was at or below `h_min`.
    pub norm_triggered: bool,
    /// The step is shorter than the clamped adaptive candidate (jump time,
    /// final time or grid rounding).
    pub truncated: bool,
    pub hits_jump: bool,
}

/// Chooses the next node from state `y` at time `t < horizon`.
pub fn propose_step(
    y: &[f64],
    t: f64,
    params: &StepParams,
    next_jump: Option<f64>,
    horizon: f64,
) -> Proposal {
    let h_max = params.h_max;
    let h_min = params.h_min();
    let r = norm(y);
    let raw = if r > 0.0 {
        h_max / libm::pow(r, 1.0 / params.kappa)
    } else {
        f64::INFINITY
    };
    // NaN states fall through to the backstop.
    let norm_triggered = !(raw > h_min);
    let h_adapt = if norm_triggered {
        h_min
    } else {
        raw.min(h_max)
    };
    let mut adaptive_end = t + h_adapt;
    // keep the realized step `adaptive_end - t` within `h_adapt`
    while adaptive_end - t > h_adapt {
        adaptive_end = adaptive_end.next_down();
    }

    let mut t_next = adaptive_end;
    if let Some(q) = params.grid {
        let mut k = libm::floor(adaptive_end / q);
        if (k + 1.0) * q <= adaptive_end {
            k += 1.0;
        }
        if k * q > adaptive_end {
            k -= 1.0;
        }
        let snapped = k * q;
        if snapped - t > 1e-9 * q {
            t_next = snapped;
        }
    }
    if t_next >= horizon {
        t_next = horizon;
    }
    let mut hits_jump = false;
    if let Some(tau) = next_jump {
        if tau <= t_next {
            t_next = tau;
            hits_jump = true;
        }
    }
    let truncated = t_next < adaptive_end;
    let h = t_next - t;
    let use_backstop =
        norm_triggered || (params.backstop_rule == BackstopRule::Literal && truncated && h < h_min);
    Proposal {
        t_next,
        h,
        use_backstop,
        norm_triggered,
        truncated,
        hits_jump,
    }
}

/// Main and backstop maps of the hybrid scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapPair {
    pub main: OneStepMap,
    pub backstop: OneStepMap,
}

impl Default for MapPair {
    /// Milstein main map with the projected Milstein backstop.
    fn default() -> Self {
        MapPair {
            main: OneStepMap::milstein(),
            backstop: OneStepMap::projected(),
        }
    }
}

impl MapPair {
    /// The same map for every step (fixed-step schemes).
    pub fn single(map: OneStepMap) -> Self {
        MapPair {
            main: map,
            backstop: map,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub t_next: f64,
    pub state_before_jump: Vec<f64>,
    pub state_after_jump: Vec<f64>,
    pub h_used: f64,
    pub used_backstop: bool,
    pub jump_applied: bool,
    pub truncated: bool,
}

/// Takes one step from `(t, y)` to `t_next`. If `t_next` is a jump time of
/// `schedule` the jump is applied to the pre-jump state.
#[allow(clippy::too_many_arguments)]
pub fn advance<P: Sjde + ?Sized>(
    problem: &P,
    y: &[f64],
    t: f64,
    t_next: f64,
    use_backstop: bool,
    noise: &mut WienerSource,
    schedule: &JumpSchedule,
    maps: &MapPair,
    levy: LevyTerms,
) -> Result<StepOutcome> {
    let wrap = |e: Error| Error::Step {
        t,
        source: Box::new(e),
    };
    let h = t_next - t;
    if !(h > 0.0) {
        return Err(wrap(Error::InvalidInterval {
            start: t,
            end: t_next,
        }));
    }
    let ii = noise
        .sample_iterated(t, t_next, problem.noise_class(), levy)
        .map_err(wrap)?;
    let map = if use_backstop {
        &maps.backstop
    } else {
        &maps.main
    };
    let before = map.apply(problem, y, h, &ii).map_err(wrap)?;
    let (after, jump_applied) = match schedule.index_at(t_next) {
        Some(index) => {
            let mut gamma = alloc::vec![0.0; before.len()];
            problem.jump_coeff(schedule.mark(index), &before, &mut gamma);
            let after = before.iter().zip(&gamma).map(|(b, g)| b + g).collect();
            (after, true)
        }
        None => (before.clone(), false),
    };
    if !all_finite(&after) {
        return Err(Error::NonFinite { t: t_next });
    }
    Ok(StepOutcome {
        t_next,
        state_before_jump: before,
        state_after_jump: after,
        h_used: h,
        used_backstop: use_backstop,
        jump_applied,
        truncated: false,
    })
}

/// A completed trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathRecord {
    /// Every step, in order (empty unless recording was requested).
    pub nodes: Vec<StepOutcome>,
    pub endpoint: Vec<f64>,
    /// Total steps `N`.
    pub steps: usize,
    /// Jumps applied, `N-bar`.
    pub jumps: usize,
    pub backstop_steps: usize,
    /// Backstop steps that were not triggered by the state norm.
    pub truncated_backstop_steps: usize,
}

impl PathRecord {
    pub fn non_jump_steps(&self) -> usize {
        self.steps - self.jumps
    }
}

/// Upper bound on the number of steps of an adaptive path.
pub fn step_limit(horizon: f64, h_min: f64, jumps: usize) -> usize {
    libm::ceil(horizon / h_min) as usize + 2 * jumps + 2
}

/// Runs the jump-adapted adaptive scheme from `(0, X0)` to `T`.
pub fn simulate_path<P: Sjde + ?Sized>(
    problem: &P,
    params: &StepParams,
    maps: &MapPair,
    noise: &mut WienerSource,
    schedule: &JumpSchedule,
    record: bool,
) -> Result<PathRecord> {
    let horizon = problem.horizon();
    let limit = step_limit(horizon, params.h_min(), schedule.len());
    let mut rec = PathRecord::default();
    let mut y = problem.initial_state().to_vec();
    let mut t = 0.0;
    while t < horizon {
        if rec.steps >= limit {
            return Err(Error::StepLimit { limit, t });
        }
        let prop = propose_step(&y, t, params, schedule.next_after(t), horizon);
        let mut out = advance(
            problem,
            &y,
            t,
            prop.t_next,
            prop.use_backstop,
            noise,
            schedule,
            maps,
            params.levy_terms,
        )?;
        out.truncated = prop.truncated;
        rec.steps += 1;
        rec.jumps += out.jump_applied as usize;
        if prop.use_backstop {
            rec.backstop_steps += 1;
            if !prop.norm_triggered {
                rec.truncated_backstop_steps += 1;
            }
        }
        t = out.t_next;
        y.clone_from(&out.state_after_jump);
        if record {
            rec.nodes.push(out);
        }
    }
    rec.endpoint = y;
    Ok(rec)
}

/// Jump-adapted fixed-step march: nodes are the multiples of `h` below `T`,
/// every jump time, and `T`. Every step uses `map`.
pub fn simulate_fixed_step<P: Sjde + ?Sized>(
    problem: &P,
    h: f64,
    map: OneStepMap,
    noise: &mut WienerSource,
    schedule: &JumpSchedule,
    levy: LevyTerms,
    record: bool,
) -> Result<PathRecord> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("h", "must be positive and finite"));
    }
    let horizon = problem.horizon();
    let maps = MapPair::single(map);
    let limit = libm::ceil(horizon / h) as usize + schedule.len() + 2;
    let mut rec = PathRecord::default();
    let mut y = problem.initial_state().to_vec();
    let mut t = 0.0;
    let mut k = 1usize;
    while t < horizon {
        if rec.steps >= limit {
            return Err(Error::StepLimit { limit, t });
        }
        let grid_next = {
            let g = k as f64 * h;
            if g >= horizon - 1e-9 * h {
                horizon
            } else {
                g
            }
        };
        let mut t_next = grid_next;
        if let Some(tau) = schedule.next_after(t) {
            if tau <= t_next {
                t_next = tau;
            }
        }
        let mut out = advance(problem, &y, t, t_next, false, noise, schedule, &maps, levy)?;
        out.truncated = t_next < grid_next;
        if t_next == grid_next {
            k += 1;
        }
        rec.steps += 1;
        rec.jumps += out.jump_applied as usize;
        t = t_next;
        y.clone_from(&out.state_after_jump);
        if record {
            rec.nodes.push(out);
        }
    }
    rec.endpoint = y;
    Ok(rec)
}
