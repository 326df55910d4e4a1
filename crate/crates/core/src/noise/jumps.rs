use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::model::{MarkLaw, Sjde};

/// Jump times `0 < tau_1 < tau_2 < ... <= T` and their marks, drawn before
/// the diffusion is simulated.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpSchedule {
    times: Vec<f64>,
    /// Row-major `len x mark_dim`.
    marks: Vec<f64>,
    mark_dim: usize,
    horizon: f64,
}

impl JumpSchedule {
    pub fn empty(horizon: f64) -> Self {
        JumpSchedule {
            times: Vec::new(),
            marks: Vec::new(),
            mark_dim: 1,
            horizon,
        }
    }

    /// Builds a schedule from explicit data, checking the invariants.
    pub fn from_parts(
        times: Vec<f64>,
        marks: Vec<f64>,
        mark_dim: usize,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if mark_dim == 0 || marks.len() != times.len() * mark_dim {
            return Err(Error::param(
                "marks",
                "need exactly mark_dim values per jump time",
            ));
        }
        if times.iter().any(|&t| !(t > 0.0 && t <= horizon)) {
            return Err(Error::param("times", "jump times must lie in (0, T]"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param(
                "times",
                "jump times must be strictly increasing",
            ));
        }
        Ok(JumpSchedule {
            times,
            marks,
            mark_dim,
            horizon,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mark(&self, index: usize) -> &[f64] {
        &self.marks[index * self.mark_dim..(index + 1) * self.mark_dim]
    }

    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of jumps in `(0, t]`.
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&tau| tau <= t)
    }

    /// First jump time strictly after `t`.
    pub fn next_after(&self, t: f64) -> Option<f64> {
        self.times.get(self.count_until(t)).copied()
    }

    /// Index of the jump at exactly `t`, if any.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|tau| tau.total_cmp(&t)).ok()
    }
}

/// Cumulative sums of `Exp(lambda)` waiting times truncated at `horizon`, one
/// mark per jump.
pub fn sample_jump_schedule<R: Rng + ?Sized>(
    lambda: f64,
    horizon: f64,
    mark_law: MarkLaw,
    mark_dim: usize,
    rng: &mut R,
) -> Result<JumpSchedule> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("horizon", "must be positive and finite"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be non-negative and finite"));
    }
    if mark_dim == 0 {
        return Err(Error::param("mark_dim", "must be positive"));
    }
    let mut schedule = JumpSchedule::empty(horizon);
    schedule.mark_dim = mark_dim;
    if lambda == 0.0 {
        return Ok(schedule);
    }
    let waiting = Exp::new(lambda).map_err(|_| Error::param("lambda", "invalid rate"))?;
    let mut t = 0.0;
    loop {
        let next = t + waiting.sample(rng);
        if next > horizon {
            break;
        }
        // A zero waiting time (or one lost to rounding) would duplicate a node.
        if next <= t {
            continue;
        }
        t = next;
        schedule.times.push(t);
        for _ in 0..mark_dim {
            schedule.marks.push(mark_law.sample(rng));
        }
    }
    Ok(schedule)
}

impl JumpSchedule {
    /// Samples the schedule of `problem` (its intensity, horizon and mark law).
    pub fn sample_for<P: Sjde + ?Sized, R: Rng + ?Sized>(problem: &P, rng: &mut R) -> Result<Self> {
        sample_jump_schedule(
            problem.intensity(),
            problem.horizon(),
            problem.mark_law(),
            problem.mark_dim(),
            rng,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{path_stream, StreamTag};
    use std::vec;

    #[test]
    fn zero_intensity_gives_empty_schedule() {
        let mut rng = path_stream(1, 0, StreamTag::Jumps);
        let s = sample_jump_schedule(0.0, 1.0, MarkLaw::STANDARD, 1, &mut rng).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.next_after(0.0), None);
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        let mut rng = path_stream(1, 0, StreamTag::Jumps);
        assert!(sample_jump_schedule(-1.0, 1.0, MarkLaw::STANDARD, 1, &mut rng).is_err());
        assert!(sample_jump_schedule(1.0, 0.0, MarkLaw::STANDARD, 1, &mut rng).is_err());
        assert!(JumpSchedule::from_parts(vec![0.5, 0.4], vec![0.0, 0.0], 1, 1.0).is_err());
        assert!(JumpSchedule::from_parts(vec![0.0], vec![0.0], 1, 1.0).is_err());
        assert!(JumpSchedule::from_parts(vec![1.5], vec![0.0], 1, 1.0).is_err());
        assert!(JumpSchedule::from_parts(vec![0.5], vec![], 1, 1.0).is_err());
    }

    #[test]
    fn times_are_increasing_inside_horizon() {
        for path in 0..200 {
            let mut rng = path_stream(11, path, StreamTag::Jumps);
            let s = sample_jump_schedule(25.0, 1.0, MarkLaw::STANDARD, 1, &mut rng).unwrap();
            assert!(s.times().iter().all(|&t| t > 0.0 && t <= 1.0));
            assert!(s.times().windows(2).all(|w| w[0] < w[1]));
            assert_eq!(s.count_until(1.0), s.len());
        }
    }

    #[test]
    fn mean_count_matches_poisson_mean() {
        let n = 10_000;
        let mut total = 0usize;
        for path in 0..n {
            let mut rng = path_stream(5, path, StreamTag::Jumps);
            total += sample_jump_schedule(2.0, 1.0, MarkLaw::STANDARD, 1, &mut rng)
                .unwrap()
                .len();
        }
        let mean = total as f64 / n as f64;
        assert!(
            (mean - 2.0).abs() <= 3.0 * (2.0 / n as f64).sqrt(),
            "{mean}"
        );
    }

    #[test]
    fn lookup_helpers() {
        let s = JumpSchedule::from_parts(vec![0.25, 0.5], vec![0.1, -0.2], 1, 1.0).unwrap();
        assert_eq!(s.next_after(0.0), Some(0.25));
        assert_eq!(s.next_after(0.25), Some(0.5));
        assert_eq!(s.next_after(0.5), None);
        assert_eq!(s.count_until(0.3), 1);
        assert_eq!(s.index_at(0.5), Some(1));
        assert_eq!(s.index_at(0.4), None);
        assert_eq!(s.mark(1), &[-0.2]);
    }
}
