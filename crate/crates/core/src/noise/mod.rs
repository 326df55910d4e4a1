//! Noise sources: jump schedules, Brownian increments and iterated integrals.

mod iterated;
mod jumps;
pub mod levy;
mod wiener;

pub use iterated::IteratedIntegrals;
pub use jumps::{sample_jump_schedule, JumpSchedule};
pub use levy::LevyTerms;
pub use wiener::{WienerMode, WienerSource, INCREMENT_QUANTUM};
