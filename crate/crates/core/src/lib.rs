//! Jump-adapted adaptive time-stepping for Itô SDEs driven by Brownian motion
//! and a finite-activity Poisson random measure.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces:
//!
//! * [`model`]: the [`Sjde`](model::Sjde) problem abstraction and the built-in
//!   one- and two-dimensional test systems.
//! * [`noise`]: pre-computed jump schedules, Brownian increments (on demand or
//!   coupled to a fine reference grid through Brownian bridges) and iterated
//!   stochastic integrals with Lévy-area sampling.
//! * [`maps`]: one-step maps (Milstein, projected Milstein, split-step backward
//!   Milstein, tamed Milstein).
//! * [`stepper`]: the jump-adapted adaptive mesh and the main/backstop hybrid
//!   stepping loop, plus a jump-adapted fixed-step march.
//!
//! IO, configuration and the Monte Carlo harness live in the `jaam` crate.
#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod linalg;
pub mod maps;
pub mod model;
pub mod noise;
pub mod rng;
pub mod stepper;

pub use error::{Error, Result};
pub use maps::{MapKind, OneStepMap};
pub use model::{NoiseClass, ProblemId, Sjde, TestSystem};
pub use noise::{IteratedIntegrals, JumpSchedule, LevyTerms, WienerMode, WienerSource};
pub use stepper::{BackstopRule, MapPair, PathRecord, StepOutcome, StepParams};
