//! One-step maps `x -> x_{n+1}` over a step of length `h` with given
//! increments and iterated integrals.
//!
//! All maps share the stochastic part of the Milstein scheme,
//!
//! ```text
//! S(y) = sum_i g_i(y) dW_i + sum_{i,j} Dg_i(y) g_j(y) I_{j,i}
//! ```
//!
//! and differ in how the drift enters or how large states are controlled.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm, solve_in_place};
use crate::model::{NoiseClass, Sjde};
use crate::noise::IteratedIntegrals;

/// Adds `S(y)` to `out`.
fn add_stochastic_terms<P: Sjde + ?Sized>(
    problem: &P,
    y: &[f64],
    ii: &IteratedIntegrals,
    out: &mut [f64],
) {
    let d = problem.dim();
    let m = problem.drivers();
    let mut buf = vec![0.0; d];
    for i in 0..m {
        problem.diffusion_col(i, y, &mut buf);
        for k in 0..d {
            out[k] += buf[k] * ii.dw[i];
        }
    }
    if problem.noise_class() == NoiseClass::Additive {
        return;
    }
    for i in 0..m {
        for j in 0..m {
            let weight = ii.get(j, i);
            if weight == 0.0 {
                continue;
            }
            problem.diffusion_correction(i, j, y, &mut buf);
            for k in 0..d {
                out[k] += buf[k] * weight;
            }
        }
    }
}

/// Explicit Milstein step
/// `x + h f(x) + sum_i g_i(x) dW_i + sum_{i,j} Dg_i(x) g_j(x) I_{j,i}`.
pub fn milstein<P: Sjde + ?Sized>(
    problem: &P,
    x: &[f64],
    h: f64,
    ii: &IteratedIntegrals,
) -> Vec<f64> {
    let mut drift = vec![0.0; x.len()];
    problem.drift(x, &mut drift);
    let mut out: Vec<f64> = x.iter().zip(&drift).map(|(xi, fi)| xi + h * fi).collect();
    add_stochastic_terms(problem, x, ii, &mut out);
    out
}

/// Radius `theta * h^{-alpha}` of the projection ball.
pub fn projection_radius(h: f64, theta: f64, alpha: f64) -> f64 {
    theta * libm::pow(h, -alpha)
}

/// Projection exponent `1 / (2 (q - 1))` for a drift of polynomial degree `q`.
pub fn projection_exponent(poly_degree: u32) -> f64 {
    let q = poly_degree.max(2) as f64;
    1.0 / (2.0 * (q - 1.0))
}

/// Milstein step from the radial projection of `x` onto the ball of radius
/// `theta * h^{-alpha}`.
pub fn projected_milstein<P: Sjde + ?Sized>(
    problem: &P,
    x: &[f64],
    h: f64,
    ii: &IteratedIntegrals,
    theta: f64,
    alpha: f64,
) -> Vec<f64> {
    let radius = projection_radius(h, theta, alpha);
    let r = norm(x);
    if r <= radius {
        return milstein(problem, x, h, ii);
    }
    let scale = radius / r;
    let projected: Vec<f64> = x.iter().map(|v| v * scale).collect();
    milstein(problem, &projected, h, ii)
}

/// Split-step backward Milstein: solve `y = x + h f(y)` by damped Newton,
/// then add the Milstein stochastic terms evaluated at `y`.
pub fn ssbm<P: Sjde + ?Sized>(
    problem: &P,
    x: &[f64],
    h: f64,
    ii: &IteratedIntegrals,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mut y = implicit_drift_solve(problem, x, h, tol, max_iter)?;
    let base = y.clone();
    add_stochastic_terms(problem, &base, ii, &mut y);
    Ok(y)
}

/// Newton iteration for `y - x - h f(y) = 0`, starting at `x`. A step that
/// increases the residual is halved (up to 30 times).
pub fn implicit_drift_solve<P: Sjde + ?Sized>(
    problem: &P,
    x: &[f64],
    h: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let d = x.len();
    let target = tol * norm(x).max(1.0);
    let mut f = vec![0.0; d];
    let residual_of = |y: &[f64], f: &mut [f64]| -> Vec<f64> {
        problem.drift(y, f);
        (0..d).map(|k| y[k] - x[k] - h * f[k]).collect()
    };
    let mut y = x.to_vec();
    let mut res = residual_of(&y, &mut f);
    let mut res_norm = norm(&res);
    let mut jac = vec![0.0; d * d];
    for _ in 0..max_iter {
        if res_norm <= target {
            return Ok(y);
        }
        problem.drift_jacobian(&y, &mut jac);
        for row in 0..d {
            for col in 0..d {
                jac[row * d + col] = if row == col { 1.0 } else { 0.0 } - h * jac[row * d + col];
            }
        }
        let mut delta: Vec<f64> = res.iter().map(|r| -r).collect();
        if !solve_in_place(&mut jac, &mut delta) {
            break;
        }
        let mut step = 1.0;
        let mut trial: Vec<f64>;
        let mut trial_res: Vec<f64>;
        let mut halvings = 0;
        loop {
            trial = (0..d).map(|k| y[k] + step * delta[k]).collect();
            trial_res = residual_of(&trial, &mut f);
            let trial_norm = norm(&trial_res);
            if (trial_norm < res_norm && all_finite(&trial)) || halvings == 30 {
                break;
            }
            step *= 0.5;
            halvings += 1;
        }
        y = trial;
        res = trial_res;
        res_norm = norm(&res);
        if !res_norm.is_finite() {
            break;
        }
    }
    if res_norm <= target {
        return Ok(y);
    }
    Err(Error::NonConvergence {
        map: MapKind::Ssbm.as_str(),
        iterations: max_iter,
        residual: res_norm,
    })
}

/// Tamed Milstein: the whole Milstein increment divided by `1 + h |f(x)|`.
pub fn tamed_milstein<P: Sjde + ?Sized>(
    problem: &P,
    x: &[f64],
    h: f64,
    ii: &IteratedIntegrals,
) -> Vec<f64> {
    let mut drift = vec![0.0; x.len()];
    problem.drift(x, &mut drift);
    let mut incr: Vec<f64> = drift.iter().map(|fi| h * fi).collect();
    add_stochastic_terms(problem, x, ii, &mut incr);
    let taming = 1.0 + h * norm(&drift);
    x.iter()
        .zip(&incr)
        .map(|(xi, di)| xi + di / taming)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapKind {
    Milstein,
    ProjectedMilstein,
    Ssbm,
    TamedMilstein,
}

impl MapKind {
    pub const ALL: [MapKind; 4] = [
        MapKind::Milstein,
        MapKind::ProjectedMilstein,
        MapKind::Ssbm,
        MapKind::TamedMilstein,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::Milstein => "milstein",
            MapKind::ProjectedMilstein => "pmil",
            MapKind::Ssbm => "ssbm",
            MapKind::TamedMilstein => "tmil",
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MapKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownId {
                kind: "map",
                id: s.to_string(),
            })
    }
}

/// A configured one-step map. Deterministic in `(x, h, ii)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneStepMap {
    pub kind: MapKind,
    /// Projection scale.
    pub theta: f64,
    /// Projection exponent; `None` means `1 / (2 (q - 1))` from the
    /// problem's drift degree.
    pub alpha: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl OneStepMap {
    pub const fn new(kind: MapKind) -> Self {
        OneStepMap {
            kind,
            theta: 0.25,
            alpha: None,
            tol: 1e-12,
            max_iter: 50,
        }
    }

    pub const fn milstein() -> Self {
        Self::new(MapKind::Milstein)
    }

    pub const fn projected() -> Self {
        Self::new(MapKind::ProjectedMilstein)
    }

    pub const fn ssbm() -> Self {
        Self::new(MapKind::Ssbm)
    }

    pub const fn tamed() -> Self {
        Self::new(MapKind::TamedMilstein)
    }

    pub fn apply<P: Sjde + ?Sized>(
        &self,
        problem: &P,
        x: &[f64],
        h: f64,
        ii: &IteratedIntegrals,
    ) -> Result<Vec<f64>> {
        match self.kind {
            MapKind::Milstein => Ok(milstein(problem, x, h, ii)),
            MapKind::ProjectedMilstein => {
                let alpha = self
                    .alpha
                    .unwrap_or_else(|| projection_exponent(problem.drift_poly_degree()));
                Ok(projected_milstein(problem, x, h, ii, self.theta, alpha))
            }
            MapKind::Ssbm => ssbm(problem, x, h, ii, self.tol, self.max_iter),
            MapKind::TamedMilstein => Ok(tamed_milstein(problem, x, h, ii)),
        }
    }
}

impl FromStr for OneStepMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(OneStepMap::new(s.parse()?))
    }
}
