//! Problem definitions.
//!
//! An SJDE is
//!
//! ```text
//! dX = f(X) dt + sum_i g_i(X) dW_i + gamma(z, X-) J(dz x dt),   X(0) = X0,  t in [0, T]
//! ```
//!
//! where `J` is a Poisson random measure with constant intensity `lambda` and
//! mark law `nu`. Implementors of [`Sjde`] provide the coefficients; the five
//! built-in test systems are [`TestSystem`]s addressable by [`ProblemId`].

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::norm;

/// Structure of the diffusion coefficient, which decides how iterated
/// integrals have to be sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseClass {
    Additive,
    Diagonal,
    Commutative,
    NonCommutative,
}

impl NoiseClass {
    /// Whether the off-diagonal iterated integrals need a sampled Lévy area.
    pub fn needs_levy_area(self, drivers: usize) -> bool {
        self == NoiseClass::NonCommutative && drivers >= 2
    }
}

/// Law of a single jump mark component. Marks of dimension `k` are `k`
/// independent draws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MarkLaw {
    Gaussian { mean: f64, std_dev: f64 },
    Constant(f64),
}

impl MarkLaw {
    /// `N(0, 0.01)`, the jump-size law of every built-in system.
    pub const STANDARD: MarkLaw = MarkLaw::Gaussian {
        mean: 0.0,
        std_dev: 0.1,
    };

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarkLaw::Gaussian { mean, std_dev } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std_dev * z
            }
            MarkLaw::Constant(c) => c,
        }
    }
}

/// Coefficients and data of a jump-diffusion problem.
///
/// Vector-valued coefficients write into `out`, which always has length
/// [`dim`](Sjde::dim). Implementations must be deterministic and free of
/// interior mutability so a problem can be shared by many trajectory workers.
pub trait Sjde: Send + Sync {
    fn dim(&self) -> usize;
    fn drivers(&self) -> usize;
    fn mark_dim(&self) -> usize {
        1
    }

    /// Drift `f(x)`.
    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Column `i` of the diffusion matrix, `g_i(x)`.
    fn diffusion_col(&self, i: usize, x: &[f64], out: &mut [f64]);

    /// The Milstein correction `Dg_i(x) g_j(x)`.
    ///
    /// The default is a central finite difference of `g_i` along `g_j(x)`;
    /// the built-in systems override it with the analytic product.
    fn diffusion_correction(&self, i: usize, j: usize, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut dir = vec![0.0; d];
        self.diffusion_col(j, x, &mut dir);
        let dir_norm = norm(&dir);
        if dir_norm == 0.0 {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let eps = libm::cbrt(f64::EPSILON) * norm(x).max(1.0) / dir_norm;
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        for k in 0..d {
            plus[k] += eps * dir[k];
            minus[k] -= eps * dir[k];
        }
        let mut g_plus = vec![0.0; d];
        self.diffusion_col(i, &plus, &mut g_plus);
        self.diffusion_col(i, &minus, out);
        for k in 0..d {
            out[k] = (g_plus[k] - out[k]) / (2.0 * eps);
        }
    }

    /// Jacobian of the drift, row-major `d x d`. Used by implicit maps.
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut probe = x.to_vec();
        let mut f_plus = vec![0.0; d];
        let mut f_minus = vec![0.0; d];
        for col in 0..d {
            let eps = libm::cbrt(f64::EPSILON) * libm::fabs(x[col]).max(1.0);
            probe[col] = x[col] + eps;
            self.drift(&probe, &mut f_plus);
            probe[col] = x[col] - eps;
            self.drift(&probe, &mut f_minus);
            probe[col] = x[col];
            for row in 0..d {
                out[row * d + col] = (f_plus[row] - f_minus[row]) / (2.0 * eps);
            }
        }
    }

    /// Jump coefficient `gamma(z, x)`.
    fn jump_coeff(&self, mark: &[f64], x: &[f64], out: &mut [f64]);

    fn mark_law(&self) -> MarkLaw;
    fn intensity(&self) -> f64;
    fn initial_state(&self) -> &[f64];
    fn horizon(&self) -> f64;
    fn noise_class(&self) -> NoiseClass;

    /// Polynomial degree of the drift; sets the projection exponent of the
    /// projected Milstein map.
    fn drift_poly_degree(&self) -> u32 {
        3
    }
}

/// The diffusion matrix `G(x)` as a row-major `d x m` array, `G[k][i] = g_i(x)[k]`.
pub fn diffusion_matrix<P: Sjde + ?Sized>(problem: &P, x: &[f64]) -> Vec<f64> {
    let (d, m) = (problem.dim(), problem.drivers());
    let mut col = vec![0.0; d];
    let mut g = vec![0.0; d * m];
    for i in 0..m {
        problem.diffusion_col(i, x, &mut col);
        for k in 0..d {
            g[k * m + i] = col[k];
        }
    }
    g
}

/// Checks `Dg_i g_j == Dg_j g_i` on `samples` deterministic points of
/// `[-2, 2]^d` (a Halton sequence, so every coordinate is exercised).
pub fn check_commutativity<P: Sjde + ?Sized>(problem: &P, samples: usize, tol: f64) -> bool {
    const BASES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let (d, m) = (problem.dim(), problem.drivers());
    if m < 2 {
        return true;
    }
    let mut x = vec![0.0; d];
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    for n in 1..=samples.max(1) {
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = -2.0 + 4.0 * radical_inverse(n as u32, BASES[k % BASES.len()]);
        }
        for i in 0..m {
            for j in i + 1..m {
                problem.diffusion_correction(i, j, &x, &mut a);
                problem.diffusion_correction(j, i, &x, &mut b);
                let gap = a
                    .iter()
                    .zip(&b)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>();
                if libm::sqrt(gap) > tol {
                    return false;
                }
            }
        }
    }
    true
}

fn radical_inverse(mut n: u32, base: u32) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while n > 0 {
        acc += (n % base) as f64 * scale;
        n /= base;
        scale *= inv;
    }
    acc
}

/// Identifier of a built-in test system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemId {
    OneDimAdditive,
    OneDimMultiplicative,
    TwoDimG1,
    TwoDimG2,
    TwoDimG3,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [
        ProblemId::OneDimAdditive,
        ProblemId::OneDimMultiplicative,
        ProblemId::TwoDimG1,
        ProblemId::TwoDimG2,
        ProblemId::TwoDimG3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::OneDimAdditive => "1d-add",
            ProblemId::OneDimMultiplicative => "1d-mult",
            ProblemId::TwoDimG1 => "2d-g1",
            ProblemId::TwoDimG2 => "2d-g2",
            ProblemId::TwoDimG3 => "2d-g3",
        }
    }

    /// Builds the system with diffusion scale `sigma` and default settings.
    pub fn build(self, sigma: f64) -> Result<TestSystem> {
        match self {
            ProblemId::OneDimAdditive => make_1d_additive(sigma),
            ProblemId::OneDimMultiplicative => make_1d_multiplicative(sigma),
            ProblemId::TwoDimG1 => make_2d(TwoDimNoise::G1, sigma),
            ProblemId::TwoDimG2 => make_2d(TwoDimNoise::G2, sigma),
            ProblemId::TwoDimG3 => make_2d(TwoDimNoise::G3, sigma),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownId {
                kind: "problem",
                id: s.to_string(),
            })
    }
}

/// Diffusion structure of the two-dimensional systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoDimNoise {
    /// `sigma * diag(x1^2, x2^2)`
    G1,
    /// `sigma * [[x2^2, x2^2], [x1^2, x1^2]]`
    G2,
    /// `sigma * [[1.5 x1^2, x2], [x2^2, 1.5 x1]]`
    G3,
}

/// One of the five built-in test systems: cubic drift, polynomial diffusion,
/// linear jump action `gamma(z, x) = z x`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSystem {
    id: ProblemId,
    sigma: f64,
    intensity: f64,
    initial_state: Vec<f64>,
    horizon: f64,
    mark: MarkLaw,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::param("sigma", "must be positive and finite"))
    }
}

/// `dX = (X - 3X^3) dt + sigma dW + zX- dN`, `X0 = 0.5`, `T = 1`.
pub fn make_1d_additive(sigma: f64) -> Result<TestSystem> {
    check_sigma(sigma)?;
    Ok(TestSystem {
        id: ProblemId::OneDimAdditive,
        sigma,
        intensity: 2.0,
        initial_state: vec![0.5],
        horizon: 1.0,
        mark: MarkLaw::STANDARD,
    })
}

/// `dX = (X - 3X^3) dt + sigma (1 - X^2) dW + zX- dN`, `X0 = 0.5`, `T = 1`.
pub fn make_1d_multiplicative(sigma: f64) -> Result<TestSystem> {
    check_sigma(sigma)?;
    Ok(TestSystem {
        id: ProblemId::OneDimMultiplicative,
        ..make_1d_additive(sigma)?
    })
}

/// Two-dimensional system with drift `[x2 - 3x1^3, x1 - 3x2^3]`,
/// `X0 = [0.5, 0.7]`, `T = 1`, intensity 2.5.
pub fn make_2d(noise: TwoDimNoise, sigma: f64) -> Result<TestSystem> {
    check_sigma(sigma)?;
    let id = match noise {
        TwoDimNoise::G1 => ProblemId::TwoDimG1,
        TwoDimNoise::G2 => ProblemId::TwoDimG2,
        TwoDimNoise::G3 => ProblemId::TwoDimG3,
    };
    Ok(TestSystem {
        id,
        sigma,
        intensity: 2.5,
        initial_state: vec![0.5, 0.7],
        horizon: 1.0,
        mark: MarkLaw::STANDARD,
    })
}

impl TestSystem {
    pub fn id(&self) -> ProblemId {
        self.id
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn with_intensity(mut self, intensity: f64) -> Result<Self> {
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(Error::param("lambda", "must be non-negative and finite"));
        }
        self.intensity = intensity;
        Ok(self)
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.initial_state.len() {
            return Err(Error::param("initial_state", "dimension mismatch"));
        }
        if !x0.iter().all(|v| v.is_finite()) {
            return Err(Error::param("initial_state", "must be finite"));
        }
        self.initial_state = x0;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", "must be positive and finite"));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_mark_law(mut self, mark: MarkLaw) -> Self {
        self.mark = mark;
        self
    }
}

impl Sjde for TestSystem {
    fn dim(&self) -> usize {
        self.initial_state.len()
    }

    fn drivers(&self) -> usize {
        self.initial_state.len()
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        match self.id {
            ProblemId::OneDimAdditive | ProblemId::OneDimMultiplicative => {
                out[0] = x[0] - 3.0 * x[0] * x[0] * x[0];
            }
            _ => {
                out[0] = x[1] - 3.0 * x[0] * x[0] * x[0];
                out[1] = x[0] - 3.0 * x[1] * x[1] * x[1];
            }
        }
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        match self.id {
            ProblemId::OneDimAdditive | ProblemId::OneDimMultiplicative => {
                out[0] = 1.0 - 9.0 * x[0] * x[0];
            }
            _ => {
                out[0] = -9.0 * x[0] * x[0];
                out[1] = 1.0;
                out[2] = 1.0;
                out[3] = -9.0 * x[1] * x[1];
            }
        }
    }

    fn diffusion_col(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let s = self.sigma;
        match (self.id, i) {
            (ProblemId::OneDimAdditive, _) => out[0] = s,
            (ProblemId::OneDimMultiplicative, _) => out[0] = s * (1.0 - x[0] * x[0]),
            (ProblemId::TwoDimG1, 0) => {
                out[0] = s * x[0] * x[0];
                out[1] = 0.0;
            }
            (ProblemId::TwoDimG1, _) => {
                out[0] = 0.0;
                out[1] = s * x[1] * x[1];
            }
            (ProblemId::TwoDimG2, _) => {
                out[0] = s * x[1] * x[1];
                out[1] = s * x[0] * x[0];
            }
            (ProblemId::TwoDimG3, 0) => {
                out[0] = s * 1.5 * x[0] * x[0];
                out[1] = s * x[1] * x[1];
            }
            (ProblemId::TwoDimG3, _) => {
                out[0] = s * x[1];
                out[1] = s * 1.5 * x[0];
            }
        }
    }

    fn diffusion_correction(&self, i: usize, j: usize, x: &[f64], out: &mut [f64]) {
        let s2 = self.sigma * self.sigma;
        match (self.id, i, j) {
            (ProblemId::OneDimAdditive, _, _) => out[0] = 0.0,
            (ProblemId::OneDimMultiplicative, _, _) => {
                out[0] = -2.0 * s2 * x[0] * (1.0 - x[0] * x[0]);
            }
            (ProblemId::TwoDimG1, 0, 0) => {
                out[0] = 2.0 * s2 * x[0] * x[0] * x[0];
                out[1] = 0.0;
            }
            (ProblemId::TwoDimG1, 1, 1) => {
                out[0] = 0.0;
                out[1] = 2.0 * s2 * x[1] * x[1] * x[1];
            }
            (ProblemId::TwoDimG1, _, _) => {
                out[0] = 0.0;
                out[1] = 0.0;
            }
            (ProblemId::TwoDimG2, _, _) => {
                // Dg = sigma [[0, 2 x2], [2 x1, 0]], g = sigma [x2^2, x1^2]
                out[0] = 2.0 * s2 * x[1] * x[0] * x[0];
                out[1] = 2.0 * s2 * x[0] * x[1] * x[1];
            }
            (ProblemId::TwoDimG3, 0, 0) => {
                out[0] = 4.5 * s2 * x[0] * x[0] * x[0];
                out[1] = 2.0 * s2 * x[1] * x[1] * x[1];
            }
            (ProblemId::TwoDimG3, 0, _) => {
                out[0] = 3.0 * s2 * x[0] * x[1];
                out[1] = 3.0 * s2 * x[0] * x[1];
            }
            (ProblemId::TwoDimG3, _, 0) => {
                out[0] = s2 * x[1] * x[1];
                out[1] = 2.25 * s2 * x[0] * x[0];
            }
            (ProblemId::TwoDimG3, _, _) => {
                out[0] = 1.5 * s2 * x[0];
                out[1] = 1.5 * s2 * x[1];
            }
        }
    }

    fn jump_coeff(&self, mark: &[f64], x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = mark[0] * xi;
        }
    }

    fn mark_law(&self) -> MarkLaw {
        self.mark
    }

    fn intensity(&self) -> f64 {
        self.intensity
    }

    fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn noise_class(&self) -> NoiseClass {
        match self.id {
            ProblemId::OneDimAdditive => NoiseClass::Additive,
            ProblemId::OneDimMultiplicative | ProblemId::TwoDimG1 => NoiseClass::Diagonal,
            ProblemId::TwoDimG2 => NoiseClass::Commutative,
            ProblemId::TwoDimG3 => NoiseClass::NonCommutative,
        }
    }
}

/// Zero drift and diffusion, `gamma(z, x) = z x`: the exact solution is
/// `X0 * prod(1 + z_i)` over the jumps up to `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureJump {
    initial_state: Vec<f64>,
    intensity: f64,
    horizon: f64,
    mark: MarkLaw,
}

impl PureJump {
    pub fn new(initial_state: Vec<f64>, intensity: f64, horizon: f64) -> Result<Self> {
        if initial_state.is_empty() {
            return Err(Error::param("initial_state", "must not be empty"));
        }
        if !(intensity >= 0.0) {
            return Err(Error::param("lambda", "must be non-negative"));
        }
        if !(horizon > 0.0) {
            return Err(Error::param("horizon", "must be positive"));
        }
        Ok(PureJump {
            initial_state,
            intensity,
            horizon,
            mark: MarkLaw::STANDARD,
        })
    }
}

impl Sjde for PureJump {
    fn dim(&self) -> usize {
        self.initial_state.len()
    }

    fn drivers(&self) -> usize {
        1
    }

    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn diffusion_col(&self, _i: usize, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn diffusion_correction(&self, _i: usize, _j: usize, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn jump_coeff(&self, mark: &[f64], x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = mark[0] * xi;
        }
    }

    fn mark_law(&self) -> MarkLaw {
        self.mark
    }

    fn intensity(&self) -> f64 {
        self.intensity
    }

    fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn noise_class(&self) -> NoiseClass {
        NoiseClass::Additive
    }
}
