//! Lévy-area sampling by the truncated Fourier (Kloeden–Platen–Wright)
//! series with the Gaussian tail correction.
//!
//! For a step of length `h` with normalised increments `xi_j = dW_j / sqrt(h)`
//! and independent standard normals `zeta_{j,r}, eta_{j,r}, mu_j`:
//!
//! ```text
//! A_{j,i} = h/(2 pi) sum_{r=1..p} (1/r) [ zeta_{j,r} (sqrt2 xi_i + eta_{i,r})
//!                                        - zeta_{i,r} (sqrt2 xi_j + eta_{j,r}) ]
//!         + h sqrt(rho_p) (mu_j xi_i - mu_i xi_j)
//! rho_p   = 1/12 - 1/(2 pi^2) sum_{r=1..p} 1/r^2
//! ```
//!
//! The tail term restores the exact conditional variance
//! `Var(A | dW) = h^2/12 + h (dW_i^2 + dW_j^2)/12`, whatever `p` is.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// How many series terms to use on a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LevyTerms {
    /// `ceil(1/h)` terms, which keeps the per-step mean-square truncation
    /// error at `O(h^3)`.
    #[default]
    Auto,
    Fixed(usize),
}

impl LevyTerms {
    pub fn resolve(self, h: f64) -> usize {
        match self {
            LevyTerms::Auto => {
                let n = libm::ceil(1.0 / h);
                if n.is_finite() && n >= 1.0 {
                    n as usize
                } else {
                    1
                }
            }
            LevyTerms::Fixed(n) => n.max(1),
        }
    }
}

/// Tail variance factor `rho_p`.
pub fn tail_factor(terms: usize) -> f64 {
    let partial: f64 = (1..=terms).map(|r| 1.0 / (r as f64 * r as f64)).sum();
    (1.0 / 12.0 - partial / (2.0 * PI * PI)).max(0.0)
}

/// Number of unordered driver pairs `j < i`.
pub fn pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Index of the pair `(j, i)`, `j < i`, in a packed upper-triangle array.
pub fn pair_index(m: usize, j: usize, i: usize) -> usize {
    debug_assert!(j < i && i < m);
    j * (2 * m - j - 1) / 2 + (i - j - 1)
}

/// Samples the Lévy areas `A_{j,i}` for all pairs `j < i` given the
/// increments `dw` over a step of length `h`. Output is packed by
/// [`pair_index`]; `A_{i,j} = -A_{j,i}`.
pub fn sample_levy_areas<R: Rng + ?Sized>(
    rng: &mut R,
    h: f64,
    dw: &[f64],
    terms: usize,
) -> Vec<f64> {
    let m = dw.len();
    let mut areas = vec![0.0; pair_count(m)];
    if m < 2 {
        return areas;
    }
    let terms = terms.max(1);
    let sqrt_h = libm::sqrt(h);
    let xi: Vec<f64> = dw.iter().map(|w| w / sqrt_h).collect();
    let mut zeta = vec![0.0; m * terms];
    let mut eta = vec![0.0; m * terms];
    for j in 0..m {
        for r in 0..terms {
            zeta[j * terms + r] = StandardNormal.sample(rng);
            eta[j * terms + r] = StandardNormal.sample(rng);
        }
    }
    let mu: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let tail = libm::sqrt(tail_factor(terms));
    for j in 0..m {
        for i in j + 1..m {
            let mut series = 0.0;
            for r in 0..terms {
                let zj = zeta[j * terms + r];
                let zi = zeta[i * terms + r];
                let term = zj * (SQRT_2 * xi[i] + eta[i * terms + r])
                    - zi * (SQRT_2 * xi[j] + eta[j * terms + r]);
                series += term / (r + 1) as f64;
            }
            areas[pair_index(m, j, i)] =
                h * (series / (2.0 * PI) + tail * (mu[j] * xi[i] - mu[i] * xi[j]));
        }
    }
    areas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{path_stream, StreamTag};

    #[test]
    fn pair_indexing_is_dense() {
        let m = 4;
        let mut seen = std::vec::Vec::new();
        for j in 0..m {
            for i in j + 1..m {
                seen.push(pair_index(m, j, i));
            }
        }
        assert_eq!(seen, (0..pair_count(m)).collect::<std::vec::Vec<_>>());
    }

    #[test]
    fn auto_terms_follow_inverse_step() {
        assert_eq!(LevyTerms::Auto.resolve(0.25), 4);
        assert_eq!(LevyTerms::Auto.resolve(0.3), 4);
        assert_eq!(LevyTerms::Auto.resolve(2.0), 1);
        assert_eq!(LevyTerms::Fixed(0).resolve(0.1), 1);
    }

    #[test]
    fn tail_factor_vanishes_in_the_limit() {
        assert!(tail_factor(1) > tail_factor(10));
        assert!(tail_factor(100_000) < 1e-6);
    }

    #[test]
    fn conditional_variance_at_zero_increment() {
        // dW = 0: Var(A) = h^2/(2 pi^2) sum_{r<=p} 1/r^2 = h^2/12 * (6/pi^2) sum 1/r^2.
        let h = 0.01;
        let terms = 50;
        let n = 100_000;
        let mut rng = path_stream(3, 0, StreamTag::LevyArea);
        let mut acc = 0.0;
        for _ in 0..n {
            let a = sample_levy_areas(&mut rng, h, &[0.0, 0.0], terms)[0];
            acc += a * a;
        }
        let partial: f64 = (1..=terms).map(|r| 1.0 / (r * r) as f64).sum();
        let expected = h * h / 12.0 * (6.0 / (PI * PI)) * partial;
        let rel = (acc / n as f64 - expected).abs() / expected;
        assert!(rel < 0.03, "relative error {rel}");
    }
}
