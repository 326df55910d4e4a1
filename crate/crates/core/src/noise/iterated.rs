use alloc::vec;
use alloc::vec::Vec;

use super::levy::{pair_count, pair_index};

/// Brownian increments and second-order iterated Itô integrals over one step.
///
/// `get(j, i)` is `I_{j,i} = int int dW_j(p) dW_i(s)` with the `j`-integral
/// inside. The diagonal is always `(dW_i^2 - h)/2` and for `i != j`
/// `I_{i,j} + I_{j,i} = dW_i dW_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct IteratedIntegrals {
    pub h: f64,
    pub dw: Vec<f64>,
    /// Row-major `m x m`, `i2[j * m + i] = I_{j,i}`.
    pub i2: Vec<f64>,
}

impl IteratedIntegrals {
    /// Off-diagonal entries split symmetrically, `I_{j,i} = dW_j dW_i / 2`.
    /// Exact whenever only symmetric combinations enter the scheme.
    pub fn symmetric(h: f64, dw: Vec<f64>) -> Self {
        let m = dw.len();
        let mut i2 = vec![0.0; m * m];
        for j in 0..m {
            for i in 0..m {
                i2[j * m + i] = if i == j {
                    (dw[i] * dw[i] - h) / 2.0
                } else {
                    dw[j] * dw[i] / 2.0
                };
            }
        }
        IteratedIntegrals { h, dw, i2 }
    }

    /// `I_{j,i} = dW_j dW_i / 2 + A_{j,i}` with `areas` packed by
    /// [`pair_index`](super::levy::pair_index) for `j < i`.
    pub fn with_areas(h: f64, dw: Vec<f64>, areas: &[f64]) -> Self {
        let m = dw.len();
        debug_assert_eq!(areas.len(), pair_count(m));
        let mut out = Self::symmetric(h, dw);
        for j in 0..m {
            for i in j + 1..m {
                let a = areas[pair_index(m, j, i)];
                let half = out.i2[j * m + i];
                out.i2[j * m + i] = half + a;
                out.i2[i * m + j] = half - a;
            }
        }
        out
    }

    pub fn drivers(&self) -> usize {
        self.dw.len()
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.i2[j * self.dw.len() + i]
    }

    /// Antisymmetric part `(I_{j,i} - I_{i,j}) / 2`.
    pub fn levy_area(&self, j: usize, i: usize) -> f64 {
        (self.get(j, i) - self.get(i, j)) / 2.0
    }

    /// The same increments with every Lévy area negated (the transpose of
    /// the off-diagonal block).
    pub fn with_areas_negated(&self) -> Self {
        let m = self.dw.len();
        let mut out = self.clone();
        for j in 0..m {
            for i in 0..m {
                out.i2[j * m + i] = self.i2[i * m + j];
            }
        }
        out
    }
}
