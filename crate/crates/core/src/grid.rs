//! Periodic computational domains.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::FftEngine;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("expected {expected} entries for {what}, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("axis {axis}: size {size} must be even and at least 8")]
    Size { axis: usize, size: usize },
    #[error("axis {axis}: half period {value} must be positive and finite")]
    HalfPeriod { axis: usize, value: f64 },
}

/// Geometric description of a grid, without any transform state. This is
/// what gets serialized into snapshots and configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
    pub half_periods: Vec<f64>,
}

struct GridInner {
    sizes: Vec<usize>,
    half_periods: Vec<f64>,
    spacings: Vec<f64>,
    wavenumbers: Vec<Vec<f64>>,
    fft: OnceLock<FftEngine>,
}

/// Uniform collocation grid on the torus `prod_i [-a_i, a_i)` with periodic
/// identification. Cheap to clone; transform plans are shared between clones.
#[derive(Clone)]
pub struct TorusGrid {
    inner: Arc<GridInner>,
}

impl TorusGrid {
    /// Grid with arbitrary per-axis half periods `a_i` (the torus has length
    /// `2 a_i` along axis `i`).
    pub fn new(sizes: &[usize], half_periods: &[f64]) -> Result<Self, GridError> {
        let dim = sizes.len();
        if !(2..=3).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if half_periods.len() != dim {
            return Err(GridError::Arity {
                what: "half periods",
                expected: dim,
                got: half_periods.len(),
            });
        }
        for (axis, &size) in sizes.iter().enumerate() {
            if size < 8 || size % 2 != 0 {
                return Err(GridError::Size { axis, size });
            }
        }
        for (axis, &value) in half_periods.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(GridError::HalfPeriod { axis, value });
            }
        }
        let spacings: Vec<f64> = sizes
            .iter()
            .zip(half_periods)
            .map(|(&n, &a)| 2.0 * a / n as f64)
            .collect();
        let wavenumbers = sizes
            .iter()
            .zip(half_periods)
            .map(|(&n, &a)| wavenumber_table(n, 2.0 * a))
            .collect();
        Ok(Self {
            inner: Arc::new(GridInner {
                sizes: sizes.to_vec(),
                half_periods: half_periods.to_vec(),
                spacings,
                wavenumbers,
                fft: OnceLock::new(),
            }),
        })
    }

    /// The torus `T_n^N = [-pi n, pi n]^N` sampled with `sizes[i]` points per axis.
    pub fn torus(dim: usize, sizes: &[usize], n: f64) -> Result<Self, GridError> {
        if !(2..=3).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if sizes.len() != dim {
            return Err(GridError::Arity {
                what: "sizes",
                expected: dim,
                got: sizes.len(),
            });
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(GridError::HalfPeriod { axis: 0, value: n });
        }
        Self::new(sizes, &vec![PI * n; dim])
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self, GridError> {
        Self::new(&spec.sizes, &spec.half_periods)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            sizes: self.inner.sizes.clone(),
            half_periods: self.inner.half_periods.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.inner.sizes
    }

    pub fn half_periods(&self) -> &[f64] {
        &self.inner.half_periods
    }

    pub fn spacings(&self) -> &[f64] {
        &self.inner.spacings
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.inner.half_periods.iter().map(|a| 2.0 * a).collect()
    }

    /// Angular wavenumbers along `axis` in standard FFT order. The Nyquist
    /// entry is zero so that first derivatives of real data stay real and the
    /// discrete Laplacian is the square of the discrete gradient.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.wavenumbers[axis]
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.inner.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of a single sample.
    pub fn cell_volume(&self) -> f64 {
        self.inner.spacings.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Row-major strides (axis 0 slowest).
    pub fn strides(&self) -> Vec<usize> {
        let sizes = self.sizes();
        let mut strides = vec![1; sizes.len()];
        for axis in (0..sizes.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * sizes[axis + 1];
        }
        strides
    }

    /// Sample coordinates along `axis`: `x_j = -a + j h`, so `x_{N/2} = 0`.
    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let a = self.inner.half_periods[axis];
        let h = self.inner.spacings[axis];
        (0..self.inner.sizes[axis])
            .map(|j| -a + j as f64 * h)
            .collect()
    }

    /// Multi-index of a flat sample index.
    pub fn unravel(&self, mut index: usize) -> [usize; 3] {
        let sizes = self.sizes();
        let mut out = [0usize; 3];
        for axis in (0..sizes.len()).rev() {
            out[axis] = index % sizes[axis];
            index /= sizes[axis];
        }
        out
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.sizes())
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Physical position of a flat sample index.
    pub fn position(&self, index: usize) -> [f64; 3] {
        let idx = self.unravel(index);
        let mut out = [0.0; 3];
        for axis in 0..self.dim() {
            out[axis] = -self.inner.half_periods[axis] + idx[axis] as f64 * self.inner.spacings[axis];
        }
        out
    }

    /// Squared wavenumber magnitude for every spectral sample, in storage order.
    pub fn k_squared(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for axis in 0..self.dim() {
            self.for_each_axis_value(axis, &mut out, |acc, k| *acc += k * k);
        }
        out
    }

    /// Wavenumber along `axis` for every spectral sample, in storage order.
    pub fn k_axis(&self, axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.for_each_axis_value(axis, &mut out, |acc, k| *acc = k);
        out
    }

    fn for_each_axis_value(&self, axis: usize, out: &mut [f64], f: impl Fn(&mut f64, f64)) {
        let sizes = self.sizes();
        let stride: usize = sizes[axis + 1..].iter().product();
        let n = sizes[axis];
        let ks = self.wavenumbers(axis);
        for (i, acc) in out.iter_mut().enumerate() {
            f(acc, ks[(i / stride) % n]);
        }
    }

    pub(crate) fn fft(&self) -> &FftEngine {
        self.inner.fft.get_or_init(|| FftEngine::new(&self.inner.sizes))
    }

    /// Two grids describe the same torus and sampling.
    pub fn same_as(&self, other: &TorusGrid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.sizes == other.inner.sizes
                && self.inner.half_periods == other.inner.half_periods)
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("sizes", &self.inner.sizes)
            .field("half_periods", &self.inner.half_periods)
            .finish()
    }
}

fn wavenumber_table(n: usize, length: f64) -> Vec<f64> {
    let scale = 2.0 * PI / length;
    (0..n)
        .map(|j| {
            if j < n / 2 {
                j as f64 * scale
            } else if j == n / 2 {
                0.0
            } else {
                (j as f64 - n as f64) * scale
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_of_unit_torus() {
        let g = TorusGrid::torus(2, &[8, 8], 1.0).unwrap();
        for &h in g.spacings() {
            assert!((h - 2.0 * PI / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn half_period_scales_with_n() {
        let g = TorusGrid::torus(3, &[16, 16, 16], 2.0).unwrap();
        for &a in g.half_periods() {
            assert!((a - 2.0 * PI).abs() < 1e-15);
        }
        for (h, &n) in g.spacings().iter().zip(g.sizes()) {
            assert!((h * n as f64 - 4.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_odd_and_small_sizes() {
        assert!(matches!(
            TorusGrid::torus(2, &[7, 8], 1.0),
            Err(GridError::Size { axis: 0, size: 7 })
        ));
        assert!(TorusGrid::torus(2, &[6, 8], 1.0).is_err());
        assert!(matches!(
            TorusGrid::torus(4, &[8, 8, 8, 8], 1.0),
            Err(GridError::Dimension(4))
        ));
        assert!(TorusGrid::torus(2, &[8, 8], 0.0).is_err());
    }

    #[test]
    fn wavenumbers_are_multiples_of_one_over_n() {
        let n = 3.0;
        let g = TorusGrid::torus(2, &[16, 8], n).unwrap();
        for axis in 0..2 {
            let ks = g.wavenumbers(axis);
            assert_eq!(ks[0], 0.0);
            for &k in ks {
                let m = k * n;
                assert!((m - m.round()).abs() < 1e-12);
            }
        }
        assert_eq!(g.wavenumbers(0)[1] * n, 1.0);
        assert_eq!(g.wavenumbers(0)[15] * n, -1.0);
    }

    #[test]
    fn ravel_round_trip() {
        let g = TorusGrid::torus(3, &[8, 10, 12], 1.0).unwrap();
        for i in [0, 1, 17, 959] {
            let idx = g.unravel(i);
            assert_eq!(g.ravel(&idx[..3]), i);
        }
        assert_eq!(g.strides(), vec![120, 12, 1]);
    }

    #[test]
    fn centre_sample_is_origin() {
        let g = TorusGrid::torus(2, &[8, 8], 1.0).unwrap();
        assert!(g.coords(0)[4].abs() < 1e-15);
    }
}
