//! Sampled fields on a [`TorusGrid`].

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::TorusGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("expected {expected} samples, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Discrete complex order parameter, row-major over the grid.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: &TorusGrid, values: Vec<Complex64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Internal constructor for values already known to be finite and sized.
    pub(crate) fn from_raw(grid: &TorusGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &TorusGrid, value: Complex64) -> Self {
        Self::from_raw(grid, vec![value; grid.len()])
    }

    /// Samples `f(x)` at every grid point; `x` has `grid.dim()` entries.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Result<Self, FieldError> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| f(&grid.position(i)[..dim]))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|z| z * factor).collect())
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn min_modulus(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    /// `eta = 1 - |v|^2` at every sample.
    pub fn eta(&self) -> Vec<f64> {
        self.values.iter().map(|z| 1.0 - z.norm_sqr()).collect()
    }

    /// Circular shift of samples by `shift[axis]` points along each axis.
    pub fn roll(&self, shift: &[isize]) -> Self {
        let sizes = self.grid.sizes();
        let dim = sizes.len();
        let mut out = vec![Complex64::default(); self.values.len()];
        for (i, &z) in self.values.iter().enumerate() {
            let idx = self.grid.unravel(i);
            let mut target = [0usize; 3];
            for axis in 0..dim {
                let n = sizes[axis] as isize;
                target[axis] = (idx[axis] as isize + shift[axis]).rem_euclid(n) as usize;
            }
            out[self.grid.ravel(&target[..dim])] = z;
        }
        Self::from_raw(&self.grid, out)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &ComplexField) -> Result<Self, FieldError> {
        if !self.grid.same_as(&other.grid) {
            return Err(FieldError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b * s)
            .collect();
        Ok(Self::from_raw(&self.grid, values))
    }

    /// Relative L2 distance `|self - other| / |other|` (sample norm).
    pub fn relative_distance(&self, other: &ComplexField) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = other.values.iter().map(|b| b.norm_sqr()).sum();
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }
}

impl PartialEq for ComplexField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

/// One complex component per spatial axis, e.g. the gradient of a field.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: TorusGrid,
    components: Vec<Vec<Complex64>>,
}

impl VectorField {
    pub(crate) fn from_components(grid: &TorusGrid, components: Vec<Vec<Complex64>>) -> Self {
        debug_assert_eq!(components.len(), grid.dim());
        Self {
            grid: grid.clone(),
            components,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[Complex64] {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.components
    }

    /// `|grad v|^2` per sample.
    pub fn norm_sqr(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for comp in &self.components {
            for (acc, z) in out.iter_mut().zip(comp) {
                *acc += z.norm_sqr();
            }
        }
        out
    }
}

/// Real-valued samples on a grid.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: &TorusGrid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self, FieldError> {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.position(i)[..dim])).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField::from_raw(
            &self.grid,
            self.values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = TorusGrid::torus(2, &[8, 8], 1.0).unwrap();
        assert!(matches!(
            ComplexField::new(&g, vec![Complex64::default(); 63]),
            Err(FieldError::Length { .. })
        ));
        let mut vals = vec![Complex64::new(1.0, 0.0); 64];
        vals[5].im = f64::NAN;
        assert_eq!(ComplexField::new(&g, vals), Err(FieldError::NonFinite(5)));
    }

    #[test]
    fn roll_is_invertible() {
        let g = TorusGrid::torus(2, &[8, 10], 1.0).unwrap();
        let v = ComplexField::from_fn(&g, |x| Complex64::new(x[0], x[1] * 2.0)).unwrap();
        let back = v.roll(&[3, -4]).roll(&[-3, 4]);
        assert_eq!(back.values(), v.values());
    }
}
