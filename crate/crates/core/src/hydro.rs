//! Lifting `v = rho exp(i phi)` and hydrodynamic functionals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::field::ComplexField;
use crate::functionals::energy_density;
use crate::grid::TorusGrid;
use crate::spectral::{self, integrate, sum_by};

/// Below this modulus the phase is not unwrapped.
pub const LIFT_THRESHOLD_FLOOR: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error("lift threshold {0} is below the floor {LIFT_THRESHOLD_FLOOR}")]
    ThresholdBelowFloor(f64),
    #[error("min modulus {min} is below the lift threshold {threshold}")]
    ModulusTooSmall { min: f64, threshold: f64 },
    #[error("phase winds across the link at sample {index} along axis {axis}")]
    NonzeroWinding { index: usize, axis: usize },
}

/// Lifted field: modulus, single-valued phase and `eta = 1 - rho^2`.
#[derive(Clone, Debug)]
pub struct HydroField {
    grid: TorusGrid,
    rho: Vec<f64>,
    phi: Vec<f64>,
    eta: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct Link {
    weight: f64,
    from: usize,
    to: usize,
}

impl Eq for Link {}

impl PartialOrd for Link {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Link {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| other.to.cmp(&self.to))
    }
}

/// Periodic neighbour of sample `i` along `axis` in direction `dir` (+1/-1).
pub(crate) fn neighbour(grid: &TorusGrid, i: usize, axis: usize, dir: isize) -> usize {
    let n = grid.sizes()[axis];
    let stride: usize = grid.sizes()[axis + 1..].iter().product();
    let j = (i / stride) % n;
    let jn = (j as isize + dir).rem_euclid(n as isize) as usize;
    i - j * stride + jn * stride
}

/// Phase increment `arg(b conj(a))`, antisymmetric in `(a, b)` also when
/// `b conj(a)` is a negative real.
pub(crate) fn increment(a: Complex64, b: Complex64) -> f64 {
    let w = b * a.conj();
    if w.im == 0.0 && w.re < 0.0 {
        let forward = (a.re, a.im) < (b.re, b.im);
        return if forward { PI } else { -PI };
    }
    w.arg()
}

/// Maximum-weight spanning tree unwrapping; links are weighted by the
/// smaller modulus of their end points.
fn unwrap(v: &ComplexField) -> Vec<f64> {
    let grid = v.grid();
    let vals = v.values();
    let modulus = v.modulus();
    let len = vals.len();
    let mut phi = vec![0.0; len];
    let mut done = vec![false; len];
    let start = (0..len)
        .max_by(|&a, &b| modulus[a].total_cmp(&modulus[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    phi[start] = vals[start].arg();
    done[start] = true;
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Link>, from: usize, done: &[bool]| {
        for axis in 0..grid.dim() {
            for dir in [-1, 1] {
                let to = neighbour(grid, from, axis, dir);
                if !done[to] {
                    heap.push(Link {
                        weight: modulus[from].min(modulus[to]),
                        from,
                        to,
                    });
                }
            }
        }
    };
    push(&mut heap, start, &done);
    while let Some(link) = heap.pop() {
        if done[link.to] {
            continue;
        }
        phi[link.to] = phi[link.from] + increment(vals[link.from], vals[link.to]);
        done[link.to] = true;
        push(&mut heap, link.to, &done);
    }
    phi
}

impl HydroField {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `rho exp(i phi)`.
    pub fn reconstruct(&self) -> ComplexField {
        let values = self
            .rho
            .iter()
            .zip(&self.phi)
            .map(|(&r, &p)| Complex64::from_polar(r, p))
            .collect();
        ComplexField::from_raw(&self.grid, values)
    }

    /// Spectral derivative of the (periodic) phase along `axis`.
    pub fn phase_derivative(&self, axis: usize) -> Vec<f64> {
        spectral::derivative_real(&self.grid, &self.phi, axis)
    }

    pub fn rho_derivative(&self, axis: usize) -> Vec<f64> {
        spectral::derivative_real(&self.grid, &self.rho, axis)
    }
}

/// Lifts `v` once its modulus stays above `threshold` and its phase is single valued.
pub fn lift(v: &ComplexField, threshold: f64) -> Result<HydroField, LiftError> {
    if threshold.is_nan() || threshold < LIFT_THRESHOLD_FLOOR {
        return Err(LiftError::ThresholdBelowFloor(threshold));
    }
    let min = v.min_modulus();
    if min < threshold {
        return Err(LiftError::ModulusTooSmall { min, threshold });
    }
    let grid = v.grid();
    let vals = v.values();
    let phi = unwrap(v);
    for i in 0..vals.len() {
        for axis in 0..grid.dim() {
            let j = neighbour(grid, i, axis, 1);
            let jump = phi[j] - phi[i] - increment(vals[i], vals[j]);
            if jump.abs() > PI {
                return Err(LiftError::NonzeroWinding { index: i, axis });
            }
        }
    }
    let rho = v.modulus();
    let eta = rho.iter().map(|r| 1.0 - r * r).collect();
    Ok(HydroField {
        grid: grid.clone(),
        rho,
        phi,
        eta,
    })
}

/// `1/2 int eta d_1 phi`.
pub fn momentum_hydro(h: &HydroField) -> f64 {
    let d1 = h.phase_derivative(0);
    let eta = h.eta();
    0.5 * sum_by(eta.len(), |i| eta[i] * d1[i]) * h.grid.cell_volume()
}

/// `int rho^2 |grad phi|^2`.
pub fn rho2_grad_phi_sq(h: &HydroField) -> f64 {
    let grads: Vec<Vec<f64>> = (0..h.grid.dim()).map(|a| h.phase_derivative(a)).collect();
    let r = &h.rho;
    sum_by(r.len(), |i| r[i] * r[i] * grads.iter().map(|g| g[i] * g[i]).sum::<f64>()) * h.grid.cell_volume()
}

/// Both sides of the planar identity `int |grad rho|^2 (1 + 1/rho^2) = int eta |grad phi|^2`.
pub fn planar_identity_sides(h: &HydroField) -> (f64, f64) {
    let dim = h.grid.dim();
    let dphi: Vec<Vec<f64>> = (0..dim).map(|a| h.phase_derivative(a)).collect();
    let drho: Vec<Vec<f64>> = (0..dim).map(|a| h.rho_derivative(a)).collect();
    let r = &h.rho;
    let lhs: Vec<f64> = (0..r.len())
        .map(|i| drho.iter().map(|g| g[i] * g[i]).sum::<f64>() * (1.0 + 1.0 / (r[i] * r[i])))
        .collect();
    let rhs: Vec<f64> = (0..r.len())
        .map(|i| h.eta[i] * dphi.iter().map(|g| g[i] * g[i]).sum::<f64>())
        .collect();
    (integrate(&h.grid, &lhs), integrate(&h.grid, &rhs))
}

/// Largest pointwise excess of `|(rho^2 - 1) d_1 phi|` over `sqrt(2) e(v) / rho`,
/// relative to `max(e, 1e-300)`. Non-positive when the pointwise bound holds.
/// Phase derivative taken from the current, `Im(conj(v) d_1 v) / rho^2`.
pub fn pointwise_momentum_bound_excess(v: &ComplexField) -> f64 {
    let e = energy_density(v);
    let d1 = spectral::derivative(v, 0);
    v.values()
        .iter()
        .zip(d1.values())
        .zip(&e)
        .map(|((z, dz), &ei)| {
            let r2 = z.norm_sqr();
            let phi1 = (z.conj() * dz).im / r2;
            let lhs = ((r2 - 1.0) * phi1).abs();
            let rhs = 2f64.sqrt() * ei / r2.sqrt();
            (lhs - rhs) / ei.max(1e-300)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::momentum_torus;
    use crate::testutil::random_band_limited;
    use proptest::prelude::*;

    fn unit_grid() -> TorusGrid {
        TorusGrid::torus(2, &[32, 32], 1.0).unwrap()
    }

    #[test]
    fn constant_phase() {
        let g = unit_grid();
        let v = ComplexField::constant(&g, Complex64::from_polar(1.0, 0.3));
        let h = lift(&v, 0.5).unwrap();
        assert!(h.rho().iter().all(|r| (r - 1.0).abs() < 1e-15));
        assert!(h.phi().iter().all(|p| (p - 0.3).abs() < 1e-15));
        assert_eq!(momentum_hydro(&h), 0.0);
    }

    #[test]
    fn recovers_modulus_and_phase() {
        let g = unit_grid();
        let v = ComplexField::from_fn(&g, |x| {
            Complex64::from_polar(1.0 - 0.1 * x[0].cos(), 0.05 * x[0].sin())
        })
        .unwrap();
        let h = lift(&v, 0.5).unwrap();
        for i in 0..g.len() {
            let x = g.position(i)[0];
            assert!((h.rho()[i] - (1.0 - 0.1 * x.cos())).abs() < 1e-10);
            assert!((h.phi()[i] - 0.05 * x.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn vortex_is_not_liftable() {
        let g = unit_grid();
        let off = g.spacings()[0] / 2.0;
        let v = ComplexField::from_fn(&g, |x| {
            let z = Complex64::new(x[0] - off, x[1] - off);
            z / (z.norm_sqr() + 0.01).sqrt()
        })
        .unwrap();
        assert!(matches!(lift(&v, 0.1), Err(LiftError::NonzeroWinding { .. })));
    }

    #[test]
    fn global_winding_is_not_liftable() {
        let g = TorusGrid::torus(2, &[32, 32], 2.0).unwrap();
        let v = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, x[0] / 2.0)).unwrap();
        assert!(matches!(lift(&v, 0.5), Err(LiftError::NonzeroWinding { .. })));
    }

    #[test]
    fn small_modulus_and_low_threshold_are_rejected() {
        let g = unit_grid();
        let v = ComplexField::constant(&g, Complex64::new(0.2, 0.0));
        assert!(matches!(lift(&v, 0.5), Err(LiftError::ModulusTooSmall { .. })));
        assert!(matches!(lift(&v, 0.05), Err(LiftError::ThresholdBelowFloor(_))));
    }

    #[test]
    fn phase_only_field_has_no_hydro_momentum() {
        let g = unit_grid();
        let v = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, 0.4 * x[0].sin() * x[1].cos())).unwrap();
        let h = lift(&v, 0.5).unwrap();
        assert!(momentum_hydro(&h).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn lift_and_momentum(seed in 0u64..500, theta in 0.0f64..std::f64::consts::TAU) {
            let g = TorusGrid::torus(2, &[64, 64], 1.5).unwrap();
            let v = random_band_limited(&g, seed, 4, 0.04).scale(Complex64::from_polar(1.0, theta));
            let h = lift(&v, 0.5).unwrap();
            let back = h.reconstruct();
            prop_assert!(back.relative_distance(&v) <= 1e-10);
            let eta_ok = h.eta().iter().zip(h.rho()).all(|(e, r)| (e - (1.0 - r * r)).abs() < 1e-15);
            prop_assert!(eta_ok);
            let pt = momentum_torus(&v);
            let ph = momentum_hydro(&h);
            prop_assert!((pt - ph).abs() <= 1e-8 * pt.abs().max(1e-3), "{} {}", pt, ph);
            prop_assert!(pointwise_momentum_bound_excess(&v) <= 1e-12);
        }
    }
}
