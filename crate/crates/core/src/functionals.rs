//! Ginzburg-Landau energy and scalar momentum on the torus.

use num_complex::Complex64;

use crate::field::ComplexField;
use crate::spectral::{self, integrate, sum_by};

/// Local energy density `e(v) = |grad v|^2 / 2 + (1 - |v|^2)^2 / 4`.
pub fn energy_density(v: &ComplexField) -> Vec<f64> {
    let grad = spectral::gradient(v);
    let g2 = grad.norm_sqr();
    v.values()
        .iter()
        .zip(g2)
        .map(|(z, g)| 0.5 * g + 0.25 * (1.0 - z.norm_sqr()).powi(2))
        .collect()
}

/// `E_n(v) = int [ |grad v|^2 / 2 + (1 - |v|^2)^2 / 4 ]`.
pub fn energy(v: &ComplexField) -> f64 {
    integrate(v.grid(), &energy_density(v))
}

/// Kinetic and potential parts of the energy, `(1/2 int |grad v|^2, 1/4 int eta^2)`.
pub fn energy_parts(v: &ComplexField) -> (f64, f64) {
    let grid = v.grid();
    let grad = spectral::gradient(v);
    let g2 = grad.norm_sqr();
    let vals = v.values();
    let kinetic = 0.5 * integrate(grid, &g2);
    let potential = 0.25 * sum_by(vals.len(), |i| (1.0 - vals[i].norm_sqr()).powi(2)) * grid.cell_volume();
    (kinetic, potential)
}

/// Torus momentum `p_n(v) = 1/2 int <i d_1 v, v>`.
pub fn momentum_torus(v: &ComplexField) -> f64 {
    let d1 = spectral::derivative(v, 0);
    let vals = v.values();
    let dv = d1.values();
    0.5 * sum_by(vals.len(), |i| ((Complex64::i() * dv[i]).conj() * vals[i]).re) * v.grid().cell_volume()
}

/// Affine momentum `1/2 int <i d_1 v, v - 1>`, summed through the integrand
/// `d_1(Re v) Im v - d_1(Im v) (Re v - 1)`.
pub fn momentum_affine(v: &ComplexField) -> f64 {
    let d1 = spectral::derivative(v, 0);
    let vals = v.values();
    let dv = d1.values();
    0.5 * sum_by(vals.len(), |i| dv[i].re * vals[i].im - dv[i].im * (vals[i].re - 1.0))
        * v.grid().cell_volume()
}

/// L2 gradient of the energy, `-Lap v - v (1 - |v|^2)`.
pub fn energy_gradient(v: &ComplexField) -> ComplexField {
    let lap = spectral::laplacian(v);
    let values = v
        .values()
        .iter()
        .zip(lap.values())
        .map(|(z, l)| -l - z * (1.0 - z.norm_sqr()))
        .collect();
    ComplexField::from_raw(v.grid(), values)
}

/// L2 gradient of the torus momentum, `i d_1 v`.
pub fn momentum_gradient(v: &ComplexField) -> ComplexField {
    let d1 = spectral::derivative(v, 0);
    d1.scale(Complex64::i())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::testutil::random_band_limited;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit_grid() -> TorusGrid {
        TorusGrid::torus(2, &[16, 16], 1.0).unwrap()
    }

    #[test]
    fn ground_state_has_zero_energy() {
        let g = unit_grid();
        let v = ComplexField::constant(&g, Complex64::new(1.0, 0.0));
        assert_eq!(energy(&v), 0.0);
        assert_eq!(momentum_torus(&v), 0.0);
        assert_eq!(momentum_affine(&v), 0.0);
    }

    #[test]
    fn zero_field_energy_is_potential_only() {
        let g = unit_grid();
        let v = ComplexField::constant(&g, Complex64::default());
        assert!((energy(&v) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_momentum() {
        let g = unit_grid();
        let v = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, x[0])).unwrap();
        assert!((momentum_torus(&v) + 2.0 * PI * PI).abs() < 1e-11);
        assert!((momentum_affine(&v) + 2.0 * PI * PI).abs() < 1e-11);
    }

    #[test]
    fn constant_has_zero_momentum() {
        let g = unit_grid();
        let v = ComplexField::constant(&g, Complex64::from_polar(0.7, 1.1));
        assert!(momentum_torus(&v).abs() < 1e-15);
    }

    #[test]
    fn torus_and_affine_momentum_agree_on_bump() {
        let g = TorusGrid::torus(2, &[32, 32], 2.0).unwrap();
        let v = ComplexField::from_fn(&g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            Complex64::new(1.0, 0.0) + Complex64::new(0.2, 0.3) * (-r2).exp() * Complex64::from_polar(1.0, x[0])
        })
        .unwrap();
        let a = momentum_torus(&v);
        let b = momentum_affine(&v);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} {b}");
    }

    #[test]
    fn gradients_match_central_differences() {
        let g = TorusGrid::torus(2, &[16, 16], 1.2).unwrap();
        for seed in 0..4 {
            let v = random_band_limited(&g, seed, 6, 0.3);
            let w = random_band_limited(&g, seed + 100, 6, 0.5).axpy(-1.0, &ComplexField::constant(&g, Complex64::new(1.0, 0.0))).unwrap();
            let h = 1e-5;
            let vp = v.axpy(h, &w).unwrap();
            let vm = v.axpy(-h, &w).unwrap();
            let fd_e = (energy(&vp) - energy(&vm)) / (2.0 * h);
            let fd_p = (momentum_torus(&vp) - momentum_torus(&vm)) / (2.0 * h);
            let de = spectral::inner(&g, energy_gradient(&v).values(), w.values());
            let dp = spectral::inner(&g, momentum_gradient(&v).values(), w.values());
            assert!((fd_e - de).abs() <= 1e-6 * de.abs().max(1.0), "{fd_e} {de}");
            assert!((fd_p - dp).abs() <= 1e-6 * dp.abs().max(1.0), "{fd_p} {dp}");
        }
    }

    /// Plain nested loops over the samples, no shared helpers.
    #[test]
    fn energy_matches_direct_summation() {
        let g = TorusGrid::torus(2, &[16, 16], 1.0).unwrap();
        let v = random_band_limited(&g, 7, 6, 0.3);
        let grad = spectral::gradient(&v);
        let mut acc = 0.0;
        for i in 0..g.len() {
            let z = v.values()[i];
            let g2 = grad.component(0)[i].norm_sqr() + grad.component(1)[i].norm_sqr();
            acc += 0.5 * g2 + 0.25 * (1.0 - z.norm_sqr()).powi(2);
        }
        acc *= g.spacings()[0] * g.spacings()[1];
        let e = energy(&v);
        assert!((acc - e).abs() <= 1e-10 * e);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn momentum_forms_agree(seed in 0u64..1000) {
            let g = TorusGrid::torus(2, &[16, 16], 1.3).unwrap();
            let v = random_band_limited(&g, seed, 6, 0.3);
            let a = momentum_torus(&v);
            let b = momentum_affine(&v);
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }

        #[test]
        fn conjugation_symmetry(seed in 0u64..1000) {
            let g = TorusGrid::torus(2, &[16, 16], 1.0).unwrap();
            let v = random_band_limited(&g, seed, 5, 0.4);
            let w = v.conj();
            prop_assert!((momentum_torus(&w) + momentum_torus(&v)).abs() <= 1e-10 * momentum_torus(&v).abs().max(1.0));
            prop_assert!((energy(&w) - energy(&v)).abs() <= 1e-10 * energy(&v));
            prop_assert!(energy(&v) >= 0.0);
        }

        #[test]
        fn translation_invariance(seed in 0u64..1000, sx in -8isize..8, sy in -8isize..8) {
            let g = TorusGrid::torus(2, &[16, 16], 1.0).unwrap();
            let v = random_band_limited(&g, seed, 5, 0.4);
            let w = v.roll(&[sx, sy]);
            prop_assert!((energy(&w) - energy(&v)).abs() <= 1e-11 * energy(&v));
            prop_assert!((momentum_torus(&w) - momentum_torus(&v)).abs() <= 1e-11 * momentum_torus(&v).abs().max(1.0));
        }
    }
}
