//! Spectral transforms, derivatives and quadrature on the torus.
//!
//! Derivatives act on the trigonometric interpolant of the samples. The
//! Nyquist mode is dropped from first derivatives, which makes the discrete
//! Laplacian the exact square of the discrete gradient; the functionals and
//! their gradients are then mutually consistent to rounding error.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::field::{ComplexField, RealField, VectorField};
use crate::grid::TorusGrid;

const SUM_BLOCK: usize = 1024;

/// Forward transform of a sample vector (unnormalized).
pub fn forward(grid: &TorusGrid, values: &[Complex64]) -> Vec<Complex64> {
    let mut out = values.to_vec();
    grid.fft().forward(&mut out);
    out
}

/// Inverse transform (normalized) of spectral coefficients.
pub fn inverse(grid: &TorusGrid, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut out = coeffs.to_vec();
    grid.fft().inverse(&mut out);
    out
}

pub fn forward_in_place(grid: &TorusGrid, values: &mut [Complex64]) {
    grid.fft().forward(values);
}

pub fn inverse_in_place(grid: &TorusGrid, coeffs: &mut [Complex64]) {
    grid.fft().inverse(coeffs);
}

pub fn forward_real(grid: &TorusGrid, values: &[f64]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    grid.fft().forward(&mut out);
    out
}

/// Multiplies spectral coefficients by a symbol evaluated from the
/// per-axis wavenumbers `k[0..dim]`.
pub fn apply_symbol(
    grid: &TorusGrid,
    coeffs: &mut [Complex64],
    symbol: impl Fn(&[f64]) -> Complex64 + Sync,
) {
    let dim = grid.dim();
    let sizes = grid.sizes().to_vec();
    let tables: Vec<&[f64]> = (0..dim).map(|a| grid.wavenumbers(a)).collect();
    let row = *sizes.last().unwrap();
    coeffs.par_chunks_mut(row).enumerate().for_each(|(r, chunk)| {
        let mut k = [0.0; 3];
        let mut rest = r;
        for axis in (0..dim - 1).rev() {
            k[axis] = tables[axis][rest % sizes[axis]];
            rest /= sizes[axis];
        }
        for (j, z) in chunk.iter_mut().enumerate() {
            k[dim - 1] = tables[dim - 1][j];
            *z *= symbol(&k[..dim]);
        }
    });
}

/// Spectral derivative along `axis`.
pub fn derivative(v: &ComplexField, axis: usize) -> ComplexField {
    let grid = v.grid();
    let mut c = forward(grid, v.values());
    apply_symbol(grid, &mut c, |k| Complex64::new(0.0, k[axis]));
    grid.fft().inverse(&mut c);
    ComplexField::from_raw(grid, c)
}

/// Spectral gradient: one component per axis.
pub fn gradient(v: &ComplexField) -> VectorField {
    let grid = v.grid();
    let c = forward(grid, v.values());
    let comps = (0..grid.dim())
        .map(|axis| {
            let mut d = c.clone();
            apply_symbol(grid, &mut d, |k| Complex64::new(0.0, k[axis]));
            grid.fft().inverse(&mut d);
            d
        })
        .collect();
    VectorField::from_components(grid, comps)
}

pub fn laplacian(v: &ComplexField) -> ComplexField {
    let grid = v.grid();
    let mut c = forward(grid, v.values());
    apply_symbol(grid, &mut c, |k| {
        Complex64::new(-k.iter().map(|x| x * x).sum::<f64>(), 0.0)
    });
    grid.fft().inverse(&mut c);
    ComplexField::from_raw(grid, c)
}

/// Spectral derivative of real samples along `axis`.
pub fn derivative_real(grid: &TorusGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let mut c = forward_real(grid, values);
    apply_symbol(grid, &mut c, |k| Complex64::new(0.0, k[axis]));
    grid.fft().inverse(&mut c);
    c.into_iter().map(|z| z.re).collect()
}

/// Deterministic blocked pairwise summation.
pub fn sum(values: &[f64]) -> f64 {
    let partials: Vec<f64> = values
        .par_chunks(SUM_BLOCK)
        .map(|c| c.iter().sum::<f64>())
        .collect();
    pairwise(&partials)
}

fn pairwise(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => pairwise(&values[..n / 2]) + pairwise(&values[n / 2..]),
    }
}

/// Sum of `f(i)` over `0..n`, blocked and pairwise, independent of thread count.
pub fn sum_by(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let blocks = n.div_ceil(SUM_BLOCK);
    let partials: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let end = ((b + 1) * SUM_BLOCK).min(n);
            (b * SUM_BLOCK..end).map(&f).sum::<f64>()
        })
        .collect();
    pairwise(&partials)
}

/// Trapezoid rule on the torus; exact for trigonometric polynomials of
/// degree below the grid size.
pub fn integrate(grid: &TorusGrid, values: &[f64]) -> f64 {
    sum(values) * grid.cell_volume()
}

pub fn integrate_complex(grid: &TorusGrid, values: &[Complex64]) -> Complex64 {
    let re = sum_by(values.len(), |i| values[i].re);
    let im = sum_by(values.len(), |i| values[i].im);
    Complex64::new(re, im) * grid.cell_volume()
}

pub fn integrate_field(f: &RealField) -> f64 {
    integrate(f.grid(), f.values())
}

/// `int <a, b>` with `<z1, z2> = Re(conj(z1) z2)`.
pub fn inner(grid: &TorusGrid, a: &[Complex64], b: &[Complex64]) -> f64 {
    sum_by(a.len(), |i| (a[i].conj() * b[i]).re) * grid.cell_volume()
}

/// `int <a, b>` evaluated from spectral coefficients via Parseval.
pub fn inner_spectral(grid: &TorusGrid, a: &[Complex64], b: &[Complex64]) -> f64 {
    sum_by(a.len(), |i| (a[i].conj() * b[i]).re) * grid.cell_volume() / grid.len() as f64
}

/// L2 norm of samples.
pub fn l2_norm(grid: &TorusGrid, values: &[Complex64]) -> f64 {
    inner(grid, values, values).sqrt()
}

pub fn l2_norm_real(grid: &TorusGrid, values: &[f64]) -> f64 {
    (sum_by(values.len(), |i| values[i] * values[i]) * grid.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit_grid() -> TorusGrid {
        TorusGrid::torus(2, &[16, 16], 1.0).unwrap()
    }

    #[test]
    fn plane_wave_derivatives() {
        let g = unit_grid();
        let v = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, x[0])).unwrap();
        let grad = gradient(&v);
        for (i, z) in v.values().iter().enumerate() {
            assert!((grad.component(0)[i] - Complex64::i() * z).norm() < 1e-13);
            assert!(grad.component(1)[i].norm() < 1e-13);
        }
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = unit_grid();
        let v = ComplexField::constant(&g, Complex64::new(0.3, -2.0));
        let grad = gradient(&v);
        assert!(grad.norm_sqr().iter().all(|&x| x < 1e-26));
    }

    #[test]
    fn volume_of_unit_torus() {
        let g = unit_grid();
        let ones = vec![1.0; g.len()];
        assert!((integrate(&g, &ones) - 4.0 * PI * PI).abs() < 1e-12);
        let cosine: Vec<f64> = (0..g.len()).map(|i| g.position(i)[0].cos()).collect();
        assert!(integrate(&g, &cosine).abs() < 1e-13);
    }

    #[test]
    fn pairwise_sum_matches_naive_loop() {
        let xs: Vec<f64> = (0..100_000).map(|i| ((i as f64) * 0.731).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((sum(&xs) - naive).abs() < 1e-9);
        assert_eq!(sum(&xs), sum(&xs));
    }

    #[test]
    fn laplacian_is_square_of_gradient() {
        let g = TorusGrid::torus(2, &[16, 8], 1.5).unwrap();
        let v = ComplexField::from_fn(&g, |x| {
            Complex64::new((x[0] / 1.5).sin() * (2.0 * x[1] / 1.5).cos(), (x[1] / 1.5).sin())
        })
        .unwrap();
        let lap = laplacian(&v);
        let grad = gradient(&v);
        let mut second = vec![Complex64::default(); g.len()];
        for axis in 0..2 {
            let c = ComplexField::from_raw(&g, grad.component(axis).to_vec());
            let d = derivative(&c, axis);
            for (acc, z) in second.iter_mut().zip(d.values()) {
                *acc += z;
            }
        }
        for (a, b) in lap.values().iter().zip(&second) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_fourth_order_differences() {
        let g = TorusGrid::torus(2, &[128, 128], 1.0).unwrap();
        let v = ComplexField::from_fn(&g, |x| {
            Complex64::new((x[0]).sin() * (2.0 * x[1]).cos(), (x[0] + x[1]).cos())
        })
        .unwrap();
        let grad = gradient(&v);
        let h = g.spacings()[0];
        let n = 128usize;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let at = |a: usize, b: usize| v.values()[(a % n) * n + (b % n)];
                let fd = (at(i + n - 2, j) - at(i + n - 1, j) * 8.0 + at(i + 1, j) * 8.0 - at(i + 2, j)) / (12.0 * h);
                worst = worst.max((fd - grad.component(0)[i * n + j]).norm());
            }
        }
        assert!(worst < 5.0 * h.powi(4), "{worst}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn band_limited_round_trip(coefs in proptest::collection::vec(-1.0f64..1.0, 12)) {
            let g = unit_grid();
            let v = ComplexField::from_fn(&g, |x| {
                let mut z = Complex64::default();
                for (m, pair) in coefs.chunks(2).enumerate() {
                    let kx = (m % 3) as f64 + 1.0;
                    let ky = (m / 3) as f64;
                    z += Complex64::new(pair[0], pair[1]) * Complex64::from_polar(1.0, kx * x[0] + ky * x[1]);
                }
                z
            }).unwrap();
            let back = inverse(&g, &forward(&g, v.values()));
            let rel = ComplexField::from_raw(&g, back).relative_distance(&v);
            prop_assert!(rel <= 1e-12);
        }
    }
}
