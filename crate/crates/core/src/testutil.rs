//! Shared fixtures for unit tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::field::ComplexField;
use crate::grid::TorusGrid;

/// `1 + sum c_k exp(i k.x)` with a few random low modes.
pub fn random_band_limited(grid: &TorusGrid, seed: u64, modes: usize, amp: f64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let terms: Vec<(Vec<f64>, Complex64)> = (0..modes)
        .map(|_| {
            let k: Vec<f64> = (0..dim)
                .map(|a| {
                    let m = rng.gen_range(-3i32..=3) as f64;
                    m * PI / grid.half_periods()[a]
                })
                .collect();
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
            (k, c)
        })
        .collect();
    ComplexField::from_fn(grid, |x| {
        let mut z = Complex64::new(1.0, 0.0);
        for (k, c) in &terms {
            let phase: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
            z += c * Complex64::from_polar(1.0, phase);
        }
        z
    })
    .unwrap()
}
