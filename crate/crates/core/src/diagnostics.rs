//! Identity residuals and inequality checks for a `(field, speed)` pair.
//!
//! JSON keys of [`DiagnosticsReport`] are stable: `energy`, `momentum`,
//! `sigma`, `c`, `eps`, `min_modulus`, `pohozaev_res1`, `pohozaev_res2`,
//! `pohozaev_combined_res`, `liftable`, `hydro_res_cp`, `hydro_res_2d`,
//! `eta_l2`, `twc_residual`, `modulus_bound_ok`, `eta_fourier_res`,
//! `speed_bound_ratio`, `speed_bound_flag`.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ComplexField;
use crate::functionals::{energy, momentum_torus};
use crate::hydro::{self, lift, HydroField, LIFT_THRESHOLD_FLOOR};
use crate::spectral::{self, sum_by};

/// Threshold used when the diagnostics lift a field.
pub const DIAGNOSTIC_LIFT_THRESHOLD: f64 = LIFT_THRESHOLD_FLOOR;

/// Ratios `|c| |Sigma| / E` above this are flagged.
pub const SPEED_BOUND_FLAG: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("field is not liftable: {0}")]
    NotLiftable(#[from] hydro::LiftError),
    #[error("momentum {0} is not positive")]
    NonpositiveMomentum(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub energy: f64,
    pub momentum: f64,
    pub sigma: f64,
    pub c: f64,
    pub eps: f64,
    pub min_modulus: f64,
    pub pohozaev_res1: f64,
    pub pohozaev_res2: Vec<f64>,
    pub pohozaev_combined_res: f64,
    pub liftable: bool,
    pub hydro_res_cp: Option<f64>,
    pub hydro_res_2d: Option<f64>,
    /// Planar `|int eta^2 - 2 c p| / max(int eta^2, 1)`.
    pub eta_l2: Option<f64>,
    pub twc_residual: f64,
    pub modulus_bound_ok: Option<bool>,
    pub eta_fourier_res: Option<f64>,
    pub speed_bound_ratio: Option<f64>,
    pub speed_bound_flag: bool,
}

fn l2(grid: &crate::grid::TorusGrid, values: &[Complex64]) -> f64 {
    spectral::l2_norm(grid, values)
}

/// `|i c d_1 v + Lap v + v (1 - |v|^2)| / max(|Lap v|, 1)`.
pub fn twc_residual(v: &ComplexField, c: f64) -> f64 {
    let grid = v.grid();
    let lap = spectral::laplacian(v);
    let d1 = spectral::derivative(v, 0);
    let r: Vec<Complex64> = v
        .values()
        .iter()
        .zip(lap.values())
        .zip(d1.values())
        .map(|((z, l), d)| Complex64::i() * c * d + l + z * (1.0 - z.norm_sqr()))
        .collect();
    l2(grid, &r) / l2(grid, lap.values()).max(1.0)
}

/// Pohozaev residuals of a candidate travelling wave.
#[derive(Debug, Clone, PartialEq)]
pub struct PohozaevResiduals {
    pub res1: f64,
    pub res2: Vec<f64>,
    pub combined: f64,
}

pub fn pohozaev_check(v: &ComplexField, c: f64) -> PohozaevResiduals {
    let grid = v.grid();
    let dim = grid.dim();
    let e = energy(v);
    let p = momentum_torus(v);
    let grad = spectral::gradient(v);
    let partial: Vec<f64> = (0..dim)
        .map(|a| {
            let comp = grad.component(a);
            sum_by(comp.len(), |i| comp[i].norm_sqr()) * grid.cell_volume()
        })
        .collect();
    let vals = v.values();
    let eta2 = sum_by(vals.len(), |i| (1.0 - vals[i].norm_sqr()).powi(2)) * grid.cell_volume();
    let scale = e.max(1.0);
    let grad2: f64 = partial.iter().sum();
    let n = dim as f64;
    let combined = ((n - 2.0) / 2.0 * grad2 + n / 4.0 * eta2 - c * (n - 1.0) * p).abs() / scale;
    PohozaevResiduals {
        res1: (e - partial[0]).abs() / scale,
        res2: partial[1..].iter().map(|pj| (e - pj - c * p).abs() / scale).collect(),
        combined,
    }
}

/// `|int eta^2 - 2 c p| / max(int eta^2, 1)`; meaningful for planar waves.
pub fn eta_l2_residual(v: &ComplexField, c: f64) -> f64 {
    let grid = v.grid();
    let vals = v.values();
    let eta2 = sum_by(vals.len(), |i| (1.0 - vals[i].norm_sqr()).powi(2)) * grid.cell_volume();
    (eta2 - 2.0 * c * momentum_torus(v)).abs() / eta2.max(1.0)
}

/// Hydrodynamic identity residuals `(res_cp, res_2d)`; `res_2d` is `None` in 3D.
pub fn hydro_identity_check(v: &ComplexField, c: f64) -> Result<(f64, Option<f64>), DiagnosticsError> {
    let h = lift(v, DIAGNOSTIC_LIFT_THRESHOLD)?;
    Ok(hydro_residuals(v, &h, c))
}

fn hydro_residuals(v: &ComplexField, h: &HydroField, c: f64) -> (f64, Option<f64>) {
    let cp = c * momentum_torus(v);
    let kinetic = hydro::rho2_grad_phi_sq(h);
    let res_cp = (cp - kinetic).abs() / cp.abs().max(1.0);
    let res_2d = (v.grid().dim() == 2).then(|| {
        let (lhs, rhs) = hydro::planar_identity_sides(h);
        (lhs - rhs).abs() / rhs.abs().max(1.0)
    });
    (res_cp, res_2d)
}

/// `min |v| <= max(1/2, 1 - Sigma / (sqrt(2) p)) + 1e-9`.
pub fn modulus_bound_check(v: &ComplexField) -> Result<bool, DiagnosticsError> {
    let p = momentum_torus(v);
    if p <= 0.0 {
        return Err(DiagnosticsError::NonpositiveMomentum(p));
    }
    let sigma = SQRT_2 * p - energy(v);
    Ok(modulus_bound(v.min_modulus(), sigma, p))
}

fn modulus_bound(min_modulus: f64, sigma: f64, p: f64) -> bool {
    min_modulus <= 0.5f64.max(1.0 - sigma / (SQRT_2 * p)) + 1e-9
}

/// Relative mismatch of the Fourier-side equation for `eta`, zero mode excluded.
pub fn eta_fourier_residual(v: &ComplexField, c: f64) -> Result<f64, DiagnosticsError> {
    let h = lift(v, DIAGNOSTIC_LIFT_THRESHOLD)?;
    Ok(eta_fourier(v, &h, c))
}

fn eta_fourier(v: &ComplexField, h: &HydroField, c: f64) -> f64 {
    let grid = v.grid();
    let dim = grid.dim();
    let grad2 = spectral::gradient(v).norm_sqr();
    let eta = h.eta();
    let r0: Vec<f64> = grad2.iter().zip(eta).map(|(g, e)| g + e * e).collect();
    let rj: Vec<Vec<Complex64>> = (0..dim)
        .map(|a| {
            let d = h.phase_derivative(a);
            let prod: Vec<f64> = eta.iter().zip(&d).map(|(e, p)| e * p).collect();
            spectral::forward_real(grid, &prod)
        })
        .collect();
    let eta_hat = spectral::forward_real(grid, eta);
    let r0_hat = spectral::forward_real(grid, &r0);
    let k2 = grid.k_squared();
    let k: Vec<Vec<f64>> = (0..dim).map(|a| grid.k_axis(a)).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for m in 1..eta_hat.len() {
        if k2[m] == 0.0 {
            continue;
        }
        let lhs = eta_hat[m] * (k2[m] + 2.0 - c * c * k[0][m] * k[0][m] / k2[m]);
        let mut rhs = r0_hat[m] * 2.0;
        for j in 1..dim {
            rhs -= rj[0][m] * (2.0 * c * k[j][m] * k[j][m] / k2[m]);
            rhs += rj[j][m] * (2.0 * c * k[0][m] * k[j][m] / k2[m]);
        }
        num += (lhs - rhs).norm_sqr();
        den += lhs.norm_sqr();
    }
    // Parseval: |f|_{L2}^2 = dV^2 / vol * sum |DFT f|^2
    let scale = grid.cell_volume() * grid.cell_volume() / grid.volume();
    (num * scale).sqrt() / (den * scale).sqrt().max(1.0)
}

/// `|c| |Sigma| / E`, or `None` when `Sigma` vanishes.
pub fn speed_bound_ratio(c: f64, sigma: f64, energy: f64) -> Option<f64> {
    if sigma.abs() < 1e-12 || energy <= 0.0 {
        return None;
    }
    Some(c.abs() * sigma.abs() / energy)
}

/// Advisory check; logs the ratio and returns `false` when it exceeds [`SPEED_BOUND_FLAG`].
pub fn speed_bound_check(report: &DiagnosticsReport) -> bool {
    match report.speed_bound_ratio {
        None => true,
        Some(r) => {
            log::info!("speed bound ratio |c||Sigma|/E = {r:.4e}");
            r <= SPEED_BOUND_FLAG
        }
    }
}

/// `1 - min|v| >= eps^2 / 10 - 1e-3`.
pub fn lower_modulus_bound_holds(report: &DiagnosticsReport) -> bool {
    1.0 - report.min_modulus >= report.eps * report.eps / 10.0 - 1e-3
}

impl DiagnosticsReport {
    pub fn evaluate(v: &ComplexField, c: f64) -> Self {
        let e = energy(v);
        let p = momentum_torus(v);
        let sigma = SQRT_2 * p - e;
        let poho = pohozaev_check(v, c);
        let min_modulus = v.min_modulus();
        let lifted = lift(v, DIAGNOSTIC_LIFT_THRESHOLD).ok();
        let (hydro_res_cp, hydro_res_2d, eta_fourier_res) = match &lifted {
            Some(h) => {
                let (cp, r2d) = hydro_residuals(v, h, c);
                (Some(cp), r2d, Some(eta_fourier(v, h, c)))
            }
            None => (None, None, None),
        };
        let speed_bound_ratio = speed_bound_ratio(c, sigma, e);
        DiagnosticsReport {
            energy: e,
            momentum: p,
            sigma,
            c,
            eps: (2.0 - c * c).max(0.0).sqrt(),
            min_modulus,
            pohozaev_res1: poho.res1,
            pohozaev_res2: poho.res2,
            pohozaev_combined_res: poho.combined,
            liftable: lifted.is_some(),
            hydro_res_cp,
            hydro_res_2d,
            eta_l2: (v.grid().dim() == 2).then(|| eta_l2_residual(v, c)),
            twc_residual: twc_residual(v, c),
            modulus_bound_ok: (p > 0.0).then(|| modulus_bound(min_modulus, sigma, p)),
            eta_fourier_res,
            speed_bound_ratio,
            speed_bound_flag: speed_bound_ratio.is_some_and(|r| r > SPEED_BOUND_FLAG),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::testutil::random_band_limited;

    #[test]
    fn unit_constant_is_clean() {
        let g = TorusGrid::torus(2, &[16, 16], 1.0).unwrap();
        let v = ComplexField::constant(&g, Complex64::from_polar(1.0, 0.7));
        let r = DiagnosticsReport::evaluate(&v, 0.9);
        assert_eq!((r.energy, r.momentum, r.sigma), (0.0, 0.0, 0.0));
        assert!(r.twc_residual < 1e-15);
        assert_eq!(r.pohozaev_res1, 0.0);
        assert!(r.pohozaev_res2.iter().all(|&x| x == 0.0));
        assert_eq!(r.hydro_res_cp, Some(0.0));
        assert_eq!(r.hydro_res_2d, Some(0.0));
        assert!(r.eta_fourier_res.unwrap() < 1e-15);
        assert_eq!(r.modulus_bound_ok, None);
        assert_eq!(r.speed_bound_ratio, None);
        assert!(speed_bound_check(&r));
    }

    #[test]
    fn trivial_solutions_have_zero_residual() {
        let g = TorusGrid::torus(2, &[16, 16], 1.0).unwrap();
        for z in [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)] {
            assert_eq!(twc_residual(&ComplexField::constant(&g, z), 1.3), 0.0);
        }
    }

    #[test]
    fn modulus_bound_needs_positive_momentum() {
        let g = TorusGrid::torus(2, &[16, 16], 1.0).unwrap();
        let v = ComplexField::constant(&g, Complex64::new(1.0, 0.0));
        assert_eq!(modulus_bound_check(&v), Err(DiagnosticsError::NonpositiveMomentum(0.0)));
        assert!(modulus_bound(0.9, -0.1, 1.0));
    }

    #[test]
    fn vortex_field_is_not_liftable() {
        let g = TorusGrid::torus(2, &[32, 32], 2.0).unwrap();
        let v = ComplexField::from_fn(&g, |x| {
            let a = Complex64::new(x[0], x[1] - 2.0);
            let b = Complex64::new(x[0], x[1] + 2.0).conj();
            a * b / ((a.norm_sqr() + 2.0) * (b.norm_sqr() + 2.0)).sqrt()
        })
        .unwrap();
        assert!(matches!(hydro_identity_check(&v, 1.0), Err(DiagnosticsError::NotLiftable(_))));
        let r = DiagnosticsReport::evaluate(&v, 1.0);
        assert!(!r.liftable && r.hydro_res_cp.is_none());
    }

    #[test]
    fn non_solution_has_order_one_fourier_mismatch() {
        let g = TorusGrid::torus(2, &[32, 32], 1.0).unwrap();
        let v = random_band_limited(&g, 11, 5, 0.1);
        assert!(eta_fourier_residual(&v, 1.0).unwrap() > 0.1);
    }

    #[test]
    fn report_is_deterministic() {
        let g = TorusGrid::torus(2, &[32, 32], 1.0).unwrap();
        let v = random_band_limited(&g, 5, 5, 0.1);
        let a = DiagnosticsReport::evaluate(&v, 1.1).to_json();
        let b = DiagnosticsReport::evaluate(&v, 1.1).to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"pohozaev_combined_res\""));
    }

    #[test]
    fn sigma_matches_stored_values() {
        let g = TorusGrid::torus(2, &[16, 16], 1.0).unwrap();
        let v = random_band_limited(&g, 2, 4, 0.2);
        let r = DiagnosticsReport::evaluate(&v, 0.5);
        assert_eq!(r.sigma, SQRT_2 * r.momentum - r.energy);
    }
}
