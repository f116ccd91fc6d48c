//! Small-momentum behaviour of the dispersion curve: cubic law for `Xi(p)`,
//! speed exponent, and the comparison-map upper bound.
//!
//! Small-`p` minimizers are computed on the KP-scaled tori, whose shape
//! follows `eps(p)` so that the long-wave profile fits at every `p`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::curve::{CurveRow, DispersionCurve, SweepPoint};
use crate::functionals::energy;
use crate::kpi::{comparison_map, cubic_coefficient, epsilon_for, kp_scaled_grid, KpError, KpGroundState};
use crate::minimizer::{minimize_from, SolveConfig, SolveError};

/// Rows with `p` above this are left out of the cubic fit.
pub const SMALL_P_MAX: f64 = 0.3;
pub const MIN_FIT_ROWS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    /// Least-squares `A` in `Xi = A p^3`.
    pub a_fit: f64,
    /// `48 sqrt 2 / S^2`.
    pub a_theory: f64,
    pub relative_error: f64,
    /// Slope of `log(sqrt 2 - c)` against `log p`.
    pub c_exponent: f64,
    pub rows_used: usize,
}

pub fn asymptotic_fit(curve: &DispersionCurve, s_kp: f64) -> Result<AsymptoticFit, KpError> {
    if !(s_kp > 0.0) {
        return Err(KpError::Parameter("action must be positive".into()));
    }
    let rows: Vec<&CurveRow> = curve
        .converged_rows()
        .filter(|r| r.p > 0.0 && r.p <= SMALL_P_MAX && r.xi.is_finite())
        .collect();
    if rows.len() < MIN_FIT_ROWS {
        return Err(KpError::InsufficientData {
            needed: MIN_FIT_ROWS,
            got: rows.len(),
        });
    }
    let num: f64 = rows.iter().map(|r| r.xi * r.p.powi(3)).sum();
    let den: f64 = rows.iter().map(|r| r.p.powi(6)).sum();
    let a_fit = num / den;

    let logs: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| SQRT_2 - r.c > 0.0)
        .map(|r| (r.p.ln(), (SQRT_2 - r.c).ln()))
        .collect();
    if logs.len() < 2 {
        return Err(KpError::InsufficientData {
            needed: 2,
            got: logs.len(),
        });
    }
    let c_exponent = slope(&logs);
    let a_theory = cubic_coefficient(s_kp);
    Ok(AsymptoticFit {
        a_fit,
        a_theory,
        relative_error: (a_fit - a_theory).abs() / a_theory,
        c_exponent,
        rows_used: rows.len(),
    })
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBound {
    pub p: f64,
    pub eps: f64,
    pub t: f64,
    pub energy: f64,
    /// `E(w_eps) - (sqrt 2 p - A p^3)`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    pub points: Vec<ComparisonBound>,
    pub min_gap: f64,
    /// Least-squares `K` in `gap = K p^4`.
    pub quartic: f64,
    /// Largest `|gap| / p^4`.
    pub max_ratio: f64,
}

/// Energy of the comparison map against the cubic expansion, each `p` on its
/// own KP-scaled torus.
pub fn comparison_bounds(kp: &KpGroundState, p_list: &[f64], s_kp: f64) -> Result<BoundFit, KpError> {
    if p_list.is_empty() {
        return Err(KpError::InsufficientData { needed: 1, got: 0 });
    }
    let a = cubic_coefficient(s_kp);
    let mut points = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let grid = kp_scaled_grid(&kp.grid, epsilon_for(kp.l2sq(), p))?;
        let map = comparison_map(kp, &grid, p)?;
        let e = energy(&map.field);
        points.push(ComparisonBound {
            p,
            eps: map.eps,
            t: map.t,
            energy: e,
            gap: e - (SQRT_2 * p - a * p.powi(3)),
        });
    }
    let min_gap = points.iter().map(|b| b.gap).fold(f64::INFINITY, f64::min);
    let num: f64 = points.iter().map(|b| b.gap * b.p.powi(4)).sum();
    let den: f64 = points.iter().map(|b| b.p.powi(8)).sum();
    let max_ratio = points.iter().map(|b| (b.gap / b.p.powi(4)).abs()).fold(0.0, f64::max);
    Ok(BoundFit {
        points,
        min_gap,
        quartic: num / den,
        max_ratio,
    })
}

/// Minimizers seeded by the comparison map, each on its KP-scaled torus.
pub fn scaled_sweep(
    kp: &KpGroundState,
    p_list: &[f64],
    cfg: &SolveConfig,
) -> Result<(DispersionCurve, Vec<SweepPoint>), SolveError> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(p_list.len());
    let mut points = Vec::with_capacity(p_list.len());
    for &p in p_list {
        if !(p > 0.0 && p.is_finite()) {
            return Err(SolveError::InvalidTarget(p));
        }
        let grid = kp_scaled_grid(&kp.grid, epsilon_for(kp.l2sq(), p))?;
        let seed = comparison_map(kp, &grid, p)?;
        let point = minimize_from(&seed.field, p, cfg).map(|mut r| {
            r.seed = "kp_map".into();
            r
        });
        rows.push(match &point {
            Ok(r) => CurveRow::from_result(r),
            Err(SolveError::NotConverged(r)) => CurveRow::from_result(r),
            Err(_) => CurveRow::gap(p),
        });
        points.push(point);
    }
    Ok((DispersionCurve::from_rows(None, rows), points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpi::{kp_grid, petviashvili_solve, PetviashviliConfig};

    fn synthetic(ps: &[f64], a: f64, k: f64) -> DispersionCurve {
        let rows = ps
            .iter()
            .map(|&p| CurveRow {
                p,
                energy: SQRT_2 * p - a * p.powi(3),
                c: SQRT_2 - k * p * p,
                sigma: a * p.powi(3),
                xi: a * p.powi(3),
                min_modulus: 1.0,
                vortex_count: 0,
                converged: true,
            })
            .collect();
        DispersionCurve::from_rows(None, rows)
    }

    #[test]
    fn fit_recovers_exact_law() {
        let s = 100.0;
        let a = cubic_coefficient(s);
        let curve = synthetic(&[0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.6], a, 0.02);
        let fit = asymptotic_fit(&curve, s).unwrap();
        assert!(fit.relative_error < 1e-12);
        assert!((fit.c_exponent - 2.0).abs() < 1e-9);
        assert_eq!(fit.rows_used, 6);
    }

    #[test]
    fn fit_needs_rows() {
        let curve = synthetic(&[0.1, 0.2], 0.01, 0.02);
        assert!(matches!(
            asymptotic_fit(&curve, 100.0),
            Err(KpError::InsufficientData { needed: 5, got: 2 })
        ));
    }

    #[test]
    fn comparison_bound_and_small_sweep() {
        let grid = kp_grid(128, 40.0).unwrap();
        let kp = petviashvili_solve(&grid, &PetviashviliConfig::default()).unwrap();
        let bound = comparison_bounds(&kp, &[0.02, 0.05, 0.1], kp.s()).unwrap();
        assert!(bound.min_gap >= -1e-4, "{bound:?}");
        assert!(bound.max_ratio < 1.0, "{bound:?}");
        for b in &bound.points {
            assert!((b.t - 1.0 / 6.0).abs() < 0.05);
        }
        let (curve, _) = scaled_sweep(&kp, &[0.05, 0.1], &SolveConfig::default()).unwrap();
        for r in &curve.rows {
            assert!(r.converged);
            assert!(r.xi > 0.0 && r.c < SQRT_2);
            assert!((r.xi / r.p.powi(3) / cubic_coefficient(kp.s()) - 1.0).abs() < 0.05);
        }
    }
}
