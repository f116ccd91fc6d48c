//! Dispersion curves `p -> E_min(p)` by continuation, and their shape checks.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::grid::{GridSpec, TorusGrid};
use crate::minimizer::{minimize_at_p, minimize_from, MinimizerResult, SolveConfig, SolveError};
use crate::topology::detect_vortices;

pub const CSV_HEADER: &str = "p,E,c,Sigma,Xi,min_modulus,vortex_count,converged";

/// Slack for the concavity and Lipschitz checks.
pub const SHAPE_TOL: f64 = 5e-3;
/// Allowed gap between the centred difference `dE/dp` and the stored speed.
pub const SPEED_TOL: f64 = 5e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub p: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub c: f64,
    #[serde(rename = "Sigma")]
    pub sigma: f64,
    #[serde(rename = "Xi")]
    pub xi: f64,
    pub min_modulus: f64,
    pub vortex_count: usize,
    pub converged: bool,
}

impl CurveRow {
    pub fn from_result(r: &MinimizerResult) -> Self {
        CurveRow {
            p: r.p_target,
            energy: r.energy,
            c: r.c,
            sigma: r.sigma,
            xi: SQRT_2 * r.p_target - r.energy,
            min_modulus: r.report.min_modulus,
            vortex_count: detect_vortices(&r.field).count(),
            converged: r.converged,
        }
    }

    /// Row for a point whose solve failed outright.
    pub fn gap(p: f64) -> Self {
        CurveRow {
            p,
            energy: f64::NAN,
            c: f64::NAN,
            sigma: f64::NAN,
            xi: f64::NAN,
            min_modulus: f64::NAN,
            vortex_count: 0,
            converged: false,
        }
    }
}

/// Outcome of the shape checks over converged rows. Worst values are kept so
/// that the margins are visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveChecks {
    pub monotone: bool,
    /// Largest `E_i - E_{i+1}` (positive means a decrease).
    pub max_decrease: f64,
    pub concave: bool,
    /// Largest second difference.
    pub max_second_difference: f64,
    pub lipschitz: bool,
    /// Largest `E_{i+1} - E_i - sqrt(2) (p_{i+1} - p_i)`.
    pub max_lipschitz_excess: f64,
    pub xi_positive: bool,
    pub min_xi: f64,
    pub speed_consistent: bool,
    /// Largest `|dE/dp - c|` over interior rows.
    pub max_speed_gap: f64,
    /// Centred differences at interior rows, `(p, dE/dp, c)`.
    pub finite_difference_speeds: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionCurve {
    pub grid: Option<GridSpec>,
    pub rows: Vec<CurveRow>,
    pub checks: CurveChecks,
}

impl DispersionCurve {
    /// Sorts rows by `p` and evaluates the checks.
    pub fn from_rows(grid: Option<GridSpec>, mut rows: Vec<CurveRow>) -> Self {
        rows.sort_by(|a, b| a.p.total_cmp(&b.p));
        let checks = shape_checks(&rows);
        DispersionCurve { grid, rows, checks }
    }

    pub fn converged_rows(&self) -> impl Iterator<Item = &CurveRow> {
        self.rows.iter().filter(|r| r.converged)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.p, r.energy, r.c, r.sigma, r.xi, r.min_modulus, r.vortex_count, r.converged
            )
            .expect("write to string");
        }
        out
    }

    /// Largest `p` such that every converged row up to it has `Xi <= noise`.
    pub fn p0_estimate(&self, noise: f64) -> Option<f64> {
        let mut last = None;
        for r in self.converged_rows() {
            if r.xi <= noise {
                last = Some(r.p);
            } else {
                break;
            }
        }
        last
    }
}

pub fn shape_checks(rows: &[CurveRow]) -> CurveChecks {
    let ok: Vec<&CurveRow> = rows.iter().filter(|r| r.converged).collect();
    let mut max_decrease = f64::NEG_INFINITY;
    let mut max_lipschitz_excess = f64::NEG_INFINITY;
    for w in ok.windows(2) {
        max_decrease = max_decrease.max(w[0].energy - w[1].energy);
        max_lipschitz_excess = max_lipschitz_excess.max(w[1].energy - w[0].energy - SQRT_2 * (w[1].p - w[0].p));
    }
    let mut max_second_difference = f64::NEG_INFINITY;
    let mut finite_difference_speeds = Vec::new();
    let mut max_speed_gap: f64 = 0.0;
    for w in ok.windows(3) {
        let (h1, h2) = (w[1].p - w[0].p, w[2].p - w[1].p);
        let s1 = (w[1].energy - w[0].energy) / h1;
        let s2 = (w[2].energy - w[1].energy) / h2;
        max_second_difference = max_second_difference.max((s2 - s1) * (h1 + h2) / 2.0);
        let fd = (w[2].energy - w[0].energy) / (h1 + h2);
        finite_difference_speeds.push((w[1].p, fd, w[1].c));
        max_speed_gap = max_speed_gap.max((fd - w[1].c).abs());
    }
    let min_xi = ok.iter().map(|r| r.xi).fold(f64::INFINITY, f64::min);
    CurveChecks {
        monotone: !(max_decrease > 0.0),
        max_decrease,
        concave: !(max_second_difference > SHAPE_TOL),
        max_second_difference,
        lipschitz: !(max_lipschitz_excess > SHAPE_TOL),
        max_lipschitz_excess,
        xi_positive: ok.iter().all(|r| r.xi > 0.0),
        min_xi,
        speed_consistent: !(max_speed_gap > SPEED_TOL),
        max_speed_gap,
        finite_difference_speeds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    /// Seed each point with the previous minimizer.
    pub warm_start: bool,
    /// Also solve from fresh seeds and keep the lowest energy.
    pub reseed: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            warm_start: true,
            reseed: true,
        }
    }
}

/// One sweep point: the kept result, or the error when every attempt failed.
pub type SweepPoint = Result<MinimizerResult, SolveError>;

fn lower(a: SweepPoint, b: SweepPoint) -> SweepPoint {
    match (a, b) {
        (Ok(x), Ok(y)) => Ok(if y.energy < x.energy { y } else { x }),
        (Ok(x), Err(_)) | (Err(_), Ok(x)) => Ok(x),
        (Err(SolveError::NotConverged(x)), Err(SolveError::NotConverged(y))) => {
            Err(SolveError::NotConverged(if y.energy < x.energy { y } else { x }))
        }
        (Err(e @ SolveError::NotConverged(_)), Err(_)) | (Err(_), Err(e)) => Err(e),
    }
}

/// Continuation over increasing `p_list`.
pub fn sweep_curve(
    grid: &TorusGrid,
    p_list: &[f64],
    cfg: &SolveConfig,
    opts: SweepOptions,
) -> Result<(DispersionCurve, Vec<SweepPoint>), SolveError> {
    if p_list.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(SolveError::InvalidTarget(
            p_list.iter().cloned().find(|p| !(*p > 0.0)).unwrap_or(f64::NAN),
        ));
    }
    if p_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolveError::Config("p list must be strictly increasing".into()));
    }
    cfg.validate()?;
    let mut points: Vec<SweepPoint> = Vec::with_capacity(p_list.len());
    let mut rows = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let previous = points.iter().rev().find_map(|r| r.as_ref().ok()).map(|r| r.field.clone());
        let warm = match (&previous, opts.warm_start) {
            (Some(v), true) => Some(minimize_from(v, p, cfg).map(|mut r| {
                r.seed = "warm".into();
                r
            })),
            _ => None,
        };
        let fresh = if warm.is_none() || opts.reseed || matches!(warm, Some(Err(_))) {
            Some(minimize_at_p(grid, p, cfg))
        } else {
            None
        };
        let point = match (warm, fresh) {
            (Some(a), Some(b)) => lower(a, b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!("one attempt always runs"),
        };
        rows.push(match &point {
            Ok(r) => CurveRow::from_result(r),
            Err(SolveError::NotConverged(r)) => CurveRow::from_result(r),
            Err(_) => CurveRow::gap(p),
        });
        log::info!("p = {p}: {}", match &point {
            Ok(r) => format!("E = {} c = {} ({} iterations, seed {})", r.energy, r.c, r.iterations, r.seed),
            Err(e) => e.to_string(),
        });
        points.push(point);
    }
    Ok((DispersionCurve::from_rows(Some(grid.spec()), rows), points))
}

/// `max eta` of the minimizer on the doubled torus over that on the original one.
/// Values at or below one half mark delocalization.
pub fn delocalization_ratio(small: &MinimizerResult, doubled: &MinimizerResult) -> f64 {
    let peak = |r: &MinimizerResult| r.field.eta().into_iter().fold(f64::NEG_INFINITY, f64::max);
    peak(doubled) / peak(small)
}

/// Parses `start:step:stop` (inclusive) or a comma separated list.
pub fn parse_p_list(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    match parts.len() {
        1 => spec.split(',').map(num).collect(),
        3 => {
            let (a, h, b) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(h > 0.0) || b < a {
                return Err(format!("bad range `{spec}`"));
            }
            let count = ((b - a) / h + 1e-9).floor() as usize;
            Ok((0..=count).map(|i| {
                let p = a + i as f64 * h;
                (p * 1e12).round() / 1e12
            }).collect())
        }
        _ => Err(format!("bad p list `{spec}`")),
    }
}
