//! KP-I solitary waves: Petviashvili iteration for the profile, its action,
//! velocity potential, and the Gross-Pitaevskii comparison maps built from it.
//!
//! The profile solves `(sigma xi_1^2 + xi_2^2 + xi_1^4) w^ = xi_1^2 (w^2)^ / 2`
//! on a periodic box; `sigma = 1` is the standard normalization.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ComplexField;
use crate::functionals::momentum_torus;
use crate::grid::{GridError, TorusGrid};
use crate::spectral::{self, integrate, sum_by};

/// Box period used when nothing else is asked for.
pub const DEFAULT_PERIOD: f64 = 80.0;
pub const DEFAULT_SIZE: usize = 512;

/// Boxes for the tail extrapolation: `(points, period)` at fixed spacing.
pub const EXTRAPOLATION_BOXES: [(usize, f64); 3] = [(512, 80.0), (768, 120.0), (1024, 160.0)];

/// Smallest KP-unit half width a comparison-map window may have.
pub const KP_CORE: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KpError {
    #[error("KP-I profiles live on 2D grids, got {0}D")]
    Dimension(usize),
    #[error("stabilizing factor {factor} left [0.1, 10] at iteration {iteration}")]
    Diverged { iteration: usize, factor: f64 },
    #[error("no convergence after {iterations} iterations (last change {change:e})")]
    NotConverged { iterations: usize, change: f64 },
    #[error("rescaled profile does not fit: window {window:?} in KP units, available {available:?}")]
    DoesNotFit { window: [f64; 2], available: [f64; 2] },
    #[error("no positive amplitude reaches momentum {0}")]
    NoRealRoot(f64),
    #[error("need at least {needed} usable rows, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PetviashviliConfig {
    pub max_iters: usize,
    /// Stop when the relative change of the spectrum drops below this.
    pub tol: f64,
    /// Two-thirds truncation of the quadratic term.
    pub dealias: bool,
    /// Wave speed; `1` is the profile used everywhere else.
    pub speed: f64,
}

impl Default for PetviashviliConfig {
    fn default() -> Self {
        PetviashviliConfig {
            max_iters: 4000,
            tol: 1e-13,
            dealias: true,
            speed: 1.0,
        }
    }
}

/// Integrals entering the KP energy and action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpFunctionals {
    /// `int w^2`
    pub l2sq: f64,
    /// `int (d_1 w)^2`
    pub dx_sq: f64,
    /// `int (d_1^{-1} d_2 w)^2`
    pub dy_sq: f64,
    /// `int w^3`
    pub cube: f64,
    pub e_kp: f64,
    pub s: f64,
}

impl KpFunctionals {
    fn from_parts(l2sq: f64, dx_sq: f64, dy_sq: f64, cube: f64) -> Self {
        let e_kp = 0.5 * dx_sq + 0.5 * dy_sq - cube / 6.0;
        KpFunctionals {
            l2sq,
            dx_sq,
            dy_sq,
            cube,
            e_kp,
            s: e_kp + 0.5 * l2sq,
        }
    }

    /// `|E_KP + int w^2 / 6| / |E_KP|`
    pub fn energy_identity_defect(&self) -> f64 {
        (self.e_kp + self.l2sq / 6.0).abs() / self.e_kp.abs().max(f64::MIN_POSITIVE)
    }

    /// `|S - int w^2 / 3| / S`
    pub fn action_identity_defect(&self) -> f64 {
        (self.s - self.l2sq / 3.0).abs() / self.s.abs().max(f64::MIN_POSITIVE)
    }
}

/// Converged profile on one periodic box.
#[derive(Debug, Clone)]
pub struct KpGroundState {
    pub grid: TorusGrid,
    pub w: Vec<f64>,
    pub vpot: Vec<f64>,
    pub speed: f64,
    pub functionals: KpFunctionals,
    /// Relative L2 residual of the profile equation.
    pub residual: f64,
    /// Final stabilizing factor.
    pub stabilizer: f64,
    pub iterations: usize,
}

impl KpGroundState {
    pub fn s(&self) -> f64 {
        self.functionals.s
    }
    pub fn e_kp(&self) -> f64 {
        self.functionals.e_kp
    }
    pub fn l2sq(&self) -> f64 {
        self.functionals.l2sq
    }

    /// Profile as a complex field with zero imaginary part, for snapshots.
    pub fn to_field(&self) -> ComplexField {
        ComplexField::from_raw(&self.grid, self.w.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "S": self.functionals.s,
            "E_kp": self.functionals.e_kp,
            "l2sq": self.functionals.l2sq,
            "cube": self.functionals.cube,
            "residual": self.residual,
            "stabilizer": self.stabilizer,
            "iterations": self.iterations,
            "speed": self.speed,
            "sizes": self.grid.sizes(),
            "half_periods": self.grid.half_periods(),
        })
    }
}

/// Square box of period `period` with `n` points per side.
pub fn kp_grid(n: usize, period: f64) -> Result<TorusGrid, KpError> {
    Ok(TorusGrid::new(&[n, n], &[period / 2.0, period / 2.0])?)
}

fn require_2d(grid: &TorusGrid) -> Result<(), KpError> {
    if grid.dim() != 2 {
        return Err(KpError::Dimension(grid.dim()));
    }
    Ok(())
}

/// `xi_1^2 / (2 (sigma xi_1^2 + xi_2^2 + xi_1^4))`, zero on the `xi_1 = 0` line.
fn multiplier(grid: &TorusGrid, speed: f64) -> Vec<f64> {
    let k1 = grid.k_axis(0);
    let k2 = grid.k_axis(1);
    k1.iter()
        .zip(&k2)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else {
                0.5 * a * a / (speed * a * a + b * b + a.powi(4))
            }
        })
        .collect()
}

/// Keeps modes with index frequency `|m| < N/3` on both axes.
fn dealias_mask(grid: &TorusGrid) -> Vec<bool> {
    let sizes = grid.sizes();
    (0..grid.len())
        .map(|i| {
            let idx = grid.unravel(i);
            (0..2).all(|a| {
                let n = sizes[a];
                let m = if idx[a] <= n / 2 { idx[a] } else { n - idx[a] };
                3 * m < n
            })
        })
        .collect()
}

fn real_part(c: Vec<Complex64>) -> Vec<f64> {
    c.into_iter().map(|z| z.re).collect()
}

fn square_spectrum(grid: &TorusGrid, w: &[f64]) -> Vec<Complex64> {
    let sq: Vec<f64> = w.iter().map(|x| x * x).collect();
    spectral::forward_real(grid, &sq)
}

fn spectral_norm(c: &[Complex64]) -> f64 {
    sum_by(c.len(), |i| c[i].norm_sqr()).sqrt()
}

/// Anisotropic bump `8 (1 - x_1^2 / 3) exp(-x_1^2 / 6 - x_2^2 / 9)`, zero mean along `x_1`.
fn seed(grid: &TorusGrid, sign: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            sign * 8.0 * (1.0 - x[0] * x[0] / 3.0) * (-(x[0] * x[0]) / 6.0 - x[1] * x[1] / 9.0).exp()
        })
        .collect()
}

/// Petviashvili iteration with exponent 2. Starts from a positive bump and
/// retries from its negative when that fails or lands on `int w^3 <= 0`.
pub fn petviashvili_solve(grid: &TorusGrid, cfg: &PetviashviliConfig) -> Result<KpGroundState, KpError> {
    require_2d(grid)?;
    if !(cfg.speed > 0.0) || !(cfg.tol > 0.0) || cfg.max_iters == 0 {
        return Err(KpError::Parameter("speed, tol and max_iters must be positive".into()));
    }
    match petviashvili_from(grid, cfg, &seed(grid, 1.0)) {
        Ok(state) if state.functionals.cube > 0.0 => Ok(state),
        first => {
            let second = petviashvili_from(grid, cfg, &seed(grid, -1.0));
            match (first, second) {
                (_, Ok(state)) if state.functionals.cube > 0.0 => Ok(state),
                (Err(e), _) => Err(e),
                (Ok(_), Err(e)) => Err(e),
                (Ok(state), Ok(_)) => Ok(state),
            }
        }
    }
}

/// Iteration from an explicit starting profile.
pub fn petviashvili_from(grid: &TorusGrid, cfg: &PetviashviliConfig, start: &[f64]) -> Result<KpGroundState, KpError> {
    require_2d(grid)?;
    let m = multiplier(grid, cfg.speed);
    let mask = if cfg.dealias {
        dealias_mask(grid)
    } else {
        vec![true; grid.len()]
    };
    let mut wh = spectral::forward_real(grid, start);
    for (z, &mi) in wh.iter_mut().zip(&m) {
        if mi == 0.0 {
            *z = Complex64::default();
        }
    }
    let nonlinear = |wh: &[Complex64]| {
        let w = real_part(spectral::inverse(grid, wh));
        let mut nl = square_spectrum(grid, &w);
        for (z, &keep) in nl.iter_mut().zip(&mask) {
            if !keep {
                *z = Complex64::default();
            }
        }
        let num = sum_by(wh.len(), |i| if m[i] > 0.0 { wh[i].norm_sqr() / m[i] } else { 0.0 });
        let den = sum_by(wh.len(), |i| (wh[i].conj() * nl[i]).re);
        (nl, num / den)
    };
    // The factor scales like the inverse amplitude; start at factor one.
    let (_, s0) = nonlinear(&wh);
    if !(s0.is_finite() && s0 != 0.0) {
        return Err(KpError::Diverged { iteration: 0, factor: s0 });
    }
    wh.iter_mut().for_each(|z| *z *= s0);
    let mut factor;
    let mut change = f64::INFINITY;
    for it in 0..cfg.max_iters {
        let (nl, f) = nonlinear(&wh);
        factor = f;
        if !(0.1..=10.0).contains(&factor) {
            return Err(KpError::Diverged { iteration: it, factor });
        }
        let next: Vec<Complex64> = nl
            .iter()
            .zip(&m)
            .map(|(z, &mi)| z * (factor * factor * mi))
            .collect();
        let diff = sum_by(next.len(), |i| (next[i] - wh[i]).norm_sqr()).sqrt();
        change = diff / spectral_norm(&next).max(f64::MIN_POSITIVE);
        wh = next;
        if change < cfg.tol {
            return Ok(finish(grid, cfg, wh, factor, it + 1));
        }
    }
    Err(KpError::NotConverged {
        iterations: cfg.max_iters,
        change,
    })
}

fn finish(grid: &TorusGrid, cfg: &PetviashviliConfig, wh: Vec<Complex64>, factor: f64, iterations: usize) -> KpGroundState {
    let w = real_part(spectral::inverse(grid, &wh));
    let residual = residual_with(grid, &w, cfg.speed, cfg.dealias);
    let functionals = kp_functionals(grid, &w);
    let vpot = velocity_potential_with(grid, &w, cfg.speed, cfg.dealias);
    KpGroundState {
        grid: grid.clone(),
        w,
        vpot,
        speed: cfg.speed,
        functionals,
        residual,
        stabilizer: factor,
        iterations,
    }
}

/// Relative residual `|w^ - M (w^2)^| / |w^|` of the fixed-point form of the
/// profile equation at unit speed.
pub fn sw_residual(grid: &TorusGrid, w: &[f64]) -> f64 {
    sw_residual_with(grid, w, 1.0)
}

pub fn sw_residual_with(grid: &TorusGrid, w: &[f64], speed: f64) -> f64 {
    residual_with(grid, w, speed, false)
}

/// Residual of the equation actually iterated, with the quadratic term
/// truncated when `dealias` is set.
pub fn residual_with(grid: &TorusGrid, w: &[f64], speed: f64, dealias: bool) -> f64 {
    let m = multiplier(grid, speed);
    let wh = spectral::forward_real(grid, w);
    let mut nl = square_spectrum(grid, w);
    if dealias {
        for (z, keep) in nl.iter_mut().zip(dealias_mask(grid)) {
            if !keep {
                *z = Complex64::default();
            }
        }
    }
    let num = sum_by(wh.len(), |i| (wh[i] - nl[i] * m[i]).norm_sqr()).sqrt();
    num / spectral_norm(&wh).max(f64::MIN_POSITIVE)
}

/// `E_KP = int (d_1 w)^2 / 2 + int (d_1^{-1} d_2 w)^2 / 2 - int w^3 / 6` and
/// `S = E_KP + int w^2 / 2`. The antiderivative drops the `xi_1 = 0` modes.
pub fn kp_functionals(grid: &TorusGrid, w: &[f64]) -> KpFunctionals {
    let wh = spectral::forward_real(grid, w);
    let k1 = grid.k_axis(0);
    let k2 = grid.k_axis(1);
    let scale = grid.cell_volume() / grid.len() as f64;
    let dx_sq = sum_by(wh.len(), |i| k1[i] * k1[i] * wh[i].norm_sqr()) * scale;
    let dy_sq = sum_by(wh.len(), |i| {
        if k1[i] == 0.0 {
            0.0
        } else {
            (k2[i] / k1[i]).powi(2) * wh[i].norm_sqr()
        }
    }) * scale;
    let l2sq = integrate(grid, &w.iter().map(|x| x * x).collect::<Vec<_>>());
    let cube = integrate(grid, &w.iter().map(|x| x * x * x).collect::<Vec<_>>());
    KpFunctionals::from_parts(l2sq, dx_sq, dy_sq, cube)
}

/// `v^ = -(i/2) xi_1 / (|xi|^2 + xi_1^4) (w^2)^`, with the zero mode set to 0.
pub fn velocity_potential(grid: &TorusGrid, w: &[f64]) -> Vec<f64> {
    velocity_potential_with(grid, w, 1.0, true)
}

pub fn velocity_potential_with(grid: &TorusGrid, w: &[f64], speed: f64, dealias: bool) -> Vec<f64> {
    let mut c = square_spectrum(grid, w);
    let mask = if dealias { Some(dealias_mask(grid)) } else { None };
    let k1 = grid.k_axis(0);
    let k2 = grid.k_axis(1);
    for (i, z) in c.iter_mut().enumerate() {
        let (a, b) = (k1[i], k2[i]);
        let den = speed * a * a + b * b + a.powi(4);
        let keep = mask.as_ref().is_none_or(|m| m[i]);
        *z = if a == 0.0 || !keep {
            Complex64::default()
        } else {
            *z * Complex64::new(0.0, -0.5 * a / den)
        };
    }
    real_part(spectral::inverse(grid, &c))
}

/// Closed-form lump `24 (3 - x_1^2 + x_2^2) / (3 + |x|^2)^2` sampled on the grid.
pub fn lump(grid: &TorusGrid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            let r2 = x[0] * x[0] + x[1] * x[1];
            24.0 * (3.0 - x[0] * x[0] + x[1] * x[1]) / (3.0 + r2).powi(2)
        })
        .collect()
}

/// Potential of the lump, `24 x_1 / (3 + |x|^2)`.
pub fn lump_potential(grid: &TorusGrid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            24.0 * x[0] / (3.0 + x[0] * x[0] + x[1] * x[1])
        })
        .collect()
}

/// `int w^2` of the lump on the whole plane.
pub const LUMP_L2SQ: f64 = 96.0 * PI;

/// Value at `L = infinity` of the polynomial in `1/L^2` through the samples.
pub fn extrapolate_in_inverse_square(samples: &[(f64, f64)]) -> f64 {
    let u: Vec<f64> = samples.iter().map(|(l, _)| 1.0 / (l * l)).collect();
    samples
        .iter()
        .enumerate()
        .map(|(i, &(_, q))| {
            let w: f64 = (0..u.len())
                .filter(|&j| j != i)
                .map(|j| u[j] / (u[j] - u[i]))
                .product();
            q * w
        })
        .sum()
}

/// Infinite-plane values of the KP integrals from a family of boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpExtrapolation {
    pub periods: Vec<f64>,
    pub per_box: Vec<KpFunctionals>,
    pub residuals: Vec<f64>,
    pub limit: KpFunctionals,
}

impl KpExtrapolation {
    pub fn s_kp(&self) -> f64 {
        self.limit.s
    }
}

pub fn extrapolate(boxes: &[(f64, KpFunctionals)]) -> KpExtrapolation {
    let pick = |f: fn(&KpFunctionals) -> f64| {
        let samples: Vec<(f64, f64)> = boxes.iter().map(|(l, q)| (*l, f(q))).collect();
        extrapolate_in_inverse_square(&samples)
    };
    let limit = KpFunctionals::from_parts(
        pick(|q| q.l2sq),
        pick(|q| q.dx_sq),
        pick(|q| q.dy_sq),
        pick(|q| q.cube),
    );
    KpExtrapolation {
        periods: boxes.iter().map(|b| b.0).collect(),
        per_box: boxes.iter().map(|b| b.1).collect(),
        residuals: Vec::new(),
        limit,
    }
}

/// Solves on each `(points, period)` box and extrapolates the integrals.
/// Returns the extrapolation and the state on the first box.
pub fn solve_extrapolated(
    boxes: &[(usize, f64)],
    cfg: &PetviashviliConfig,
) -> Result<(KpExtrapolation, KpGroundState), KpError> {
    if boxes.is_empty() {
        return Err(KpError::InsufficientData { needed: 1, got: 0 });
    }
    let mut states = Vec::with_capacity(boxes.len());
    for &(n, period) in boxes {
        states.push(petviashvili_solve(&kp_grid(n, period)?, cfg)?);
    }
    let pairs: Vec<(f64, KpFunctionals)> = boxes
        .iter()
        .zip(&states)
        .map(|(b, s)| (b.1, s.functionals))
        .collect();
    let mut ex = extrapolate(&pairs);
    ex.residuals = states.iter().map(|s| s.residual).collect();
    Ok((ex, states.swap_remove(0)))
}

/// `48 sqrt(2) / S^2`, the cubic coefficient of the discrepancy.
pub fn cubic_coefficient(s_kp: f64) -> f64 {
    48.0 * SQRT_2 / (s_kp * s_kp)
}

/// `eps` with `p = eps int w^2 / 72`.
pub fn epsilon_for(l2sq: f64, p: f64) -> f64 {
    72.0 * p / l2sq
}

/// Two-term expansion `1/6 + 18 (int w^3) / (int w^2)^3 p^2`.
pub fn t_asymptotic(f: &KpFunctionals, p: f64) -> f64 {
    1.0 / 6.0 + 18.0 * f.cube / f.l2sq.powi(3) * p * p
}

/// Root of `eps t^2 A / 2 - eps^3 t^3 D / 8 = p` continuing the branch through
/// `t = 0`, by Newton from the two-term expansion.
pub fn t_from_cubic(f: &KpFunctionals, eps: f64, p: f64) -> Result<f64, KpError> {
    let (a, d) = (f.l2sq, f.cube);
    let g = |t: f64| eps * t * t * a / 2.0 - eps.powi(3) * t.powi(3) * d / 8.0 - p;
    let dg = |t: f64| eps * t * a - 3.0 * eps.powi(3) * t * t * d / 8.0;
    // The branch through the origin peaks at t* = 8A / (3 eps^2 D) when D > 0.
    let t_peak = if d > 0.0 {
        8.0 * a / (3.0 * eps * eps * d)
    } else {
        f64::INFINITY
    };
    if t_peak.is_finite() && g(t_peak) < 0.0 {
        return Err(KpError::NoRealRoot(p));
    }
    let mut t = (2.0 * p / (eps * a)).sqrt().min(0.5 * t_peak);
    for _ in 0..100 {
        let step = g(t) / dg(t);
        t -= step;
        if t <= 0.0 || t > t_peak {
            return Err(KpError::NoRealRoot(p));
        }
        if step.abs() <= 1e-15 * t {
            break;
        }
    }
    Ok(t)
}

/// Gross-Pitaevskii box onto which the KP box maps point for point:
/// half periods `(A_1 / eps, sqrt(2) A_2 / eps^2)`, same sizes.
pub fn kp_scaled_grid(kp_grid: &TorusGrid, eps: f64) -> Result<TorusGrid, KpError> {
    require_2d(kp_grid)?;
    if !(eps > 0.0) {
        return Err(KpError::Parameter("eps must be positive".into()));
    }
    let a = kp_grid.half_periods();
    Ok(TorusGrid::new(kp_grid.sizes(), &[a[0] / eps, SQRT_2 * a[1] / (eps * eps)])?)
}

/// A comparison map together with its parameters.
#[derive(Debug, Clone)]
pub struct ComparisonMap {
    pub field: ComplexField,
    pub eps: f64,
    pub t: f64,
}

/// `w_eps = rho e^{i phi}` with `rho = 1 - (t eps^2 / 2) w(eps x_1, eps^2 x_2 / sqrt 2)` and
/// `phi = (t eps / sqrt 2) v(eps x_1, eps^2 x_2 / sqrt 2)`; `eps` from
/// `p = eps int w^2 / 72` and `t` tuned until the discrete momentum equals `p`.
pub fn comparison_map(kp: &KpGroundState, gp_grid: &TorusGrid, p_target: f64) -> Result<ComparisonMap, KpError> {
    if !(p_target > 0.0) {
        return Err(KpError::Parameter("target momentum must be positive".into()));
    }
    let eps = epsilon_for(kp.l2sq(), p_target);
    comparison_map_with(kp, gp_grid, eps, None, p_target)
}

/// Comparison map with an explicit `eps`; `t` is solved from `p_target`
/// unless given.
pub fn comparison_map_with(
    kp: &KpGroundState,
    gp_grid: &TorusGrid,
    eps: f64,
    t: Option<f64>,
    p_target: f64,
) -> Result<ComparisonMap, KpError> {
    require_2d(gp_grid)?;
    if !(eps > 0.0) {
        return Err(KpError::Parameter("eps must be positive".into()));
    }
    let (w, v) = rescaled_samples(kp, gp_grid, eps)?;
    let build = |t: f64| {
        let values = w
            .iter()
            .zip(&v)
            .map(|(&wi, &vi)| {
                let rho = 1.0 - t * eps * eps / 2.0 * wi;
                Complex64::from_polar(rho, t * eps / SQRT_2 * vi)
            })
            .collect();
        ComplexField::from_raw(gp_grid, values)
    };
    if let Some(t) = t {
        return Ok(ComparisonMap {
            field: build(t),
            eps,
            t,
        });
    }
    let t0 = t_from_cubic(&kp.functionals, eps, p_target)?;
    let f = |t: f64| momentum_torus(&build(t)) - p_target;
    let (mut ta, mut fa) = (t0, f(t0));
    let (mut tb, mut fb) = (t0 * 1.001, f(t0 * 1.001));
    for _ in 0..60 {
        if fb.abs() <= 1e-12 * p_target {
            break;
        }
        if fb == fa {
            break;
        }
        let tc = tb - fb * (tb - ta) / (fb - fa);
        if !(tc > 0.0) {
            return Err(KpError::NoRealRoot(p_target));
        }
        ta = tb;
        fa = fb;
        tb = tc;
        fb = f(tc);
    }
    if fb.abs() > 1e-8 {
        return Err(KpError::NoRealRoot(p_target));
    }
    Ok(ComparisonMap {
        field: build(tb),
        eps,
        t: tb,
    })
}

/// Samples of `w` and `v` at `(eps x_1, eps^2 x_2 / sqrt 2)` for every GP grid point.
fn rescaled_samples(kp: &KpGroundState, gp_grid: &TorusGrid, eps: f64) -> Result<(Vec<f64>, Vec<f64>), KpError> {
    let ga = gp_grid.half_periods();
    let ka = kp.grid.half_periods();
    let window = [ga[0] * eps, ga[1] * eps * eps / SQRT_2];
    let available = [ka[0], ka[1]];
    let fits = (0..2).all(|i| window[i] <= available[i] * (1.0 + 1e-9) && window[i] >= KP_CORE.min(available[i]));
    if !fits {
        return Err(KpError::DoesNotFit { window, available });
    }
    let matching = gp_grid.sizes() == kp.grid.sizes() && (0..2).all(|i| (window[i] / available[i] - 1.0).abs() <= 1e-12);
    if matching {
        return Ok((kp.w.clone(), kp.vpot.clone()));
    }
    let xs: Vec<f64> = gp_grid.coords(0).iter().map(|x| x * eps).collect();
    let ys: Vec<f64> = gp_grid.coords(1).iter().map(|y| y * eps * eps / SQRT_2).collect();
    Ok((
        trig_interpolate(&kp.grid, &kp.w, &xs, &ys),
        trig_interpolate(&kp.grid, &kp.vpot, &xs, &ys),
    ))
}

/// Trigonometric interpolant of real samples evaluated on the tensor grid `xs x ys`.
pub fn trig_interpolate(grid: &TorusGrid, f: &[f64], xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let (n1, n2) = (grid.sizes()[0], grid.sizes()[1]);
    let a = grid.half_periods();
    let mut c = spectral::forward_real(grid, f);
    let norm = 1.0 / (n1 * n2) as f64;
    for (i, z) in c.iter_mut().enumerate() {
        let idx = grid.unravel(i);
        if idx[0] == n1 / 2 || idx[1] == n2 / 2 {
            *z = Complex64::default();
        } else {
            *z *= norm;
        }
    }
    let k1 = grid.wavenumbers(0);
    let k2 = grid.wavenumbers(1);
    let partial: Vec<Vec<Complex64>> = xs
        .par_iter()
        .map(|&x| {
            let e: Vec<Complex64> = k1.iter().map(|&k| Complex64::from_polar(1.0, k * (x + a[0]))).collect();
            let mut row = vec![Complex64::default(); n2];
            for (j1, ej) in e.iter().enumerate() {
                let src = &c[j1 * n2..(j1 + 1) * n2];
                for (r, s) in row.iter_mut().zip(src) {
                    *r += ej * s;
                }
            }
            row
        })
        .collect();
    let e2: Vec<Vec<Complex64>> = ys
        .iter()
        .map(|&y| k2.iter().map(|&k| Complex64::from_polar(1.0, k * (y + a[1]))).collect())
        .collect();
    partial
        .par_iter()
        .flat_map_iter(|row| {
            e2.iter()
                .map(move |e| row.iter().zip(e).map(|(r, q)| (r * q).re).sum::<f64>())
        })
        .collect()
}

/// `sigma w(sqrt(sigma) x_1, sigma x_2)` on the box shrunk by `(sqrt sigma, sigma)`:
/// the same samples times `sigma`, on the matching grid.
pub fn scale_profile(grid: &TorusGrid, w: &[f64], sigma: f64) -> Result<(TorusGrid, Vec<f64>), KpError> {
    require_2d(grid)?;
    if !(sigma > 0.0) {
        return Err(KpError::Parameter("sigma must be positive".into()));
    }
    let a = grid.half_periods();
    let scaled = TorusGrid::new(grid.sizes(), &[a[0] / sigma.sqrt(), a[1] / sigma])?;
    Ok((scaled, w.iter().map(|x| sigma * x).collect()))
}

/// Solves the speed-`sigma` profile on the shrunk box and maps it back to
/// unit speed; returns the relative L2 distance to `kp.w`.
pub fn scaling_check(kp: &KpGroundState, sigma: f64, cfg: &PetviashviliConfig) -> Result<f64, KpError> {
    let (scaled_grid, _) = scale_profile(&kp.grid, &kp.w, sigma)?;
    let fast = petviashvili_solve(&scaled_grid, &PetviashviliConfig { speed: sigma, ..*cfg })?;
    let back: Vec<f64> = fast.w.iter().map(|x| x / sigma).collect();
    let num = sum_by(back.len(), |i| (back[i] - kp.w[i]).powi(2)).sqrt();
    let den = sum_by(back.len(), |i| kp.w[i].powi(2)).sqrt();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::energy;
    use crate::hydro::{lift, momentum_hydro};

    fn small_state() -> KpGroundState {
        let grid = kp_grid(128, 40.0).unwrap();
        petviashvili_solve(&grid, &PetviashviliConfig::default()).unwrap()
    }

    #[test]
    fn zero_profile_functionals() {
        let grid = kp_grid(32, 20.0).unwrap();
        let w = vec![0.0; grid.len()];
        let f = kp_functionals(&grid, &w);
        assert_eq!((f.e_kp, f.s, f.l2sq), (0.0, 0.0, 0.0));
        assert!(velocity_potential(&grid, &w).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn functionals_of_derivative_bump() {
        // w = d_1 g with g = exp(-x_1^2 - x_2^2 / 2): every term has a closed form.
        let grid = kp_grid(128, 24.0).unwrap();
        let w: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                -2.0 * x[0] * (-(x[0] * x[0]) - x[1] * x[1] / 2.0).exp()
            })
            .collect();
        let f = kp_functionals(&grid, &w);
        // int (d_1 g)^2 = 4 int x^2 e^{-2x^2} * int e^{-y^2} = sqrt(pi/2) * sqrt(pi)
        let l2 = (PI / 2.0).sqrt() * PI.sqrt();
        assert!((f.l2sq - l2).abs() < 1e-10 * l2);
        // int (d_1^2 g)^2 = int (4x^2 - 2)^2 e^{-2x^2} * sqrt(pi) = 3 sqrt(pi/2) sqrt(pi)
        assert!((f.dx_sq - 3.0 * l2).abs() < 1e-9 * l2);
        // d_1^{-1} d_2 w is d_2 g minus its x_1 mean; int (d_2 g)^2 = sqrt(pi/2) sqrt(pi) / 2
        // and the mean carries (pi / L_1) sqrt(pi) / 2.
        let dy = 0.5 * l2 - PI / 24.0 * PI.sqrt() / 2.0;
        assert!((f.dy_sq - dy).abs() < 1e-9 * dy, "{} {}", f.dy_sq, dy);
        assert!(f.cube.abs() < 1e-12);
    }

    #[test]
    fn ground_state_small_box() {
        let st = small_state();
        assert!(st.residual <= 1e-8, "residual {}", st.residual);
        assert!(st.s() > 0.0 && st.e_kp() < 0.0);
        assert!(st.functionals.cube > 0.0);
        assert!((st.stabilizer - 1.0).abs() < 1e-10);
        // d_1 vpot = w
        let d1 = spectral::derivative_real(&st.grid, &st.vpot, 0);
        let num = sum_by(d1.len(), |i| (d1[i] - st.w[i]).powi(2)).sqrt();
        let den = sum_by(d1.len(), |i| st.w[i].powi(2)).sqrt();
        assert!(num / den <= 1e-10, "{}", num / den);
    }

    #[test]
    fn potential_is_odd_for_even_profile() {
        let st = small_state();
        let n = st.grid.sizes()[0];
        let mut worst: f64 = 0.0;
        for i in 0..st.grid.len() {
            let idx = st.grid.unravel(i);
            let j = st.grid.ravel(&[(n - idx[0]) % n, idx[1]]);
            worst = worst.max((st.w[i] - st.w[j]).abs());
            worst = worst.max((st.vpot[i] + st.vpot[j]).abs() / 10.0);
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn lump_is_close_to_profile_and_potential() {
        let grid = kp_grid(256, 80.0).unwrap();
        let w = lump(&grid);
        let v = lump_potential(&grid);
        let dv = spectral::derivative_real(&grid, &v, 0);
        // The potential jumps across the box in x_1, so compare away from the edge.
        let mut worst: f64 = 0.0;
        for i in 0..grid.len() {
            let x = grid.position(i);
            if x[0].abs() < 20.0 && x[1].abs() < 20.0 {
                worst = worst.max((dv[i] - w[i]).abs());
            }
        }
        assert!(worst < 0.2, "{worst}");
        let st = petviashvili_solve(&grid, &PetviashviliConfig::default()).unwrap();
        let centre = grid.ravel(&[128, 128]);
        assert!((st.w[centre] - 8.0).abs() < 0.2, "{}", st.w[centre]);
        assert!((st.l2sq() - LUMP_L2SQ).abs() / LUMP_L2SQ < 0.02);
    }

    #[test]
    fn extrapolation_is_exact_on_polynomials() {
        let q = |l: f64| 3.0 + 2.0 / (l * l) - 5.0 / l.powi(4);
        let s: Vec<(f64, f64)> = [80.0, 120.0, 160.0].iter().map(|&l| (l, q(l))).collect();
        assert!((extrapolate_in_inverse_square(&s) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_root_matches_expansion() {
        let f = KpFunctionals::from_parts(LUMP_L2SQ, 0.0, 0.0, 1500.0);
        for &p in &[1e-3, 1e-2, 0.05] {
            let eps = epsilon_for(f.l2sq, p);
            let t = t_from_cubic(&f, eps, p).unwrap();
            let g = eps * t * t * f.l2sq / 2.0 - eps.powi(3) * t.powi(3) * f.cube / 8.0;
            assert!((g - p).abs() < 1e-14);
            let err = (t - t_asymptotic(&f, p)).abs();
            assert!(err < 1e3 * p.powi(4), "p={p} err={err}");
        }
        assert!(matches!(t_from_cubic(&f, 5.0, 1e3), Err(KpError::NoRealRoot(_))));
    }

    #[test]
    fn comparison_map_hits_momentum() {
        let st = small_state();
        let p = 0.05;
        let eps = epsilon_for(st.l2sq(), p);
        let grid = kp_scaled_grid(&st.grid, eps).unwrap();
        let map = comparison_map(&st, &grid, p).unwrap();
        assert!((momentum_torus(&map.field) - p).abs() <= 1e-8);
        assert!(map.field.min_modulus() >= 0.5);
        let h = lift(&map.field, 0.5).unwrap();
        assert!((momentum_hydro(&h) - p).abs() <= 1e-8 * p);
        assert!(energy(&map.field) < SQRT_2 * p);
        assert!((map.t - 1.0 / 6.0).abs() < 0.05);
    }

    #[test]
    fn comparison_map_on_foreign_grid_interpolates() {
        let st = small_state();
        let p = 0.05;
        let eps = epsilon_for(st.l2sq(), p);
        let matched = kp_scaled_grid(&st.grid, eps).unwrap();
        let a = matched.half_periods();
        let coarse = TorusGrid::new(&[64, 64], &[a[0], a[1]]).unwrap();
        let m1 = comparison_map(&st, &matched, p).unwrap();
        let m2 = comparison_map(&st, &coarse, p).unwrap();
        assert!((momentum_torus(&m2.field) - p).abs() <= 1e-8);
        assert!((m1.t - m2.t).abs() < 1e-2 * m1.t, "{} {}", m1.t, m2.t);
        let small = TorusGrid::new(&[64, 64], &[a[0] / 10.0, a[1] / 10.0]).unwrap();
        assert!(matches!(comparison_map(&st, &small, p), Err(KpError::DoesNotFit { .. })));
    }

    #[test]
    fn interpolation_reproduces_grid_values() {
        let grid = kp_grid(32, 10.0).unwrap();
        let f: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                (2.0 * PI * x[0] / 10.0).sin() + (4.0 * PI * x[1] / 10.0).cos()
            })
            .collect();
        let xs = [0.3, -1.7];
        let ys = [2.2, 4.9];
        let out = trig_interpolate(&grid, &f, &xs, &ys);
        for (k, (x, y)) in xs.iter().flat_map(|x| ys.iter().map(move |y| (x, y))).enumerate() {
            let exact = (2.0 * PI * x / 10.0).sin() + (4.0 * PI * y / 10.0).cos();
            assert!((out[k] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn speed_scaling_reproduces_profile() {
        let st = small_state();
        let d = scaling_check(&st, 4.0, &PetviashviliConfig::default()).unwrap();
        assert!(d <= 1e-3, "{d}");
    }

    #[test]
    fn rejects_3d() {
        let g = TorusGrid::torus(3, &[8, 8, 8], 1.0).unwrap();
        assert!(matches!(
            petviashvili_solve(&g, &PetviashviliConfig::default()),
            Err(KpError::Dimension(3))
        ));
    }
}
