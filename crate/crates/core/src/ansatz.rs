//! Seed fields: quasilinear low-momentum family, vortex pairs and rings.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ComplexField;
use crate::functionals::momentum_torus;
use crate::grid::TorusGrid;

/// Healing lengths kept between a vortex core and the torus boundary.
pub const VORTEX_MARGIN: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error("ansatz support does not fit in the torus along axis {axis}: needs {needed}, half period {available}")]
    DoesNotFit {
        axis: usize,
        needed: f64,
        available: f64,
    },
    #[error("invalid ansatz parameter: {0}")]
    Parameter(String),
    #[error("ansatz `{0}` needs a {1}D grid")]
    Dimension(&'static str, usize),
    #[error("could not match the momentum {target} (reached {reached})")]
    Momentum { target: f64, reached: f64 },
}

/// Seed description, as stored in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AnsatzParams {
    /// `mu` is solved from the target momentum when absent.
    Quasilinear {
        lambda: f64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
    },
    /// KP-I comparison map; `t` and `eps` are solved from the target momentum when absent.
    KpMap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
    },
    VortexPair { d: f64 },
    VortexRing { radius: f64 },
    Snapshot { path: String },
}

impl AnsatzParams {
    pub fn validate(&self) -> Result<(), AnsatzError> {
        let bad = |m: &str| Err(AnsatzError::Parameter(m.to_string()));
        match *self {
            AnsatzParams::Quasilinear { lambda, alpha, mu } => {
                if !(lambda > 1.0) {
                    return bad("lambda must exceed 1");
                }
                if !(alpha > 1.0) {
                    return bad("alpha must exceed 1");
                }
                if let Some(mu) = mu {
                    if !(mu > 0.0 && mu < 1.0) {
                        return bad("mu must lie in (0, 1)");
                    }
                }
                Ok(())
            }
            AnsatzParams::KpMap { t, eps } => {
                if t.is_some_and(|t| !(t > 0.0)) || eps.is_some_and(|e| !(e > 0.0)) {
                    return bad("t and eps must be positive");
                }
                Ok(())
            }
            AnsatzParams::VortexPair { d } => {
                if !(d > 0.0) {
                    return bad("separation must be positive");
                }
                Ok(())
            }
            AnsatzParams::VortexRing { radius } => {
                if !(radius > 0.0) {
                    return bad("radius must be positive");
                }
                Ok(())
            }
            AnsatzParams::Snapshot { .. } => Ok(()),
        }
    }
}

/// Base bump `phi(y) = (1 - |y|^2)^6` on the unit ball, zero outside.
pub mod bump {
    pub fn value(y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|t| t * t).sum();
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - r2).powi(6)
        }
    }

    /// `d phi / d y_j`.
    pub fn partial(y: &[f64], j: usize) -> f64 {
        let r2: f64 = y.iter().map(|t| t * t).sum();
        if r2 >= 1.0 {
            0.0
        } else {
            -12.0 * y[j] * (1.0 - r2).powi(5)
        }
    }

    /// `d^2 phi / d y_j d y_k`.
    pub fn second(y: &[f64], j: usize, k: usize) -> f64 {
        let r2: f64 = y.iter().map(|t| t * t).sum();
        if r2 >= 1.0 {
            return 0.0;
        }
        let delta = if j == k { 1.0 } else { 0.0 };
        -12.0 * delta * (1.0 - r2).powi(5) + 120.0 * y[j] * y[k] * (1.0 - r2).powi(4)
    }
}

/// Scaled coordinates `(x_1 / lambda, x_perp / lambda^alpha)`.
fn scaled(x: &[f64], lambda: f64, alpha: f64) -> [f64; 3] {
    let mut y = [0.0; 3];
    y[0] = x[0] / lambda;
    let tr = lambda.powf(alpha);
    for j in 1..x.len() {
        y[j] = x[j] / tr;
    }
    y
}

/// `Gamma = rho exp(i Phi)`, `Phi = sqrt(2) mu phi(y)`, `rho = 1 - (mu / lambda) d_1 phi(y)`.
pub fn quasilinear_field(grid: &TorusGrid, lambda: f64, alpha: f64, mu: f64) -> Result<ComplexField, AnsatzError> {
    AnsatzParams::Quasilinear {
        lambda,
        alpha,
        mu: Some(mu),
    }
    .validate()?;
    let dim = grid.dim();
    for axis in 0..dim {
        let needed = if axis == 0 { lambda } else { lambda.powf(alpha) };
        let available = grid.half_periods()[axis];
        if needed >= available {
            return Err(AnsatzError::DoesNotFit {
                axis,
                needed,
                available,
            });
        }
    }
    Ok(ComplexField::from_fn(grid, |x| {
        let y = scaled(x, lambda, alpha);
        let y = &y[..dim];
        let rho = 1.0 - mu / lambda * bump::partial(y, 0);
        Complex64::from_polar(rho, SQRT_2 * mu * bump::value(y))
    })
    .expect("bump is finite"))
}

/// Continuum momentum of `Gamma` as a function of `mu`.
pub fn quasilinear_momentum_estimate(grid: &TorusGrid, lambda: f64, alpha: f64, mu: f64) -> f64 {
    let dim = grid.dim();
    let (a, b) = bump_moments(dim);
    let k = lambda.powf((dim as f64 - 1.0) * alpha - 1.0);
    SQRT_2 * mu * mu * k * (a - mu / (2.0 * lambda) * b)
}

/// `(int (d_1 phi)^2, int (d_1 phi)^3)` over the unit ball, by a fine midpoint rule.
fn bump_moments(dim: usize) -> (f64, f64) {
    let m: usize = if dim == 2 { 400 } else { 80 };
    let h = 2.0 / m as f64;
    let mut a = 0.0;
    let mut b = 0.0;
    let mut y = [0.0; 3];
    let total = m.pow(dim as u32);
    for idx in 0..total {
        let mut r = idx;
        for yj in y.iter_mut().take(dim) {
            *yj = -1.0 + (r % m) as f64 * h + h / 2.0;
            r /= m;
        }
        let d = bump::partial(&y[..dim], 0);
        a += d * d;
        b += d * d * d;
    }
    let w = h.powi(dim as i32);
    (a * w, b * w)
}

/// Quasilinear seed with `mu` chosen so that the discrete momentum equals `s`.
pub fn ansatz_quasilinear(grid: &TorusGrid, s: f64, lambda: f64, alpha: f64) -> Result<ComplexField, AnsatzError> {
    if !(s > 0.0) {
        return Err(AnsatzError::Parameter("target momentum must be positive".into()));
    }
    let mu = solve_mu(grid, s, lambda, alpha)?;
    quasilinear_field(grid, lambda, alpha, mu)
}

/// Solves `p_n(Gamma(mu)) = s` by bracketing and secant steps, relative tolerance `1e-12`.
pub fn solve_mu(grid: &TorusGrid, s: f64, lambda: f64, alpha: f64) -> Result<f64, AnsatzError> {
    let f = |mu: f64| -> Result<f64, AnsatzError> {
        Ok(momentum_torus(&quasilinear_field(grid, lambda, alpha, mu)?) - s)
    };
    let (a, _) = bump_moments(grid.dim());
    let k = lambda.powf((grid.dim() as f64 - 1.0) * alpha - 1.0);
    let guess = (s / (SQRT_2 * k * a)).sqrt().min(0.5);
    let mut lo = 0.0;
    let mut f_lo = -s;
    let mut hi = guess;
    let mut f_hi = f(hi)?;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi = (hi * 1.5).min(0.999_999);
        f_hi = f(hi)?;
        if hi >= 0.999_999 && f_hi < 0.0 {
            return Err(AnsatzError::Momentum {
                target: s,
                reached: f_hi + s,
            });
        }
    }
    // Illinois-modified regula falsi.
    let mut side = 0;
    for _ in 0..200 {
        let mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let fm = f(mid)?;
        if fm.abs() <= 1e-12 * s {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
            f_lo = fm;
            if side == -1 {
                f_hi /= 2.0;
            }
            side = -1;
        } else {
            hi = mid;
            f_hi = fm;
            if side == 1 {
                f_lo /= 2.0;
            }
            side = 1;
        }
        if (hi - lo).abs() <= 1e-15 * hi {
            return Ok(mid);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `arg(sin w)`, stable for large `|Im w|`.
fn arg_sin(w: Complex64) -> f64 {
    if w.im > 30.0 {
        PI / 2.0 - w.re
    } else if w.im < -30.0 {
        -PI / 2.0 + w.re
    } else {
        w.sin().arg()
    }
}

/// Core profile `r / sqrt(r^2 + 2)`.
fn core(r: f64) -> f64 {
    r / (r * r + 2.0).sqrt()
}

fn min_image(x: f64, half: f64) -> f64 {
    (x + half).rem_euclid(2.0 * half) - half
}

fn require_fit(grid: &TorusGrid, axis: usize, needed: f64) -> Result<(), AnsatzError> {
    let available = grid.half_periods()[axis];
    if needed > available {
        return Err(AnsatzError::DoesNotFit {
            axis,
            needed,
            available,
        });
    }
    Ok(())
}

fn positive_momentum(v: ComplexField) -> ComplexField {
    if momentum_torus(&v) < 0.0 {
        v.conj()
    } else {
        v
    }
}

/// Vortex of degree `+1` at `(0, d/2)` and `-1` at `(0, -d/2)`; the phase is
/// periodic in `x_1` through `sin(pi z / L_1)` and sums one layer of images in `x_2`.
/// Conjugated if needed so that the momentum is positive.
pub fn vortex_pair(grid: &TorusGrid, d: f64) -> Result<ComplexField, AnsatzError> {
    if grid.dim() != 2 {
        return Err(AnsatzError::Dimension("vortex_pair", 2));
    }
    AnsatzParams::VortexPair { d }.validate()?;
    require_fit(grid, 0, VORTEX_MARGIN)?;
    require_fit(grid, 1, d / 2.0 + VORTEX_MARGIN)?;
    let (a1, a2) = (grid.half_periods()[0], grid.half_periods()[1]);
    let (l1, l2) = (2.0 * a1, 2.0 * a2);
    let plus = Complex64::new(0.0, d / 2.0);
    let minus = Complex64::new(0.0, -d / 2.0);
    let v = ComplexField::from_fn(grid, |x| {
        let z = Complex64::new(x[0], x[1]);
        let mut phase = 0.0;
        for m in -1..=1 {
            let shift = Complex64::new(0.0, m as f64 * l2);
            phase += arg_sin((z - plus - shift) * (PI / l1)) - arg_sin((z - minus - shift) * (PI / l1));
        }
        let x1 = min_image(x[0], a1);
        let rp = x1.hypot(min_image(x[1] - d / 2.0, a2));
        let rm = x1.hypot(min_image(x[1] + d / 2.0, a2));
        Complex64::from_polar(core(rp) * core(rm), phase)
    })
    .expect("finite");
    Ok(positive_momentum(v))
}

/// Vortex ring of radius `radius` about the `x_1` axis, in the plane `x_1 = 0`.
/// Conjugated if needed so that the momentum is positive.
pub fn vortex_ring(grid: &TorusGrid, radius: f64) -> Result<ComplexField, AnsatzError> {
    if grid.dim() != 3 {
        return Err(AnsatzError::Dimension("vortex_ring", 3));
    }
    AnsatzParams::VortexRing { radius }.validate()?;
    require_fit(grid, 0, VORTEX_MARGIN)?;
    require_fit(grid, 1, radius + VORTEX_MARGIN)?;
    require_fit(grid, 2, radius + VORTEX_MARGIN)?;
    let a1 = grid.half_periods()[0];
    let l1 = 2.0 * a1;
    let v = ComplexField::from_fn(grid, |x| {
        let r = x[1].hypot(x[2]);
        let up = Complex64::new(x[0], r - radius) * (PI / l1);
        let down = Complex64::new(x[0], r + radius) * (PI / l1);
        let phase = arg_sin(up) - arg_sin(down);
        let x1 = min_image(x[0], a1);
        Complex64::from_polar(core(x1.hypot(r - radius)), phase)
    })
    .expect("finite");
    Ok(positive_momentum(v))
}

/// Separation with momentum close to `p` for a planar pair.
pub fn pair_separation_for(p: f64) -> f64 {
    p / PI
}

/// Ring radius with momentum close to `p`, from `p ~ pi^2 R^2`.
pub fn ring_radius_for(p: f64) -> f64 {
    p.sqrt() / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::energy;
    use crate::spectral::integrate;
    use crate::topology::{detect_vortices, line_degrees};

    fn long_grid(lambda: f64, alpha: f64) -> TorusGrid {
        TorusGrid::new(&[128, 128], &[1.25 * lambda, 1.25 * lambda.powf(alpha)]).unwrap()
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let y = [0.3, -0.2];
        let h = 1e-6;
        for j in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[j] += h;
            ym[j] -= h;
            let fd = (bump::value(&yp) - bump::value(&ym)) / (2.0 * h);
            assert!((fd - bump::partial(&y, j)).abs() < 1e-8);
            for k in 0..2 {
                let fd2 = (bump::partial(&yp, k) - bump::partial(&ym, k)) / (2.0 * h);
                assert!((fd2 - bump::second(&y, j, k)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn quasilinear_hits_target_momentum() {
        let (lambda, alpha) = (8.0, 3.0);
        let g = long_grid(lambda, alpha);
        let v = ansatz_quasilinear(&g, 0.05, lambda, alpha).unwrap();
        let p = momentum_torus(&v);
        assert!((p - 0.05).abs() <= 1e-10, "{p}");
        let e = energy(&v);
        assert!(e <= SQRT_2 * 0.05 * 1.2, "{e}");
    }

    /// Energy against a term-by-term quadrature of the closed-form integrands.
    #[test]
    fn quasilinear_energy_matches_closed_form_terms() {
        let (lambda, alpha, mu) = (6.0, 1.5, 0.1);
        let g = long_grid(lambda, alpha);
        let v = quasilinear_field(&g, lambda, alpha, mu).unwrap();
        let tr = lambda.powf(alpha);
        let density: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.position(i);
                let y = scaled(&x[..2], lambda, alpha);
                let y = &y[..2];
                let d1 = bump::partial(y, 0);
                let rho = 1.0 - mu / lambda * d1;
                let dphi = [SQRT_2 * mu / lambda * d1, SQRT_2 * mu / tr * bump::partial(y, 1)];
                let drho = [-mu / (lambda * lambda) * bump::second(y, 0, 0), -mu / (lambda * tr) * bump::second(y, 0, 1)];
                let grad2: f64 = (0..2).map(|j| drho[j] * drho[j] + rho * rho * dphi[j] * dphi[j]).sum();
                let eta = 1.0 - rho * rho;
                0.5 * grad2 + 0.25 * eta * eta
            })
            .collect();
        let oracle = integrate(&g, &density);
        let e = energy(&v);
        assert!((e - oracle).abs() <= 1e-8 * oracle, "{e} {oracle}");
        let est = quasilinear_momentum_estimate(&g, lambda, alpha, mu);
        assert!((momentum_torus(&v) - est).abs() <= 1e-4 * est);
    }

    #[test]
    fn quasilinear_energy_ratio_decreases_with_lambda() {
        let s = 0.02;
        let alpha = 1.5;
        let mut prev = f64::INFINITY;
        for lambda in [4.0, 8.0, 16.0] {
            let g = long_grid(lambda, alpha);
            let v = ansatz_quasilinear(&g, s, lambda, alpha).unwrap();
            let ratio = energy(&v) / (SQRT_2 * s);
            assert!(ratio > 1.0 && ratio < prev, "{lambda} {ratio}");
            prev = ratio;
        }
    }

    #[test]
    fn quasilinear_must_fit() {
        let g = TorusGrid::torus(2, &[32, 32], 1.0).unwrap();
        assert!(matches!(
            ansatz_quasilinear(&g, 0.05, 8.0, 3.0),
            Err(AnsatzError::DoesNotFit { .. })
        ));
        assert!(quasilinear_field(&g, 0.5, 2.0, 0.1).is_err());
    }

    #[test]
    fn pair_has_two_vortices_and_zero_degrees() {
        let g = TorusGrid::torus(2, &[128, 128], 8.0).unwrap();
        let v = vortex_pair(&g, 10.0).unwrap();
        let deg = line_degrees(&v).unwrap();
        assert_eq!((deg.d1, deg.d2), (0, 0));
        let set = detect_vortices(&v);
        assert_eq!(set.count(), 2);
        let mut w: Vec<i64> = set.vortices.iter().map(|x| x.winding).collect();
        w.sort();
        assert_eq!(w, vec![-1, 1]);
        for x in &set.vortices {
            assert!(x.position[0].abs() < 0.2 && (x.position[1].abs() - 5.0).abs() < 0.2);
        }
        let p = momentum_torus(&v);
        assert!(p > 0.0 && (p / (PI * 10.0) - 1.0).abs() < 0.3, "{p}");
    }

    #[test]
    fn pair_must_fit() {
        let g = TorusGrid::torus(2, &[64, 64], 2.0).unwrap();
        assert!(matches!(vortex_pair(&g, 20.0), Err(AnsatzError::DoesNotFit { axis: 1, .. })));
    }

    #[test]
    fn ring_is_detected_at_its_radius() {
        let g = TorusGrid::torus(3, &[64, 64, 64], 4.0).unwrap();
        let v = vortex_ring(&g, 6.0).unwrap();
        let set = detect_vortices(&v);
        assert_eq!(set.count(), 1);
        assert!(set.lines[0].closed);
        let h = g.spacings()[1];
        for x in &set.vortices {
            assert!((x.position[1].hypot(x.position[2]) - 6.0).abs() < h);
        }
        assert!(momentum_torus(&v) > 0.0);
    }
}
