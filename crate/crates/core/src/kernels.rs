//! The multiplier `L_eps(xi) = |xi|^2 / (|xi|^4 + 2|xi|^2 - c^2 xi_1^2)` and the
//! closed forms of `int L_eps^2` in two and three dimensions.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use quadrature::double_exponential::integrate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernels are defined in dimension 2 or 3, got {0}")]
    Dimension(usize),
    #[error("speed {0} outside [0, sqrt 2]")]
    Speed(f64),
    #[error("int L^2 diverges in 2D at the sonic speed")]
    SonicIn2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub dim: usize,
    pub c: f64,
}

impl KernelSpec {
    pub fn new(dim: usize, c: f64) -> Result<Self, KernelError> {
        if !(2..=3).contains(&dim) {
            return Err(KernelError::Dimension(dim));
        }
        if !(0.0..=SQRT_2).contains(&c) {
            return Err(KernelError::Speed(c));
        }
        Ok(KernelSpec { dim, c })
    }

    /// `sqrt(2 - c^2)`.
    pub fn eps(&self) -> f64 {
        (2.0 - self.c * self.c).max(0.0).sqrt()
    }

    fn finite_in_2d(&self) -> Result<(), KernelError> {
        if self.dim == 2 && self.c >= SQRT_2 {
            Err(KernelError::SonicIn2D)
        } else {
            Ok(())
        }
    }
}

/// Zero at the origin, where the second form has a removable singularity.
pub fn l_eps(xi: &[f64], spec: &KernelSpec) -> f64 {
    let r2: f64 = xi.iter().map(|x| x * x).sum();
    if r2 == 0.0 {
        return 0.0;
    }
    r2 / (r2 * r2 + 2.0 * r2 - spec.c * spec.c * xi[0] * xi[0])
}

/// `pi / (sqrt 2 eps)` in 2D, `(pi^2 / c) arcsin(c / sqrt 2)` in 3D.
pub fn closed_form(spec: &KernelSpec) -> Result<f64, KernelError> {
    spec.finite_in_2d()?;
    Ok(match spec.dim {
        2 => PI / (SQRT_2 * spec.eps()),
        _ if spec.c == 0.0 => PI * PI / SQRT_2,
        _ => PI * PI / spec.c * (spec.c / SQRT_2).min(1.0).asin(),
    })
}

const REDUCED_TOL: f64 = 1e-13;

/// `(1/2) int_0^{2 pi} d theta / (2 - c^2 cos^2 theta)`: the radial integral done exactly.
pub fn reduced_2d_angular(c: f64) -> f64 {
    let e2 = (2.0 - c * c).max(0.0);
    2.0 * integrate(|t| 1.0 / (e2 + c * c * t.sin().powi(2)), 0.0, FRAC_PI_2, REDUCED_TOL).integral
}

/// `2 int_0^inf dt / (2 - c^2 + 2 t^2)` after `t = tan theta`.
pub fn reduced_2d_tan(c: f64) -> f64 {
    let e2 = (2.0 - c * c).max(0.0);
    2.0 * integrate(
        |s: f64| {
            let t = s.tan();
            (1.0 + t * t) / (e2 + 2.0 * t * t)
        },
        0.0,
        FRAC_PI_2,
        REDUCED_TOL,
    )
    .integral
}

/// `pi^2 int_0^1 du / sqrt(2 - c^2 u^2)` with `u = cos theta`, evaluated
/// through `u = sin phi` so the sonic endpoint stays smooth.
pub fn reduced_3d(c: f64) -> f64 {
    let e2 = (2.0 - c * c).max(0.0);
    let f = |phi: f64| {
        let cos = phi.cos();
        if cos == 0.0 && e2 == 0.0 {
            return 1.0 / c;
        }
        cos / (e2 + c * c * cos * cos).sqrt()
    };
    PI * PI * integrate(f, 0.0, FRAC_PI_2, REDUCED_TOL).integral
}

/// `int L_eps^2` over the whole space by the one-dimensional reductions.
pub fn l2_norm_sq(spec: &KernelSpec) -> Result<f64, KernelError> {
    spec.finite_in_2d()?;
    Ok(match spec.dim {
        2 => reduced_2d_tan(spec.c),
        _ => reduced_3d(spec.c),
    })
}

const FULL_TOL: f64 = 1e-10;

/// Nested integral over the positive orthant with `xi_j = tan s_j`, times
/// the number of orthants.
pub fn full_integral(spec: &KernelSpec) -> Result<f64, KernelError> {
    spec.finite_in_2d()?;
    let f = |xi: &[f64], jac: f64| {
        let l = l_eps(xi, spec);
        l * l * jac
    };
    let map = |s: f64| (s.tan(), 1.0 / s.cos().powi(2));
    let value = match spec.dim {
        2 => {
            4.0 * integrate(
                |a| {
                    let (x, ja) = map(a);
                    integrate(
                        |b| {
                            let (y, jb) = map(b);
                            f(&[x, y], ja * jb)
                        },
                        0.0,
                        FRAC_PI_2,
                        FULL_TOL,
                    )
                    .integral
                },
                0.0,
                FRAC_PI_2,
                FULL_TOL,
            )
            .integral
        }
        _ => {
            8.0 * integrate(
                |a| {
                    let (x, ja) = map(a);
                    integrate(
                        |b| {
                            let (y, jb) = map(b);
                            integrate(
                                |g| {
                                    let (z, jg) = map(g);
                                    f(&[x, y, z], ja * jb * jg)
                                },
                                0.0,
                                FRAC_PI_2,
                                FULL_TOL,
                            )
                            .integral
                        },
                        0.0,
                        FRAC_PI_2,
                        FULL_TOL,
                    )
                    .integral
                },
                0.0,
                FRAC_PI_2,
                FULL_TOL,
            )
            .integral
        }
    };
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub dim: usize,
    pub c: f64,
    pub eps: f64,
    pub value: f64,
    pub closed_form: f64,
    pub relative_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_relative_error: Option<f64>,
}

pub fn kernel_report(spec: &KernelSpec, with_full: bool) -> Result<KernelReport, KernelError> {
    let value = l2_norm_sq(spec)?;
    let exact = closed_form(spec)?;
    let full = if with_full { Some(full_integral(spec)?) } else { None };
    Ok(KernelReport {
        dim: spec.dim,
        c: spec.c,
        eps: spec.eps(),
        value,
        closed_form: exact,
        relative_error: (value - exact).abs() / exact,
        full,
        full_relative_error: full.map(|f| (f - exact).abs() / exact),
    })
}

/// Relative gap between the unreduced integral and the closed form.
pub fn quadrature_vs_formula(spec: &KernelSpec) -> Result<f64, KernelError> {
    let exact = closed_form(spec)?;
    Ok((full_integral(spec)? - exact).abs() / exact)
}
