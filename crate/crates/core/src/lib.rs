//! Subsonic travelling waves of the Gross-Pitaevskii equation, computed by
//! constrained energy minimization at fixed momentum on periodic tori.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod fft;

pub mod ansatz;
pub mod asymptotics;
pub mod curve;
pub mod diagnostics;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod hydro;
pub mod kernels;
pub mod kpi;
pub mod minimizer;
pub mod snapshot;
pub mod spectral;
pub mod topology;

#[cfg(test)]
mod testutil;

pub use field::{ComplexField, FieldError, RealField, VectorField};
pub use functionals::{energy, momentum_affine, momentum_torus};
pub use grid::{GridError, GridSpec, TorusGrid};
