//! Minimization of the energy at fixed torus momentum, with the speed as
//! Lagrange multiplier.
//!
//! Iterates are kept as spectra. Each step moves along a preconditioned,
//! tangent-projected descent direction and is pulled back onto the momentum
//! level set by an exact quadratic correction along `i d_1 v`.

use std::f64::consts::SQRT_2;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{self, AnsatzError, AnsatzParams};
use crate::diagnostics::DiagnosticsReport;
use crate::field::ComplexField;
use crate::functionals::{energy, momentum_torus};
use crate::grid::TorusGrid;
use crate::kpi::{self, KpError, KpGroundState};
use crate::snapshot;
use crate::spectral::{self, inner_spectral, sum_by};
use crate::topology::{line_degrees, LineDegrees};

/// Speeds fed to the Bogoliubov preconditioner are clipped to this.
pub const MAX_PRECONDITIONER_SPEED: f64 = 1.41;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preconditioner {
    /// `(1 - Lap)^{-order}`; `order = 0` is the plain L2 gradient.
    Sobolev { order: f64 },
    /// Inverse of the linearization of `E - c p` about `v = 1`, shifted by `shift`.
    Bogoliubov { shift: f64 },
}

impl Default for Preconditioner {
    fn default() -> Self {
        Preconditioner::Bogoliubov { shift: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// Armijo backtracking; later steps start from twice the last accepted one,
    /// capped at `4 initial`.
    Backtracking { armijo: f64, initial: f64, shrink: f64 },
    Fixed { step: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Backtracking {
            armijo: 1e-4,
            initial: 1.0,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub max_iters: usize,
    /// Tolerance on `|g_E - c g_p| / |g_E|`.
    pub grad_tol: f64,
    /// Absolute tolerance on the final momentum.
    pub constraint_tol: f64,
    pub step: StepRule,
    pub preconditioner: Preconditioner,
    /// Planar runs: keep both line degrees at zero.
    pub sector_enforce: bool,
    /// Polak-Ribiere conjugate directions instead of plain descent.
    pub conjugate: bool,
    /// Seed family; chosen from the target momentum when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<AnsatzParams>,
    pub random_seed: u64,
    /// Amplitude of uniform noise added to the seed.
    pub seed_noise: f64,
    pub min_step: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iters: 5000,
            grad_tol: 1e-6,
            constraint_tol: 1e-10,
            step: StepRule::default(),
            preconditioner: Preconditioner::default(),
            sector_enforce: true,
            conjugate: true,
            seed: None,
            random_seed: 0,
            seed_noise: 0.0,
            min_step: 1e-12,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Config(m.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.grad_tol > 0.0 && self.constraint_tol > 0.0 && self.min_step > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.seed_noise >= 0.0) {
            return bad("seed_noise must be nonnegative");
        }
        match self.step {
            StepRule::Backtracking { armijo, initial, shrink } => {
                if !(armijo > 0.0 && armijo < 1.0 && initial > 0.0 && shrink > 0.0 && shrink < 1.0) {
                    return bad("backtracking needs 0 < armijo < 1, initial > 0, 0 < shrink < 1");
                }
            }
            StepRule::Fixed { step } => {
                if !(step > 0.0) {
                    return bad("fixed step must be positive");
                }
            }
        }
        match self.preconditioner {
            Preconditioner::Sobolev { order } if !(order >= 0.0) => bad("Sobolev order must be nonnegative"),
            Preconditioner::Bogoliubov { shift } if !(shift > 0.0) => bad("Bogoliubov shift must be positive"),
            _ => Ok(()),
        }?;
        if let Some(seed) = &self.seed {
            seed.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RestoreError {
    #[error("momentum is locally constant along i d_1 v")]
    Degenerate,
    #[error("momentum {target} is not reachable along i d_1 v")]
    MomentumUnreachable { target: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizerResult {
    #[serde(skip)]
    pub field: ComplexField,
    pub p_target: f64,
    pub p_achieved: f64,
    pub energy: f64,
    pub c: f64,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final `|g_E - c g_p| / |g_E|`.
    pub gradient_residual: f64,
    pub report: DiagnosticsReport,
    pub sector: Option<LineDegrees>,
    pub energy_history: Vec<f64>,
    /// Seed family that produced this result.
    pub seed: String,
    /// Relative energy spread between seeds, when several were tried.
    pub seed_spread: Option<f64>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("target momentum must be positive, got {0}")]
    InvalidTarget(f64),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Restore(#[from] RestoreError),
    #[error("constraint gradient i d_1 v vanishes")]
    ZeroConstraintGradient,
    #[error("iterate left the zero-degree sector at iteration {iteration}")]
    SectorEscape { iteration: usize },
    #[error("not converged after {} iterations (gradient residual {:e})", .0.iterations, .0.gradient_residual)]
    NotConverged(Box<MinimizerResult>),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Kp(#[from] KpError),
    #[error("seed snapshot: {0}")]
    Snapshot(String),
}

/// Wavenumber tables and the index of `-k` for every spectral sample.
struct Ops {
    grid: TorusGrid,
    k1: Vec<f64>,
    k2: Vec<f64>,
    neg: Vec<usize>,
    scale: f64,
}

impl Ops {
    fn new(grid: &TorusGrid) -> Self {
        let sizes = grid.sizes();
        let dim = grid.dim();
        let neg = (0..grid.len())
            .map(|i| {
                let idx = grid.unravel(i);
                let mut m = [0usize; 3];
                for a in 0..dim {
                    m[a] = (sizes[a] - idx[a]) % sizes[a];
                }
                grid.ravel(&m[..dim])
            })
            .collect();
        Ops {
            grid: grid.clone(),
            k1: grid.k_axis(0),
            k2: grid.k_squared(),
            neg,
            scale: grid.cell_volume() / grid.len() as f64,
        }
    }

    fn inner(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        inner_spectral(&self.grid, a, b)
    }

    fn momentum(&self, vh: &[Complex64]) -> f64 {
        -0.5 * sum_by(vh.len(), |i| self.k1[i] * vh[i].norm_sqr()) * self.scale
    }

    fn energy(&self, v: &[Complex64], vh: &[Complex64]) -> f64 {
        let kinetic = 0.5 * sum_by(vh.len(), |i| self.k2[i] * vh[i].norm_sqr()) * self.scale;
        let potential = 0.25 * sum_by(v.len(), |i| (1.0 - v[i].norm_sqr()).powi(2)) * self.grid.cell_volume();
        kinetic + potential
    }

    /// Spectrum of `i d_1 v`.
    fn constraint_gradient(&self, vh: &[Complex64]) -> Vec<Complex64> {
        vh.iter().zip(&self.k1).map(|(z, k)| -z * k).collect()
    }

    /// Spectrum of `-Lap v - v (1 - |v|^2)`.
    fn energy_gradient(&self, v: &[Complex64], vh: &[Complex64]) -> Vec<Complex64> {
        let mut nl: Vec<Complex64> = v.iter().map(|z| z * (1.0 - z.norm_sqr())).collect();
        spectral::forward_in_place(&self.grid, &mut nl);
        vh.iter()
            .zip(&self.k2)
            .zip(nl)
            .map(|((z, k), n)| z * k - n)
            .collect()
    }

    fn precondition(&self, p: Preconditioner, c: f64, z: &[Complex64]) -> Vec<Complex64> {
        match p {
            Preconditioner::Sobolev { order } => z
                .iter()
                .zip(&self.k2)
                .map(|(x, k)| x * (1.0 + k).powf(-order))
                .collect(),
            Preconditioner::Bogoliubov { shift } => {
                let c = c.clamp(-MAX_PRECONDITIONER_SPEED, MAX_PRECONDITIONER_SPEED);
                (0..z.len())
                    .map(|i| {
                        let zm = z[self.neg[i]].conj();
                        let a = (z[i] + zm) * 0.5;
                        let b = (z[i] - zm) * Complex64::new(0.0, -0.5);
                        let (k1, k2) = (self.k1[i], self.k2[i]);
                        let a11 = k2 + 2.0 + shift;
                        let a22 = k2 + shift;
                        let a12 = Complex64::new(0.0, c * k1);
                        let det = a11 * a22 - c * c * k1 * k1;
                        let xa = (a * a22 - a12 * b) / det;
                        let xb = (a12 * a + b * a11) / det;
                        xa + Complex64::i() * xb
                    })
                    .collect()
            }
        }
    }

    /// Exact correction `v^ (1 - s k_1)` so that the momentum equals `target`.
    fn restore(&self, vh: &mut [Complex64], target: f64) -> Result<(), RestoreError> {
        let p0 = self.momentum(vh);
        let q = p0 - target;
        if q == 0.0 {
            return Ok(());
        }
        let b = sum_by(vh.len(), |i| self.k1[i].powi(2) * vh[i].norm_sqr()) * self.scale;
        let a = -0.5 * sum_by(vh.len(), |i| self.k1[i].powi(3) * vh[i].norm_sqr()) * self.scale;
        let mass = sum_by(vh.len(), |i| vh[i].norm_sqr()) * self.scale;
        if !(b > 1e-24 * mass) {
            return Err(RestoreError::Degenerate);
        }
        let disc = b * b - 4.0 * a * q;
        if disc < 0.0 {
            return Err(RestoreError::MomentumUnreachable { target });
        }
        let s = -2.0 * q / (b + disc.sqrt());
        for (z, k) in vh.iter_mut().zip(&self.k1) {
            *z *= 1.0 - s * k;
        }
        Ok(())
    }
}

fn to_physical(grid: &TorusGrid, vh: &[Complex64]) -> Vec<Complex64> {
    spectral::inverse(grid, vh)
}

/// Moves `v` along `i d_1 v` onto the level set `p_n = target`, taking the
/// smaller root of the exact quadratic.
pub fn restore_momentum(v: &ComplexField, target: f64) -> Result<ComplexField, RestoreError> {
    let grid = v.grid();
    let ops = Ops::new(grid);
    let mut vh = spectral::forward(grid, v.values());
    let before = vh.clone();
    ops.restore(&mut vh, target)?;
    if vh == before {
        return Ok(v.clone());
    }
    Ok(ComplexField::from_raw(grid, to_physical(grid, &vh)))
}

fn initial_speed(p: f64) -> f64 {
    (SQRT_2 * (1.0 - p)).clamp(0.1, 1.3)
}

/// `c = <g_E, P g_p> / <g_p, P g_p>`. The Bogoliubov metric depends on `c`
/// itself and is iterated to a fixed point.
pub fn multiplier_estimate(v: &ComplexField, precond: Preconditioner) -> Result<f64, SolveError> {
    let grid = v.grid();
    let ops = Ops::new(grid);
    let vh = spectral::forward(grid, v.values());
    let ge = ops.energy_gradient(v.values(), &vh);
    let gp = ops.constraint_gradient(&vh);
    let gp2 = ops.inner(&gp, &gp);
    let mass = ops.inner(&vh, &vh);
    if !(gp2 > 1e-24 * mass.max(f64::MIN_POSITIVE)) {
        return Err(SolveError::ZeroConstraintGradient);
    }
    let mut c = ops.inner(&ge, &gp) / gp2;
    for _ in 0..100 {
        let pgp = ops.precondition(precond, c, &gp);
        let next = ops.inner(&ge, &pgp) / ops.inner(&gp, &pgp);
        let done = (next - c).abs() <= 1e-15 * next.abs().max(1.0);
        c = next;
        if done || matches!(precond, Preconditioner::Sobolev { .. }) {
            break;
        }
    }
    Ok(c)
}

fn in_zero_sector(v: &ComplexField) -> bool {
    matches!(line_degrees(v), Ok(d) if d.d1 == 0 && d.d2 == 0)
}

enum LineSearch {
    Accepted { vh: Vec<Complex64>, v: Vec<Complex64>, e: f64, t: f64 },
    Failed { sector: bool },
}

struct Trial<'a> {
    ops: &'a Ops,
    cfg: &'a SolveConfig,
    target: f64,
    enforce_sector: bool,
}

impl Trial<'_> {
    fn search(&self, vh: &[Complex64], e: f64, d: &[Complex64], slope: f64, t0: f64) -> LineSearch {
        let (armijo, shrink, check_energy) = match self.cfg.step {
            StepRule::Backtracking { armijo, shrink, .. } => (armijo, shrink, true),
            StepRule::Fixed { .. } => (0.0, 0.5, false),
        };
        let mut t = t0;
        let mut sector = false;
        while t >= self.cfg.min_step {
            let mut trial: Vec<Complex64> = vh.iter().zip(d).map(|(a, b)| a + b * t).collect();
            if self.ops.restore(&mut trial, self.target).is_ok() {
                let v = to_physical(&self.ops.grid, &trial);
                let en = self.ops.energy(&v, &trial);
                if en.is_finite() && (!check_energy || en <= e + armijo * t * slope) {
                    if !self.enforce_sector || in_zero_sector(&ComplexField::from_raw(&self.ops.grid, v.clone())) {
                        return LineSearch::Accepted { vh: trial, v, e: en, t };
                    }
                    sector = true;
                } else {
                    sector = false;
                }
            }
            t *= shrink;
        }
        LineSearch::Failed { sector }
    }
}

/// Descent from `v0`, after restoring it to momentum `p_target`.
pub fn minimize_from(v0: &ComplexField, p_target: f64, cfg: &SolveConfig) -> Result<MinimizerResult, SolveError> {
    minimize_labelled(v0, p_target, cfg, "given")
}

fn minimize_labelled(v0: &ComplexField, p_target: f64, cfg: &SolveConfig, label: &str) -> Result<MinimizerResult, SolveError> {
    if !(p_target > 0.0 && p_target.is_finite()) {
        return Err(SolveError::InvalidTarget(p_target));
    }
    cfg.validate()?;
    let grid = v0.grid().clone();
    let ops = Ops::new(&grid);
    let enforce_sector = cfg.sector_enforce && grid.dim() == 2;
    let mut vh = spectral::forward(&grid, v0.values());
    ops.restore(&mut vh, p_target)?;
    let mut v = to_physical(&grid, &vh);
    if enforce_sector && !in_zero_sector(&ComplexField::from_raw(&grid, v.clone())) {
        return Err(SolveError::SectorEscape { iteration: 0 });
    }
    let mut e = ops.energy(&v, &vh);
    let mut history = vec![e];
    let mut c = initial_speed(p_target);
    let mut previous: Option<(Vec<Complex64>, Vec<Complex64>, Vec<Complex64>)> = None;
    let (initial, cap) = match cfg.step {
        StepRule::Backtracking { initial, .. } => (initial, 4.0 * initial),
        StepRule::Fixed { step } => (step, step),
    };
    let mut tau = initial;
    let mut rel = f64::INFINITY;
    let mut iterations = 0;
    let search = Trial {
        ops: &ops,
        cfg,
        target: p_target,
        enforce_sector,
    };
    for it in 0..cfg.max_iters {
        iterations = it;
        let ge = ops.energy_gradient(&v, &vh);
        let gp = ops.constraint_gradient(&vh);
        let pge = ops.precondition(cfg.preconditioner, c, &ge);
        let pgp = ops.precondition(cfg.preconditioner, c, &gp);
        let denom = ops.inner(&gp, &pgp);
        if !(denom > 0.0) {
            return Err(SolveError::ZeroConstraintGradient);
        }
        c = ops.inner(&ge, &pgp) / denom;
        let r: Vec<Complex64> = ge.iter().zip(&gp).map(|(a, b)| a - b * c).collect();
        let pr: Vec<Complex64> = pge.iter().zip(&pgp).map(|(a, b)| a - b * c).collect();
        rel = (ops.inner(&r, &r) / ops.inner(&ge, &ge).max(f64::MIN_POSITIVE)).sqrt();
        if rel <= cfg.grad_tol {
            break;
        }
        let steepest: Vec<Complex64> = pr.iter().map(|z| -z).collect();
        let mut d = steepest.clone();
        let mut conjugate = false;
        if let (true, Some((d_prev, r_prev, pr_prev))) = (cfg.conjugate, &previous) {
            let num: f64 = ops.inner(&r, &pr) - ops.inner(&r, pr_prev);
            let beta = (num / ops.inner(r_prev, pr_prev)).max(0.0);
            if beta > 0.0 {
                let cand: Vec<Complex64> = d.iter().zip(d_prev).map(|(a, b)| a + b * beta).collect();
                if ops.inner(&cand, &r) < 0.0 {
                    d = cand;
                    conjugate = true;
                }
            }
        }
        let project = |d: &mut Vec<Complex64>| {
            let k = ops.inner(&gp, d) / denom;
            for (x, y) in d.iter_mut().zip(&pgp) {
                *x -= y * k;
            }
        };
        project(&mut d);
        let t0 = if it == 0 { initial } else { (2.0 * tau).min(cap) };
        let mut outcome = search.search(&vh, e, &d, ops.inner(&ge, &d), t0);
        if let (LineSearch::Failed { .. }, true) = (&outcome, conjugate) {
            d = steepest;
            project(&mut d);
            outcome = search.search(&vh, e, &d, ops.inner(&ge, &d), initial);
        }
        match outcome {
            LineSearch::Accepted { vh: nvh, v: nv, e: en, t } => {
                vh = nvh;
                v = nv;
                e = en;
                tau = t;
                history.push(e);
                previous = Some((d, r, pr));
            }
            LineSearch::Failed { sector: true } => return Err(SolveError::SectorEscape { iteration: it }),
            LineSearch::Failed { sector: false } => {
                log::debug!("line search stalled at iteration {it}, residual {rel:e}");
                break;
            }
        }
        iterations = it + 1;
        if it % 200 == 0 {
            log::trace!("it {it} E {e} c {c} rel {rel:e} t {tau}");
        }
    }
    let field = ComplexField::from_raw(&grid, v);
    let result = finish(field, p_target, c, iterations, rel, history, cfg, label);
    if result.converged {
        Ok(result)
    } else {
        Err(SolveError::NotConverged(Box::new(result)))
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    field: ComplexField,
    p_target: f64,
    c: f64,
    iterations: usize,
    rel: f64,
    energy_history: Vec<f64>,
    cfg: &SolveConfig,
    label: &str,
) -> MinimizerResult {
    let report = DiagnosticsReport::evaluate(&field, c);
    let p_achieved = momentum_torus(&field);
    let e = energy(&field);
    let sector = (field.grid().dim() == 2).then(|| line_degrees(&field).ok()).flatten();
    let converged = rel <= cfg.grad_tol
        && (p_achieved - p_target).abs() <= cfg.constraint_tol.max(1e-12 * p_target)
        && report.twc_residual <= 10.0 * cfg.grad_tol;
    MinimizerResult {
        field,
        p_target,
        p_achieved,
        energy: e,
        c,
        sigma: SQRT_2 * p_achieved - e,
        iterations,
        converged,
        gradient_residual: rel,
        report,
        sector,
        energy_history,
        seed: label.to_string(),
        seed_spread: None,
    }
}

/// Quasilinear parameters that fit the torus: `alpha = 3 / (N - 1)` and the
/// largest `lambda <= 8` with support inside 80% of every half period.
pub fn default_quasilinear(grid: &TorusGrid) -> AnsatzParams {
    let dim = grid.dim();
    let alpha = 3.0 / (dim as f64 - 1.0);
    let a = grid.half_periods();
    let perp = a[1..].iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda = 8.0_f64.min(0.8 * a[0]).min((0.8 * perp).powf(1.0 / alpha));
    AnsatzParams::Quasilinear {
        lambda: lambda.max(1.0 + 1e-9),
        alpha,
        mu: None,
    }
}

/// Seeds tried when none is configured: quasilinear up to `p = 1`, vortex
/// pair or ring from `p = 0.25` on, so both compete around `p = 0.5`.
pub fn auto_seeds(grid: &TorusGrid, p: f64) -> Vec<AnsatzParams> {
    let mut out = Vec::new();
    if p <= 1.0 {
        out.push(default_quasilinear(grid));
    }
    if p >= 0.25 {
        out.push(match grid.dim() {
            2 => AnsatzParams::VortexPair {
                d: ansatz::pair_separation_for(p),
            },
            _ => AnsatzParams::VortexRing {
                radius: ansatz::ring_radius_for(p),
            },
        });
    }
    out
}

fn seed_label(params: &AnsatzParams) -> &'static str {
    match params {
        AnsatzParams::Quasilinear { .. } => "quasilinear",
        AnsatzParams::KpMap { .. } => "kp_map",
        AnsatzParams::VortexPair { .. } => "vortex_pair",
        AnsatzParams::VortexRing { .. } => "vortex_ring",
        AnsatzParams::Snapshot { .. } => "snapshot",
    }
}

/// Builds a seed field. `kp` is used by the KP map and solved on the default
/// box when absent.
pub fn build_seed(
    grid: &TorusGrid,
    params: &AnsatzParams,
    p: f64,
    kp: Option<&KpGroundState>,
) -> Result<ComplexField, SolveError> {
    params.validate()?;
    Ok(match params {
        &AnsatzParams::Quasilinear { lambda, alpha, mu } => match mu {
            Some(mu) => ansatz::quasilinear_field(grid, lambda, alpha, mu)?,
            None => ansatz::ansatz_quasilinear(grid, p, lambda, alpha)?,
        },
        &AnsatzParams::KpMap { t, eps } => {
            let owned;
            let kp = match kp {
                Some(kp) => kp,
                None => {
                    let g = kpi::kp_grid(kpi::DEFAULT_SIZE, kpi::DEFAULT_PERIOD)?;
                    owned = kpi::petviashvili_solve(&g, &Default::default())?;
                    &owned
                }
            };
            let eps = eps.unwrap_or_else(|| kpi::epsilon_for(kp.l2sq(), p));
            kpi::comparison_map_with(kp, grid, eps, t, p)?.field
        }
        &AnsatzParams::VortexPair { d } => ansatz::vortex_pair(grid, d)?,
        &AnsatzParams::VortexRing { radius } => ansatz::vortex_ring(grid, radius)?,
        AnsatzParams::Snapshot { path } => {
            let v = snapshot::read(Path::new(path)).map_err(|e| SolveError::Snapshot(e.to_string()))?;
            if !v.grid().same_as(grid) {
                return Err(SolveError::Snapshot(format!("{path}: grid differs from the run grid")));
            }
            v
        }
    })
}

fn add_noise(v: &ComplexField, amplitude: f64, seed: u64) -> ComplexField {
    if amplitude == 0.0 {
        return v.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = v
        .values()
        .iter()
        .map(|z| z + Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amplitude)
        .collect();
    ComplexField::from_raw(v.grid(), values)
}

/// Minimizer at momentum `p_target` from the configured seed, or from every
/// automatic seed keeping the lowest converged energy.
pub fn minimize_at_p(grid: &TorusGrid, p_target: f64, cfg: &SolveConfig) -> Result<MinimizerResult, SolveError> {
    minimize_at_p_with(grid, p_target, cfg, None)
}

pub fn minimize_at_p_with(
    grid: &TorusGrid,
    p_target: f64,
    cfg: &SolveConfig,
    kp: Option<&KpGroundState>,
) -> Result<MinimizerResult, SolveError> {
    if !(p_target > 0.0 && p_target.is_finite()) {
        return Err(SolveError::InvalidTarget(p_target));
    }
    cfg.validate()?;
    let seeds = match &cfg.seed {
        Some(s) => vec![s.clone()],
        None => auto_seeds(grid, p_target),
    };
    let mut best: Option<Result<MinimizerResult, SolveError>> = None;
    let mut energies = Vec::new();
    for params in &seeds {
        let outcome = build_seed(grid, params, p_target, kp).and_then(|v0| {
            let v0 = add_noise(&v0, cfg.seed_noise, cfg.random_seed);
            minimize_labelled(&v0, p_target, cfg, seed_label(params))
        });
        if let Ok(r) = &outcome {
            energies.push(r.energy);
        }
        best = Some(match (best, outcome) {
            (None, o) => o,
            (Some(Ok(a)), Ok(b)) => Ok(if b.energy < a.energy { b } else { a }),
            (Some(Ok(a)), Err(_)) => Ok(a),
            (Some(Err(_)), Ok(b)) => Ok(b),
            (Some(Err(a)), Err(b)) => Err(prefer_error(a, b)),
        });
    }
    let mut result = best.expect("at least one seed")?;
    if energies.len() > 1 {
        let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let spread = (hi - lo) / lo.abs().max(f64::MIN_POSITIVE);
        if spread > 1e-3 {
            log::warn!("seeds disagree at p = {p_target}: relative energy spread {spread:e}");
        }
        result.seed_spread = Some(spread);
    }
    Ok(result)
}

/// Between two failures, keep an unconverged result with the lower energy.
fn prefer_error(a: SolveError, b: SolveError) -> SolveError {
    match (a, b) {
        (SolveError::NotConverged(x), SolveError::NotConverged(y)) => {
            SolveError::NotConverged(if y.energy < x.energy { y } else { x })
        }
        (a @ SolveError::NotConverged(_), _) => a,
        (_, b) => b,
    }
}
