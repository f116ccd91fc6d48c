//! One runner per subcommand. Each records its checks and artifacts in a [`Run`].

use std::f64::consts::SQRT_2;

use serde_json::json;

use gptw::asymptotics::{asymptotic_fit, comparison_bounds, scaled_sweep};
use gptw::curve::{parse_p_list, sweep_curve, SweepPoint};
use gptw::diagnostics::DiagnosticsReport;
use gptw::kernels::{kernel_report, KernelSpec};
use gptw::kpi::solve_extrapolated;
use gptw::minimizer::{minimize_at_p, multiplier_estimate, MinimizerResult, Preconditioner, SolveError};
use gptw::snapshot::{self, Sidecar};
use gptw::ComplexField;

use crate::config::{Command, RunConfig};
use crate::report::{Check, Run};

pub const TWC_LIMIT: f64 = 1e-5;
pub const IDENTITY_LIMIT: f64 = 1e-3;
pub const KP_RESIDUAL_LIMIT: f64 = 1e-8;
pub const KP_IDENTITY_LIMIT: f64 = 1e-6;
pub const KERNEL_LIMIT: f64 = 1e-6;
pub const CUBIC_LIMIT: f64 = 0.25;
pub const EXPONENT_RANGE: (f64, f64) = (1.6, 2.4);
pub const BOUND_SLACK: f64 = 1e-4;
/// Largest `|gap| / p^4` accepted as a bounded quartic term.
pub const QUARTIC_LIMIT: f64 = 10.0;

pub type RunResult = Result<(), Box<dyn std::error::Error>>;

pub fn dispatch(cmd: Command, cfg: &RunConfig, run: &mut Run) -> RunResult {
    match cmd {
        Command::Solve => solve(cfg, run),
        Command::Sweep => sweep(cfg, run),
        Command::Kp => kp(cfg, run),
        Command::Kernels => kernels(cfg, run),
        Command::Diagnose => diagnose(cfg, run),
        Command::VerifyAsymptotics => verify_asymptotics(cfg, run),
    }
}

fn sidecar(r: &MinimizerResult) -> Sidecar {
    let mut s = Sidecar {
        p_target: Some(r.p_target),
        c: Some(r.c),
        ..Default::default()
    };
    s.residuals.insert("twc".into(), json!(r.report.twc_residual));
    s.residuals.insert("gradient".into(), json!(r.gradient_residual));
    s.residuals.insert("pohozaev".into(), json!(r.report.pohozaev_combined_res));
    s.extra.insert("energy".into(), json!(r.energy));
    s.extra.insert("seed".into(), json!(r.seed));
    s
}

fn write_snapshot(run: &mut Run, name: &str, v: &ComplexField, side: &Sidecar) -> RunResult {
    let path = run.path(name);
    snapshot::write(&path, v, Some(side))?;
    run.artifacts.push(format!("{name}.json"));
    Ok(())
}

/// Hard checks on one minimizer.
fn solution_checks(run: &mut Run, prefix: &str, r: &MinimizerResult) {
    run.check(Check::flag(format!("{prefix}converged"), r.converged));
    run.check(Check::at_most(format!("{prefix}twc_residual"), r.report.twc_residual, TWC_LIMIT));
    run.check(Check::flag(format!("{prefix}subsonic"), r.c > 0.0 && r.c < SQRT_2).with_detail(format!("c = {}", r.c)));
}

fn solve(cfg: &RunConfig, run: &mut Run) -> RunResult {
    let grid = cfg.grid.build()?;
    let p = cfg.p_list()?[0];
    let r = match minimize_at_p(&grid, p, &cfg.solver) {
        Ok(r) => r,
        Err(SolveError::NotConverged(r)) => *r,
        Err(e) => return Err(e.into()),
    };
    println!("p = {} E = {} c = {} Sigma = {} iterations = {}", r.p_target, r.energy, r.c, r.sigma, r.iterations);
    run.write_json("result.json", &r)?;
    if cfg.format.snapshots {
        write_snapshot(run, "field.gptw", &r.field, &sidecar(&r))?;
    }
    solution_checks(run, "", &r);
    Ok(())
}

fn sweep(cfg: &RunConfig, run: &mut Run) -> RunResult {
    let grid = cfg.grid.build()?;
    let ps = cfg.p_list()?;
    let (curve, points) = sweep_curve(&grid, &ps, &cfg.solver, cfg.sweep)?;
    run.write("curve.csv", curve.to_csv())?;
    run.write_json("curve.json", &curve)?;
    if cfg.format.snapshots {
        for (i, point) in points.iter().enumerate() {
            if let Ok(r) = point {
                write_snapshot(run, &format!("p{i:03}.gptw"), &r.field, &sidecar(r))?;
            }
        }
    }
    print!("{}", curve.to_csv());
    let failed: Vec<String> = points
        .iter()
        .zip(&ps)
        .filter(|(pt, _)| !matches!(pt, Ok(r) if r.converged))
        .map(|(pt, p)| match pt {
            Err(e) => format!("p = {p}: {e}"),
            Ok(_) => format!("p = {p}"),
        })
        .collect();
    run.check(Check::flag("all_converged", failed.is_empty()).with_detail(failed.join("; ")));
    let k = &curve.checks;
    run.check(Check::at_most("monotone", k.max_decrease, 0.0));
    run.check(Check::at_most("concave", k.max_second_difference, gptw::curve::SHAPE_TOL));
    run.check(Check::at_most("lipschitz", k.max_lipschitz_excess, gptw::curve::SHAPE_TOL));
    if cfg.grid.dim == 2 {
        run.check(Check::at_least("xi_positive", k.min_xi, f64::MIN_POSITIVE));
    }
    if !k.finite_difference_speeds.is_empty() {
        run.check(Check::at_most("speed_consistent", k.max_speed_gap, gptw::curve::SPEED_TOL));
    }
    Ok(())
}

fn kp(cfg: &RunConfig, run: &mut Run) -> RunResult {
    let (ex, state) = solve_extrapolated(&cfg.kp.boxes(), &cfg.kp.petviashvili)?;
    let worst_residual = ex.residuals.iter().cloned().fold(0.0, f64::max);
    let (energy_defect, action_defect) = if cfg.kp.extrapolate {
        (ex.limit.energy_identity_defect(), ex.limit.action_identity_defect())
    } else {
        (state.functionals.energy_identity_defect(), state.functionals.action_identity_defect())
    };
    let s_kp = if cfg.kp.extrapolate { ex.s_kp() } else { state.s() };
    println!("S_KP = {s_kp} (box S = {}, residual {worst_residual:e})", state.s());
    run.write_json(
        "kp.json",
        &json!({
            "S_KP": s_kp,
            "state": state.summary_json(),
            "extrapolation": ex,
        }),
    )?;
    if cfg.format.snapshots {
        let side = Sidecar {
            extra: state.summary_json().as_object().cloned().unwrap_or_default(),
            ..Default::default()
        };
        write_snapshot(run, "kp.gptw", &state.to_field(), &side)?;
    }
    run.check(Check::at_most("kp_residual", worst_residual, KP_RESIDUAL_LIMIT));
    run.check(Check::at_most("energy_identity", energy_defect, KP_IDENTITY_LIMIT));
    run.check(Check::at_most("action_identity", action_defect, KP_IDENTITY_LIMIT));
    run.check(Check::at_least("action_positive", s_kp, f64::MIN_POSITIVE));
    Ok(())
}

fn kernels(cfg: &RunConfig, run: &mut Run) -> RunResult {
    let c = cfg.kernels.c.ok_or("kernels needs a speed")?;
    let spec = KernelSpec::new(cfg.grid.dim, c)?;
    let r = kernel_report(&spec, cfg.kernels.full)?;
    println!("value        {}", r.value);
    println!("closed form  {}", r.closed_form);
    println!("rel. error   {:e}", r.relative_error);
    if let (Some(full), Some(err)) = (r.full, r.full_relative_error) {
        println!("unreduced    {full} (rel. error {err:e})");
    }
    run.write_json("kernels.json", &r)?;
    run.check(Check::at_most("reduced_vs_closed_form", r.relative_error, KERNEL_LIMIT));
    if let Some(err) = r.full_relative_error {
        run.check(Check::at_most("unreduced_vs_closed_form", err, KERNEL_LIMIT));
    }
    Ok(())
}

fn diagnose(cfg: &RunConfig, run: &mut Run) -> RunResult {
    let path = cfg.diagnose.input.as_ref().ok_or("diagnose needs an input")?;
    let v = snapshot::read(path)?;
    let side_c = snapshot::read_sidecar(path).ok().and_then(|s| s.c);
    let c = match cfg.diagnose.c.or(side_c) {
        Some(c) => c,
        None => multiplier_estimate(&v, Preconditioner::default())?,
    };
    let r = DiagnosticsReport::evaluate(&v, c);
    println!("{}", r.to_json());
    run.write("diagnostics.json", r.to_json() + "\n")?;
    run.check(Check::at_most("twc_residual", r.twc_residual, TWC_LIMIT));
    run.check(Check::at_most("pohozaev_res1", r.pohozaev_res1, IDENTITY_LIMIT));
    for (axis, res) in r.pohozaev_res2.iter().enumerate() {
        run.check(Check::at_most(format!("pohozaev_res2_axis{}", axis + 1), *res, IDENTITY_LIMIT));
    }
    if let Some(res) = r.hydro_res_cp {
        run.check(Check::at_most("hydro_cp", res, IDENTITY_LIMIT));
    }
    if let Some(res) = r.hydro_res_2d {
        run.check(Check::at_most("hydro_2d", res, IDENTITY_LIMIT));
    }
    if let Some(res) = r.eta_l2 {
        run.check(Check::at_most("eta_l2", res, IDENTITY_LIMIT));
    }
    Ok(())
}

fn verify_asymptotics(cfg: &RunConfig, run: &mut Run) -> RunResult {
    let (ex, state) = solve_extrapolated(&cfg.kp.boxes(), &cfg.kp.petviashvili)?;
    let s_kp = if cfg.kp.extrapolate { ex.s_kp() } else { state.s() };
    let p_bound = parse_p_list(&cfg.asymptotics.p_bound)?;
    let p_fit = parse_p_list(&cfg.asymptotics.p_fit)?;
    let bound = comparison_bounds(&state, &p_bound, s_kp)?;
    let (curve, points) = scaled_sweep(&state, &p_fit, &cfg.solver)?;
    run.write("curve.csv", curve.to_csv())?;
    let fit = asymptotic_fit(&curve, s_kp);
    run.write_json(
        "asymptotics.json",
        &json!({
            "S_KP": s_kp,
            "fit": fit.as_ref().ok(),
            "bound": bound,
        }),
    )?;
    let unconverged: Vec<String> = points
        .iter()
        .zip(&p_fit)
        .filter(|(pt, _)| !matches!(pt, Ok(r) if r.converged))
        .map(|(_, p)| p.to_string())
        .collect();
    run.check(Check::flag("scaled_sweep_converged", unconverged.is_empty()).with_detail(unconverged.join(",")));
    let show = |pt: &SweepPoint| pt.as_ref().map(|r| r.report.twc_residual).unwrap_or(f64::INFINITY);
    let worst = points.iter().map(show).fold(0.0, f64::max);
    run.check(Check::at_most("scaled_sweep_twc", worst, TWC_LIMIT));
    match fit {
        Ok(fit) => {
            println!(
                "A_fit = {} A_theory = {} (rel. {:.3e}), speed exponent {}",
                fit.a_fit, fit.a_theory, fit.relative_error, fit.c_exponent
            );
            run.check(Check::at_most("cubic_coefficient", fit.relative_error, CUBIC_LIMIT));
            run.check(
                Check::flag(
                    "speed_exponent",
                    (EXPONENT_RANGE.0..=EXPONENT_RANGE.1).contains(&fit.c_exponent),
                )
                .with_detail(format!("{}", fit.c_exponent)),
            );
        }
        Err(e) => run.check(Check::flag("cubic_fit", false).with_detail(e.to_string())),
    }
    println!("comparison map: min gap {:e}, quartic {:e}", bound.min_gap, bound.quartic);
    run.check(Check::at_least("comparison_upper_bound", bound.min_gap, -BOUND_SLACK));
    run.check(Check::at_most("comparison_quartic", bound.max_ratio, QUARTIC_LIMIT));
    Ok(())
}
