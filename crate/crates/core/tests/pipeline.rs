use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use gptw::curve::{sweep_curve, SweepOptions, CSV_HEADER};
use gptw::diagnostics::DiagnosticsReport;
use gptw::kpi::{kp_grid, petviashvili_solve, PetviashviliConfig};
use gptw::minimizer::{minimize_at_p, restore_momentum, SolveConfig};
use gptw::snapshot::{self, Sidecar};
use gptw::topology::line_degrees;
use gptw::{energy, momentum_torus, ComplexField, TorusGrid};

fn small_grid() -> TorusGrid {
    TorusGrid::new(&[64, 64], &[16.0, 16.0]).unwrap()
}

#[test]
fn minimizer_survives_snapshot_round_trip() {
    let grid = small_grid();
    let r = minimize_at_p(&grid, 2.0, &SolveConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.gptw");
    let side = Sidecar {
        p_target: Some(r.p_target),
        c: Some(r.c),
        ..Default::default()
    };
    snapshot::write(&path, &r.field, Some(&side)).unwrap();
    let back = snapshot::read(&path).unwrap();
    assert_eq!(back.values(), r.field.values());
    assert_eq!(snapshot::read_sidecar(&path).unwrap().c, Some(r.c));
    assert_eq!(DiagnosticsReport::evaluate(&back, r.c), r.report);
    let degrees = line_degrees(&back).unwrap();
    assert_eq!((degrees.d1, degrees.d2), (0, 0));
}

#[test]
fn sweep_rows_match_point_solves() {
    let grid = small_grid();
    let cfg = SolveConfig::default();
    let opts = SweepOptions {
        warm_start: false,
        reseed: true,
    };
    let (curve, points) = sweep_curve(&grid, &[1.5, 2.5], &cfg, opts).unwrap();
    let csv = curve.to_csv();
    assert!(csv.starts_with(CSV_HEADER));
    for (row, point) in curve.rows.iter().zip(&points) {
        let single = minimize_at_p(&grid, row.p, &cfg).unwrap();
        assert_eq!(single.energy, point.as_ref().unwrap().energy);
        assert_eq!(row.energy, single.energy);
        assert!(row.converged && row.xi > 0.0);
    }
}

#[test]
fn kp_profile_snapshot_is_real() {
    let kp = petviashvili_solve(&kp_grid(64, 40.0).unwrap(), &PetviashviliConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kp.gptw");
    snapshot::write(&path, &kp.to_field(), None).unwrap();
    let back = snapshot::read(&path).unwrap();
    assert!(back.values().iter().all(|z| z.im == 0.0));
    assert!(kp.s() > 0.0 && kp.e_kp() < 0.0);
}

fn trig_field(grid: &TorusGrid, amps: &[(i32, i32, f64, f64)]) -> ComplexField {
    let n = grid.half_periods()[0] / PI;
    ComplexField::from_fn(grid, |x| {
        let mut v = Complex64::new(1.0, 0.0);
        for &(a, b, re, im) in amps {
            let phase = (a as f64 * x[0] + b as f64 * x[1]) / n;
            v += Complex64::new(re, im) * Complex64::new(0.0, phase).exp();
        }
        v
    })
    .unwrap()
}

fn amplitudes() -> impl Strategy<Value = Vec<(i32, i32, f64, f64)>> {
    prop::collection::vec((-4i32..=4, -4i32..=4, -0.2f64..0.2, -0.2f64..0.2), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conjugation_and_translation(amps in amplitudes(), s1 in -8isize..8, s2 in -8isize..8) {
        let grid = TorusGrid::torus(2, &[32, 32], 2.0).unwrap();
        let v = trig_field(&grid, &amps);
        let (e, p) = (energy(&v), momentum_torus(&v));
        prop_assert!((energy(&v.conj()) - e).abs() <= 1e-12 * e.max(1.0));
        prop_assert!((momentum_torus(&v.conj()) + p).abs() <= 1e-12 * p.abs().max(1.0));
        let moved = v.roll(&[s1, s2]);
        prop_assert!((energy(&moved) - e).abs() <= 1e-12 * e.max(1.0));
        prop_assert!((momentum_torus(&moved) - p).abs() <= 1e-12 * p.abs().max(1.0));
        let phase = v.scale(Complex64::from_polar(1.0, 0.7));
        prop_assert!((energy(&phase) - e).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn restore_hits_nearby_targets(amps in amplitudes(), shift in -0.05f64..0.05) {
        let grid = TorusGrid::torus(2, &[32, 32], 2.0).unwrap();
        let v = trig_field(&grid, &amps);
        let p = momentum_torus(&v);
        prop_assume!(p.abs() > 1e-3);
        let target = p * (1.0 + shift);
        if let Ok(w) = restore_momentum(&v, target) {
            prop_assert!((momentum_torus(&w) - target).abs() <= 1e-10 * target.abs().max(1.0));
        }
    }
}
