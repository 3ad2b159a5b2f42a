//! Test families, blow-up, concentration constants and the certificate.

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use khtm_core::certify::{build_report, concentration_upper, sharp_estimate_battery, ReportOptions};
use khtm_core::families::{blowup_table, moser, witness_lower_bound, DEFAULT_EPS_GRID};
use khtm_core::model::{DimensionParams, Perturbation};
use khtm_core::profile::{normalized, x1_norm, LinearProfile, Profile};
use khtm_core::quadrature::Scheme;
use khtm_core::special::identity_suite;

#[test]
fn identity_suite_residuals() {
    let rows = identity_suite().unwrap();
    assert_eq!(rows.len(), 33);
    assert!(rows[..32].iter().all(|r| r.residual < 1e-8));
    assert_abs_diff_eq!(rows[32].residual, 0.5, epsilon = 1e-8);
}

#[test]
fn moser_normalization() {
    for n in [2, 4] {
        let p = DimensionParams::new(n).unwrap();
        for j in [1.0, 5.0, 10.0, 20.0] {
            let norm = x1_norm(&moser(j, &p).unwrap(), &p, &Scheme::default()).unwrap();
            assert!((norm - 1.0).abs() < 1e-6, "N={n} j={j} norm={norm}");
        }
    }
}

#[test]
fn blowup_along_moser_sequence() {
    let p = DimensionParams::new(2).unwrap();
    let rows = blowup_table(&[5.0, 10.0, 15.0, 20.0], 1.2 * p.mu_n, &Perturbation::Zero, &p, &Scheme::default()).unwrap();
    for r in &rows {
        assert!(r.value >= (0.2 * r.j).exp() / 2.0 && r.holds && r.bound_applies);
    }
    assert!(rows[3].value / rows[0].value > 10.0);
}

#[test]
fn concentration_constants() {
    let e = std::f64::consts::E;
    assert_abs_diff_eq!(concentration_upper(&DimensionParams::new(2).unwrap()), (1.0 + e) / 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(concentration_upper(&DimensionParams::new(4).unwrap()), (1.0 + e.powf(1.5)) / 4.0, epsilon = 1e-12);
    assert_abs_diff_eq!(concentration_upper(&DimensionParams::new(2).unwrap()), 1.859_140_914_229_522_6, epsilon = 1e-12);
}

#[test]
fn witness_exceeds_concentration_level() {
    let p = DimensionParams::new(2).unwrap();
    let w = witness_lower_bound(&Perturbation::Zero, &p, &DEFAULT_EPS_GRID, &Scheme::default()).unwrap();
    assert!(w.value > 1.859_140_9);
    assert!(w.rows.iter().all(|r| (r.norm - 1.0).abs() < 1e-3));
    assert!(witness_lower_bound(&Perturbation::Zero, &p, &[], &Scheme::default()).is_err());
}

#[test]
fn sharp_estimate_on_moser_profiles() {
    let p = DimensionParams::new(2).unwrap();
    let rows = sharp_estimate_battery(&[2.0, 6.0, 10.0], &p, &Scheme::default()).unwrap();
    for r in rows {
        assert_abs_diff_eq!(r.check.delta, 0.5, epsilon = 1e-10);
        assert!(r.check.holds);
    }
}

#[test]
fn dry_run_report() {
    let p = DimensionParams::new(2).unwrap();
    let opts = ReportOptions { dry_run: true, ..ReportOptions::new(vec![]) };
    let run = build_report(&Perturbation::Zero, &p, &opts);
    assert!(run.solution.is_none());
    let w = run.report.witness_lower.ok().unwrap();
    assert!((w.value - 0.5).abs() < 1e-14);
    assert!(!run.report.has_failures());
}

#[test]
fn full_report_for_zero_perturbation() {
    let p = DimensionParams::new(2).unwrap();
    let s = Scheme::default();
    let init = normalized(&(Arc::new(LinearProfile) as Profile), &p, &s).unwrap();
    let run = build_report(&Perturbation::Zero, &p, &ReportOptions::new(vec![init]));
    let r = &run.report;
    assert!(!r.has_failures(), "{}", serde_json::to_string_pretty(r).unwrap());
    assert_eq!(r.cross_checks.witness_above_concentration, Some(true));
    assert!(r.admissibility.ok().unwrap().pass);
    let sol = run.solution.unwrap();
    assert!(sol.functional_value >= r.witness_lower.ok().unwrap().value - 1e-8);
}
