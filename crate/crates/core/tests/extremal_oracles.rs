//! Solver invariants on the N = 2, f = γ r^a/(1−r)^b configuration.

use std::sync::{Arc, OnceLock};

use approx::assert_relative_eq;
use khtm_core::extremal::{
    el_slope, lambda_of, multistart, second_derivative, solve_extremal, ExtremalSolution, FailureKind, SolveOptions,
};
use khtm_core::families::{conc_family, witness_lower_bound, DEFAULT_EPS_GRID};
use khtm_core::functional::tm_integral;
use khtm_core::model::{DimensionParams, Perturbation};
use khtm_core::profile::{normalized, GridProfile, LinearProfile, Profile, RadialProfile};
use khtm_core::quadrature::Scheme;
use khtm_core::LabError;

fn setup() -> (Perturbation, DimensionParams, Scheme) {
    (Perturbation::power(1.0, 1.0, 1.0), DimensionParams::new(2).unwrap(), Scheme::default())
}

fn solution() -> &'static ExtremalSolution {
    static SOL: OnceLock<ExtremalSolution> = OnceLock::new();
    SOL.get_or_init(|| {
        let (f, p, s) = setup();
        let init: Profile = Arc::new(conc_family(1e-3, &p).unwrap());
        let init = normalized(&init, &p, &s).unwrap();
        solve_extremal(&f, &p, init.as_ref(), &SolveOptions::default(), &s).unwrap()
    })
}

#[test]
fn converged_solution_properties() {
    let (f, p, s) = setup();
    let sol = solution();
    assert!(sol.iterations <= 500);
    assert!(sol.el_residual < 1e-6, "{}", sol.el_residual);
    assert_relative_eq!(sol.norm, 1.0, epsilon = 1e-10);
    assert!(sol.radial_bound.min_slack >= -1e-6);
    assert!(sol.stationarity.max_abs < 1e-4, "{:?}", sol.stationarity);
    assert_eq!(sol.stationarity.derivatives.len(), 5);
    let witness = witness_lower_bound(&f, &p, &DEFAULT_EPS_GRID, &s).unwrap();
    assert!(sol.functional_value >= witness.value.max(sol.init_value) - 1e-8);
    assert_relative_eq!(sol.multiplier, p.mu_n * sol.lambda, max_relative = 1e-12);
}

#[test]
fn profile_is_nonincreasing_in_r() {
    let sol = solution();
    assert!(sol.nonincreasing);
    // nodes run in increasing t, i.e. decreasing r: values must not decrease
    let v = sol.profile.values();
    assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(v.iter().all(|&x| x >= 0.0));
}

#[test]
fn functional_value_agrees_with_tm_integral() {
    let (f, p, s) = setup();
    let sol = solution();
    let fv = tm_integral(&sol.profile, &f, p.mu_n, &p, &s).unwrap();
    assert_relative_eq!(fv.value, sol.functional_value, max_relative = 1e-6);
}

#[test]
fn lambda_of_recovers_reported_lambda() {
    let (f, p, s) = setup();
    let sol = solution();
    assert_relative_eq!(lambda_of(&sol.profile, &f, &p, &s).unwrap(), sol.lambda, max_relative = 1e-6);
}

#[test]
fn el_slope_reproduces_profile_derivative() {
    let (f, p, s) = setup();
    let sol = solution();
    for r in [0.05, 0.3, 0.5, 0.9] {
        let e = el_slope(&sol.profile, r, sol.multiplier, &f, &p, &s).unwrap();
        assert_relative_eq!(e, sol.profile.derivative(r), max_relative = 1e-5);
    }
}

#[test]
fn second_derivative_matches_finite_differences() {
    let (f, p, s) = setup();
    let sol = solution();
    let h = 1e-4;
    for r in [0.2, 0.5, 0.8] {
        let d2 = second_derivative(sol, r, &f, &p, &s).unwrap();
        let fd = (el_slope(&sol.profile, r + h, sol.multiplier, &f, &p, &s).unwrap()
            - el_slope(&sol.profile, r - h, sol.multiplier, &f, &p, &s).unwrap())
            / (2.0 * h);
        assert_relative_eq!(d2, fd, max_relative = 1e-3);
        let fd_profile = (sol.profile.derivative(r + h) - sol.profile.derivative(r - h)) / (2.0 * h);
        assert_relative_eq!(d2, fd_profile, max_relative = 1e-3);
    }
}

#[test]
fn second_derivative_finite_at_nodes_and_origin() {
    let (f, p, s) = setup();
    let sol = solution();
    for &t in sol.profile.nodes().iter().filter(|&&t| t > 0.0) {
        assert!(second_derivative(sol, (-t).exp(), &f, &p, &s).unwrap().is_finite());
    }
    let at0 = second_derivative(sol, 0.0, &f, &p, &s).unwrap();
    assert!(at0.is_finite());
    assert_relative_eq!(at0, sol.diagnostics.slope_ratio_limit, max_relative = 1e-3);
}

#[test]
fn decay_quantity_vanishes_toward_origin() {
    let d = &solution().diagnostics;
    assert!(d.decay_innermost < d.decay_tenth);
    assert!(d.hessian_trace_ok);
}

#[test]
fn grid_profile_round_trips_through_csv() {
    let sol = solution();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.csv");
    sol.profile.write_csv(&path).unwrap();
    let back = GridProfile::read_csv(&path).unwrap();
    for r in [0.01, 0.3, 0.77] {
        assert_relative_eq!(back.value(r), sol.profile.value(r), max_relative = 1e-12);
        assert_relative_eq!(back.derivative(r), sol.profile.derivative(r), max_relative = 1e-12);
    }
}

#[test]
fn invalid_damping() {
    let (f, p, s) = setup();
    let opts = SolveOptions { damping: 1.5, ..Default::default() };
    assert!(matches!(solve_extremal(&f, &p, &LinearProfile, &opts, &s), Err(LabError::Config(_))));
    let opts = SolveOptions { damping: 0.0, ..Default::default() };
    match solve_extremal(&f, &p, &LinearProfile, &opts, &s) {
        Err(LabError::Solver(fail)) => assert!(matches!(fail.kind, FailureKind::NoProgress)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn multistart_selects_the_largest_value() {
    let (_, p, s) = setup();
    let f = Perturbation::Zero;
    let inits: Vec<Profile> = vec![
        normalized(&(Arc::new(conc_family(1e-3, &p).unwrap()) as Profile), &p, &s).unwrap(),
        normalized(&(Arc::new(LinearProfile) as Profile), &p, &s).unwrap(),
    ];
    let ms = multistart(&f, &p, &inits, &SolveOptions::default(), &s).unwrap();
    assert_eq!(ms.starts.len(), 2);
    let best = ms.starts.iter().filter_map(|s| s.functional_value).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(ms.best.functional_value, best);
    assert_eq!(ms.starts[ms.selected].functional_value, Some(best));
}
