//! Radial k-Hessians against the eigenvalue form `e_j(u″, u′/r, …, u′/r)`.

mod common;

use std::sync::Arc;

use approx::assert_relative_eq;
use common::{choose, PowerSum};
use khtm_core::families::moser;
use khtm_core::hessian::{admissibility_check, hessian_fj, lift, phi_norm};
use khtm_core::model::DimensionParams;
use khtm_core::profile::{x1_norm, LinearProfile, Profile, QuadraticProfile, Scaled, ZeroProfile};
use khtm_core::quadrature::Scheme;

/// `u″` once and `u′/r` with multiplicity `N − 1`.
fn eigen_oracle(n: u32, j: u32, d1: f64, d2: f64, r: f64) -> f64 {
    choose(n - 1, j - 1) * d2 * (d1 / r).powi(j as i32 - 1) + choose(n - 1, j) * (d1 / r).powi(j as i32)
}

#[test]
fn quadratic_gives_binomials() {
    for n in [2u32, 4, 6] {
        let p = DimensionParams::new(n as i64).unwrap();
        let u = lift(Arc::new(QuadraticProfile), &p).unwrap();
        for j in 1..=n / 2 {
            for r in [0.01, 0.3, 0.9, 1.0] {
                assert_relative_eq!(hessian_fj(&u, j, r).unwrap(), choose(n, j), max_relative = 1e-10);
            }
        }
        assert!(admissibility_check(&u, &Scheme::default()).pass);
    }
}

#[test]
fn power_sums_match_eigenvalues() {
    let v = PowerSum { terms: vec![(0.4, 1.0), (0.3, 2.5), (0.05, 6.0)] };
    for n in [2u32, 4, 6] {
        let p = DimensionParams::new(n as i64).unwrap();
        let u = lift(Arc::new(v.clone()), &p).unwrap();
        for j in 1..=n / 2 {
            for r in [0.05, 0.4, 0.95] {
                let (d1, d2) = v.dr(r);
                let want = eigen_oracle(n, j, -d1, -d2, r);
                assert_relative_eq!(hessian_fj(&u, j, r).unwrap(), want, max_relative = 1e-9);
            }
        }
    }
}

#[test]
fn linear_and_moser_branches() {
    let p = DimensionParams::new(4).unwrap();
    let u = lift(Arc::new(LinearProfile), &p).unwrap();
    for r in [0.1, 0.5] {
        assert_relative_eq!(hessian_fj(&u, 1, r).unwrap(), eigen_oracle(4, 1, 1.0, 0.0, r), max_relative = 1e-12);
        assert_relative_eq!(hessian_fj(&u, 2, r).unwrap(), eigen_oracle(4, 2, 1.0, 0.0, r), max_relative = 1e-12);
    }
    // u = c ln r on the log branch of w_j
    let w = moser(6.0, &p).unwrap();
    let c = w.slope;
    let u = lift(Arc::new(w), &p).unwrap();
    let r = 0.8;
    for j in 1..=2 {
        let want = eigen_oracle(4, j, c / r, -c / (r * r), r);
        assert_relative_eq!(hessian_fj(&u, j, r).unwrap(), want, max_relative = 1e-10);
    }
}

#[test]
fn zero_and_sign_errors() {
    let p = DimensionParams::new(4).unwrap();
    let u = lift(Arc::new(ZeroProfile), &p).unwrap();
    assert_eq!(hessian_fj(&u, 2, 0.5).unwrap(), 0.0);
    assert!(hessian_fj(&u, 3, 0.5).is_err());
    assert!(hessian_fj(&u, 1, 0.0).is_err());
    let neg: Profile = Arc::new(Scaled { inner: Arc::new(QuadraticProfile), factor: -1.0 });
    let verdict = admissibility_check(&lift(neg, &p).unwrap(), &Scheme::default());
    assert!(!verdict.pass);
    assert!(verdict.min_value < 0.0);
}

#[test]
fn norm_bridge_on_closed_forms() {
    let s = Scheme::default();
    for n in [2u32, 4, 6] {
        let p = DimensionParams::new(n as i64).unwrap();
        for v in [Arc::new(LinearProfile) as Profile, Arc::new(QuadraticProfile)] {
            let u = lift(v.clone(), &p).unwrap();
            assert_relative_eq!(phi_norm(&u, &s).unwrap(), x1_norm(v.as_ref(), &p, &s).unwrap(), max_relative = 1e-14);
            assert_eq!(u.value(0.5), -v.value(0.5));
        }
    }
}
