//! Lifting a radial profile to the ball, `u(x) = −v(|x|)`, and its radial
//! k-Hessian operators.
//!
//! With `B_j(r) = r^{N−j} (u′)^j` the radial operators are
//! `F_j[u] = (1/j) C(N−1, j−1) r^{1−N} B_j′(r)`. In `t = −ln r`, `u′ = s/r` with
//! `s = dv/dt`, so `B_j′(r) = r^{N−2j−1} s^{j−1} ((N−2j) s − j s_t)`.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::model::DimensionParams;
use crate::profile::{layout_for, x1_norm, Profile};
use crate::quadrature::Scheme;
use crate::special::binomial;

/// Same slack as the grid-profile loader.
const BOUNDARY_TOL: f64 = 1e-10;

/// Admissibility slack: brackets may dip this far below zero from roundoff.
pub const ADMISSIBILITY_TOL: f64 = -1e-10;

#[derive(Debug, Clone)]
pub struct BallFunction {
    source: Profile,
    params: DimensionParams,
}

pub fn lift(v: Profile, params: &DimensionParams) -> Result<BallFunction> {
    let boundary = v.value_t(0.0);
    if boundary.abs() > BOUNDARY_TOL {
        return Err(LabError::precondition("lift", format!("v(1) = {boundary} is not 0")));
    }
    Ok(BallFunction { source: v, params: *params })
}

impl BallFunction {
    pub fn source(&self) -> &Profile {
        &self.source
    }

    pub fn params(&self) -> &DimensionParams {
        &self.params
    }

    /// `u(r) = −v(r)`.
    pub fn value(&self, r: f64) -> f64 {
        -self.source.value(r)
    }

    /// `u′(r) = −v′(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        -self.source.derivative(r)
    }

    /// `d s/dt`: stored or closed form when available, else a central difference.
    fn slope_rate(&self, t: f64) -> f64 {
        if let Some(c) = self.source.curvature_t(t) {
            return c;
        }
        let h = 1e-5 * t.max(1.0);
        let lo = (t - h).max(0.0);
        (self.source.slope_t(t + h) - self.source.slope_t(lo)) / (t + h - lo)
    }

    fn check_order(&self, j: u32) -> Result<()> {
        if j == 0 || j > self.params.k {
            return Err(LabError::domain("hessian", format!("j = {j} outside [1, {}]", self.params.k)));
        }
        Ok(())
    }

    /// `B_j′(r)` at `t = −ln r`.
    fn bracket_derivative_t(&self, j: u32, t: f64) -> f64 {
        let nf = self.params.nf();
        let jf = j as f64;
        let s = self.source.slope_t(t);
        let ds = self.slope_rate(t);
        let core = (nf - 2.0 * jf) * s - jf * ds;
        if core == 0.0 {
            return 0.0;
        }
        (-(nf - 2.0 * jf - 1.0) * t).exp() * s.powi(j as i32 - 1) * core
    }

    /// `(r^{N−j} (u′)^j)′`.
    pub fn bracket_derivative(&self, j: u32, r: f64) -> Result<f64> {
        self.check_order(j)?;
        check_radius(r)?;
        Ok(self.bracket_derivative_t(j, -r.ln()))
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(LabError::domain("hessian", format!("r = {r} outside (0, 1]")));
    }
    Ok(())
}

/// `F_j[u](r)` for `1 ≤ j ≤ k`, `0 < r ≤ 1`.
pub fn hessian_fj(u: &BallFunction, j: u32, r: f64) -> Result<f64> {
    u.check_order(j)?;
    check_radius(r)?;
    let p = &u.params;
    let jf = j as f64;
    let t = -r.ln();
    let s = u.source.slope_t(t);
    let core = (p.nf() - 2.0 * jf) * s - jf * u.slope_rate(t);
    if core == 0.0 || (s == 0.0 && j > 1) {
        return Ok(0.0);
    }
    let c = binomial(p.n - 1, j - 1) / jf;
    Ok(c * (2.0 * jf * t).exp() * s.powi(j as i32 - 1) * core)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityVerdict {
    pub pass: bool,
    /// Smallest bracket derivative over all nodes and orders.
    pub min_value: f64,
    pub worst_j: u32,
    pub worst_r: f64,
    pub nodes: usize,
}

/// Scans `(r^{N−j}(−v′)^j)′ ≥ −1e-10` over the quadrature nodes for `j = 1..=k`.
pub fn admissibility_check(u: &BallFunction, scheme: &Scheme) -> AdmissibilityVerdict {
    let layout = layout_for(u.source.as_ref(), scheme, &[]);
    let mut worst = (f64::INFINITY, 1, 1.0);
    for j in 1..=u.params.k {
        for &t in &layout.nodes {
            let b = u.bracket_derivative_t(j, t);
            // NaN must count as a violation.
            if !(b >= worst.0) {
                worst = (b, j, (-t).exp());
            }
        }
    }
    let min_value = worst.0;
    AdmissibilityVerdict { pass: min_value >= ADMISSIBILITY_TOL, min_value, worst_j: worst.1, worst_r: worst.2, nodes: layout.nodes.len() }
}

/// Norm of `u` in the admissible cone; the same integral as the profile norm.
pub fn phi_norm(u: &BallFunction, scheme: &Scheme) -> Result<f64> {
    x1_norm(u.source.as_ref(), &u.params, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::moser;
    use crate::profile::{LinearProfile, QuadraticProfile, ZeroProfile};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn quadratic_has_binomial_hessians() {
        for n in [2, 4, 6] {
            let p = DimensionParams::new(n).unwrap();
            let u = lift(Arc::new(QuadraticProfile), &p).unwrap();
            for j in 1..=p.k {
                for r in [1e-3, 0.2, 0.7, 1.0] {
                    let fj = hessian_fj(&u, j, r).unwrap();
                    assert_relative_eq!(fj, binomial(n as u32, j), max_relative = 1e-10);
                }
            }
        }
        let p = DimensionParams::new(4).unwrap();
        let u = lift(Arc::new(QuadraticProfile), &p).unwrap();
        assert_relative_eq!(hessian_fj(&u, 2, 0.3).unwrap(), 6.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_and_linear() {
        let p = DimensionParams::new(4).unwrap();
        let z = lift(Arc::new(ZeroProfile), &p).unwrap();
        assert_eq!(hessian_fj(&z, 1, 0.5).unwrap(), 0.0);
        assert_eq!(z.value(0.3), 0.0);
        let l = lift(Arc::new(LinearProfile), &p).unwrap();
        // bracket r^{N−j}, derivative (N−j) r^{N−j−1}
        assert_relative_eq!(l.bracket_derivative(1, 0.5).unwrap(), 3.0 * 0.25, max_relative = 1e-12);
        assert!(admissibility_check(&l, &Scheme::default()).pass);
        assert!(hessian_fj(&l, 3, 0.5).is_err());
        assert!(hessian_fj(&l, 1, 0.0).is_err());
    }

    #[test]
    fn lift_needs_zero_boundary_and_keeps_norm() {
        let p = DimensionParams::new(2).unwrap();
        let s = Scheme::default();
        let w = moser(10.0, &p).unwrap();
        let u = lift(Arc::new(w), &p).unwrap();
        assert_eq!(u.value(1.0), 0.0);
        assert!((phi_norm(&u, &s).unwrap() - 1.0).abs() < 1e-6);
        let u = lift(Arc::new(LinearProfile), &p).unwrap();
        assert_relative_eq!(phi_norm(&u, &s).unwrap(), std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn negative_profile_fails_admissibility() {
        let p = DimensionParams::new(2).unwrap();
        let v = crate::profile::scale(&(Arc::new(LinearProfile) as Profile), -1.0);
        let verdict = admissibility_check(&lift(v, &p).unwrap(), &Scheme::default());
        assert!(!verdict.pass);
        assert_eq!(verdict.worst_j, 1);
    }
}
