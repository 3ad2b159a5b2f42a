//! Gamma, digamma and the integral identities built on them.
//!
//! `gamma` and `digamma` use recurrence plus asymptotic (Stirling / Bernoulli)
//! series. Every identity is paired with a quadrature route that does not go
//! through the series code, so the two can be cross-checked.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::quadrature::{integrate_adaptive, integrate_half_line};
use crate::scalar::Scalar;

/// Euler–Mascheroni constant to 20 digits.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

/// A computed value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecialValue<T> {
    pub value: T,
    pub abs_error_estimate: T,
}

impl<T: Scalar> SpecialValue<T> {
    fn new(value: T, abs_error_estimate: T) -> Self {
        debug_assert!(abs_error_estimate.is_finite() && abs_error_estimate >= T::zero());
        Self { value, abs_error_estimate }
    }
}

fn check_positive<T: Scalar>(op: &'static str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(LabError::domain(op, format!("argument {x:?} must be positive and finite")))
    }
}

const STIRLING_SHIFT: f64 = 15.0;
const DIGAMMA_SHIFT: f64 = 12.0;

// B_{2n} / (2n (2n-1)) for n = 1..7
const STIRLING_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

// B_{2n} / (2n) for n = 1..7
const DIGAMMA_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// `ln Γ(z)` for `z >= STIRLING_SHIFT` by the Stirling series; returns the last term too.
fn ln_gamma_asymptotic<T: Scalar>(z: T) -> (T, T) {
    let half_ln_two_pi = T::lit(0.918_938_533_204_672_741_78);
    let z2 = z * z;
    let mut zpow = z;
    let mut series = T::zero();
    let mut last = T::zero();
    for c in STIRLING_COEFFS {
        last = T::lit(c) / zpow;
        series = series + last;
        zpow = zpow * z2;
    }
    ((z - T::lit(0.5)) * z.ln() - z + half_ln_two_pi + series, last.abs())
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Scalar>(x: T) -> Result<T> {
    check_positive("ln_gamma", x)?;
    let mut z = x;
    let mut log_prod = T::zero();
    while z < T::lit(STIRLING_SHIFT) {
        log_prod = log_prod + z.ln();
        z = z + T::one();
    }
    Ok(ln_gamma_asymptotic(z).0 - log_prod)
}

/// `Γ(x)` for `x > 0`.
pub fn gamma<T: Scalar>(x: T) -> Result<SpecialValue<T>> {
    check_positive("gamma", x)?;
    let mut z = x;
    let mut prod = T::one();
    let mut shifts = 0usize;
    while z < T::lit(STIRLING_SHIFT) {
        prod = prod * z;
        z = z + T::one();
        shifts += 1;
    }
    let (lg, trunc) = ln_gamma_asymptotic(z);
    let value = lg.exp() / prod;
    if !value.is_finite() {
        return Err(LabError::domain("gamma", format!("Γ({x:?}) overflows")));
    }
    let rounding = T::epsilon() * (lg.abs() + T::of_usize(shifts) + T::lit(8.0));
    Ok(SpecialValue::new(value, value.abs() * (rounding + trunc)))
}

/// `Ψ(x) = Γ'(x)/Γ(x)` for `x > 0`.
pub fn digamma<T: Scalar>(x: T) -> Result<SpecialValue<T>> {
    check_positive("digamma", x)?;
    let mut z = x;
    let mut shift_sum = T::zero();
    let mut shifts = 0usize;
    while z < T::lit(DIGAMMA_SHIFT) {
        shift_sum = shift_sum + z.recip();
        z = z + T::one();
        shifts += 1;
    }
    let inv2 = (z * z).recip();
    let mut pow = inv2;
    let mut series = T::zero();
    let mut last = T::zero();
    for c in DIGAMMA_COEFFS {
        last = T::lit(c) * pow;
        series = series + last;
        pow = pow * inv2;
    }
    let value = z.ln() - T::lit(0.5) / z - series - shift_sum;
    let scale = z.ln().abs() + shift_sum.abs() + T::one();
    let err = last.abs() + T::epsilon() * scale * T::of_usize(shifts + 4);
    Ok(SpecialValue::new(value, err))
}

/// `Γ(x) = ∫_0^∞ u^{x-1} e^{-u} du` (equivalently `∫_0^1 (-ln t)^{x-1} dt`) by quadrature.
pub fn gamma_by_quadrature<T: Scalar>(x: T) -> Result<SpecialValue<T>> {
    check_positive("gamma_by_quadrature", x)?;
    let r = integrate_half_line(
        |u: T| ((x - T::one()) * u.ln() - u).exp(),
        x,
        T::one(),
        T::lit(1e-15).max(T::epsilon()),
        T::lit(1e-14).max(T::epsilon() * T::lit(8.0)),
    );
    Ok(SpecialValue::new(r.value, r.abs_error))
}

/// `Ψ(x)` from the Dirichlet-type integral `∫_0^∞ (e^{-z} − (1+z)^{-x}) dz / z`.
///
/// The `e^{-z}` term keeps the integral convergent at infinity; the form
/// without it diverges logarithmically.
pub fn digamma_by_quadrature<T: Scalar>(x: T) -> Result<SpecialValue<T>> {
    check_positive("digamma_by_quadrature", x)?;
    let integrand = |z: T| {
        // e^{-z} - (1+z)^{-x} = expm1(-z) - expm1(-x ln(1+z)), stable near 0
        let num = (-z).exp_m1() - (-(x * z.ln_1p())).exp_m1();
        num / z
    };
    let r = integrate_half_line(
        integrand,
        T::one(),
        x.min(T::one()),
        T::lit(1e-15).max(T::epsilon()),
        T::lit(1e-14).max(T::epsilon() * T::lit(8.0)),
    );
    Ok(SpecialValue::new(r.value, r.abs_error))
}

/// `∫_lo^1 (1 − s^{a})/(1 − s) ds`, integrated in `d = 1 − s` over `[0, 1 − lo]`.
fn harmonic_remainder<T: Scalar>(a: T, one_minus_lo: T) -> SpecialValue<T> {
    let h = move |d: T| {
        if d == T::zero() {
            a
        } else {
            -(a * (-d).ln_1p()).exp_m1() / d
        }
    };
    let r = integrate_adaptive(h, T::zero(), one_minus_lo, T::lit(1e-16).max(T::epsilon()), T::lit(1e-14).max(T::epsilon()), 400);
    SpecialValue::new(r.value, r.abs_error)
}

/// `Ψ(p) + γ = ∫_0^1 (1 − s^{p−1})/(1 − s) ds` by quadrature.
pub fn digamma_shifted_by_quadrature<T: Scalar>(p: T) -> Result<SpecialValue<T>> {
    check_positive("digamma_shifted_by_quadrature", p)?;
    let a = p - T::one();
    let half = T::lit(0.5);
    // s in [1/2, 1] in the d variable; s in [0, 1/2] with s = w² to absorb s^{p-2}
    let upper = harmonic_remainder(a, half);
    let h = move |w: T| {
        let num = -(T::lit(2.0) * a * w.ln()).exp_m1();
        T::lit(2.0) * w * num / ((T::one() - w) * (T::one() + w))
    };
    let lower = integrate_adaptive(h, T::zero(), half.sqrt(), T::lit(1e-16).max(T::epsilon()), T::lit(1e-14).max(T::epsilon()), 400);
    Ok(SpecialValue::new(upper.value + lower.value, upper.abs_error_estimate + lower.abs_error))
}

/// Quadrature and Gamma-ratio evaluation of `∫_0^∞ s^{x−1}/(1+s)^{x+y} ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaIntegral<T> {
    pub quadrature: SpecialValue<T>,
    pub gamma_ratio: SpecialValue<T>,
    /// `|quadrature − gamma_ratio|`.
    pub residual: T,
}

/// `∫_0^∞ s^{x−1}/(1+s)^{x+y} ds` against `Γ(x)Γ(y)/Γ(x+y)`.
pub fn beta_integral<T: Scalar>(x: T, y: T) -> Result<BetaIntegral<T>> {
    check_positive("beta_integral", x)?;
    check_positive("beta_integral", y)?;
    let integrand = |s: T| ((x - T::one()) * s.ln() - (x + y) * s.ln_1p()).exp();
    let q = integrate_half_line(
        integrand,
        x,
        y,
        T::lit(1e-15).max(T::epsilon()),
        T::lit(1e-14).max(T::epsilon() * T::lit(8.0)),
    );
    let (gx, gy, gxy) = (gamma(x)?, gamma(y)?, gamma(x + y)?);
    let ratio = gx.value * gy.value / gxy.value;
    let ratio_err = ratio.abs()
        * (gx.abs_error_estimate / gx.value.abs()
            + gy.abs_error_estimate / gy.value.abs()
            + gxy.abs_error_estimate / gxy.value.abs());
    Ok(BetaIntegral {
        quadrature: SpecialValue::new(q.value, q.abs_error),
        gamma_ratio: SpecialValue::new(ratio, ratio_err),
        residual: (q.value - ratio).abs(),
    })
}

/// First logarithmic identity: `∫_0^z s^{p−1}/(1+s)^p ds` and its closed form
/// `ln(1+z) − [γ + Ψ(p)] + ∫_{z/(1+z)}^1 (1−s^{p−1})/(1−s) ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogIdentity<T> {
    /// Direct quadrature of the left side.
    pub value: SpecialValue<T>,
    /// Right side evaluated with the digamma series and a quadrature remainder.
    pub identity_rhs: T,
    /// The remainder integral alone (the finite-`z` correction term).
    pub remainder: T,
    pub residual: T,
}

fn check_lt(op: &'static str, z: f64, p: f64) -> Result<()> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(LabError::domain(op, format!("z = {z} must be positive and finite")));
    }
    if !(p >= 2.0 && p.is_finite()) {
        return Err(LabError::domain(op, format!("p = {p} must satisfy p >= 2")));
    }
    Ok(())
}

pub fn lt1<T: Scalar>(z: T, p: T) -> Result<LogIdentity<T>> {
    check_lt("lt1", z.to_f64().unwrap_or(f64::NAN), p.to_f64().unwrap_or(f64::NAN))?;
    let direct = integrate_adaptive(
        |s: T| ((p - T::one()) * s.ln() - p * s.ln_1p()).exp(),
        T::zero(),
        z,
        T::lit(1e-16).max(T::epsilon()),
        T::lit(1e-14).max(T::epsilon()),
        400,
    );
    let psi = digamma(p)?;
    let remainder = harmonic_remainder(p - T::one(), (T::one() + z).recip());
    let rhs = z.ln_1p() - (T::lit(EULER_GAMMA) + psi.value) + remainder.value;
    Ok(LogIdentity {
        value: SpecialValue::new(direct.value, direct.abs_error),
        identity_rhs: rhs,
        remainder: remainder.value,
        residual: (direct.value - rhs).abs(),
    })
}

/// `lt1` remainder in closed form for integer `p`:
/// `∫_u^1 Σ_{m<p−1} s^m ds = Σ_{m=1}^{p−1} (1 − u^m)/m`, `u = z/(1+z)`.
pub fn lt1_remainder_integer(z: f64, p: u32) -> f64 {
    let u = z / (1.0 + z);
    (1..p).map(|m| (1.0 - u.powi(m as i32)) / m as f64).sum()
}

/// Second identity: direct quadrature of `∫_0^z s^{p−2}/(1+s)^p ds`.
///
/// The printed closed form `p − 1 − ∫_z^∞ (1 − s^{p−2})/(1 − s) ds` is only
/// finite at `p = 2`, where it evaluates to 1 and misses the left side by
/// `1/(1+z)`. Its residual is recorded for `p = 2` and `None` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondIdentity<T> {
    pub value: SpecialValue<T>,
    pub printed_rhs: Option<T>,
    pub printed_residual: Option<T>,
}

pub fn lt2<T: Scalar>(z: T, p: T) -> Result<SecondIdentity<T>> {
    check_lt("lt2", z.to_f64().unwrap_or(f64::NAN), p.to_f64().unwrap_or(f64::NAN))?;
    let direct = integrate_adaptive(
        |s: T| ((p - T::lit(2.0)) * s.ln() - p * s.ln_1p()).exp(),
        T::zero(),
        z,
        T::lit(1e-16).max(T::epsilon()),
        T::lit(1e-14).max(T::epsilon()),
        400,
    );
    let (rhs, residual) = if p == T::lit(2.0) {
        // remainder integrand (1 - s^0)/(1 - s) vanishes identically
        let rhs = p - T::one();
        (Some(rhs), Some((direct.value - rhs).abs()))
    } else {
        (None, None)
    };
    match residual {
        Some(r) => log::info!("lt2 printed identity at p = 2, z = {z:?}: residual {r:?} (not asserted)"),
        None => log::debug!("lt2 printed identity remainder diverges for p = {p:?}"),
    }
    Ok(SecondIdentity {
        value: SpecialValue::new(direct.value, direct.abs_error),
        printed_rhs: rhs,
        printed_residual: residual,
    })
}

/// Axis values of the `(x, y)` grid for the Beta check (16 pairs).
pub const BETA_AXIS: [f64; 4] = [0.5, 1.0, 2.0, 3.5];
/// `z` values of the `(z, p)` grid for the first logarithmic identity.
pub const LT_Z_AXIS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
/// `p` values of the `(z, p)` grid.
pub const LT_P_AXIS: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub identity: &'static str,
    pub x: f64,
    pub y: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Beta integrals on the `(x, y)` grid, the first identity on the `(z, p)`
/// grid and the printed second identity at `p = 2, z = 1`.
pub fn identity_suite() -> Result<Vec<IdentityRow>> {
    let mut rows = Vec::with_capacity(33);
    for &x in &BETA_AXIS {
        for &y in &BETA_AXIS {
            let b = beta_integral(x, y)?;
            rows.push(IdentityRow { identity: "beta", x, y, lhs: b.quadrature.value, rhs: b.gamma_ratio.value, residual: b.residual });
        }
    }
    for &z in &LT_Z_AXIS {
        for &p in &LT_P_AXIS {
            let l = lt1(z, p)?;
            rows.push(IdentityRow { identity: "lt1", x: z, y: p, lhs: l.value.value, rhs: l.identity_rhs, residual: l.residual });
        }
    }
    let l2 = lt2(1.0, 2.0)?;
    rows.push(IdentityRow {
        identity: "lt2_printed",
        x: 1.0,
        y: 2.0,
        lhs: l2.value.value,
        rhs: l2.printed_rhs.unwrap_or(f64::NAN),
        residual: l2.printed_residual.unwrap_or(f64::NAN),
    });
    Ok(rows)
}

/// Binomial coefficient as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    #[test]
    fn gamma_anchor_values() {
        assert_relative_eq!(gamma(1.0).unwrap().value, 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(2.0).unwrap().value, 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(0.5).unwrap().value, PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(5.0).unwrap().value, 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(50.0).unwrap().value, 6.082_818_640_342_675e62, max_relative = 1e-13);
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        assert!(matches!(gamma(0.0), Err(LabError::Domain { .. })));
        assert!(matches!(gamma(-1.5), Err(LabError::Domain { .. })));
        assert!(digamma(0.0).is_err());
        assert!(gamma(f64::NAN).is_err());
    }

    #[test]
    fn gamma_recurrence_holds() {
        let mut x: f64 = 0.5;
        while x <= 20.0 {
            let g = gamma(x).unwrap().value;
            let g1 = gamma(x + 1.0).unwrap().value;
            assert!(((g1 - x * g) / g1).abs() < 1e-12, "x = {x}");
            x += 0.37;
        }
    }

    #[test]
    fn digamma_anchor_values() {
        assert_abs_diff_eq!(digamma(1.0).unwrap().value, -EULER_GAMMA, epsilon = 1e-14);
        assert_abs_diff_eq!(digamma(2.0).unwrap().value, 1.0 - EULER_GAMMA, epsilon = 1e-14);
        assert_abs_diff_eq!(digamma(3.0).unwrap().value, 1.5 - EULER_GAMMA, epsilon = 1e-14);
        assert_abs_diff_eq!(
            digamma(0.5).unwrap().value,
            -EULER_GAMMA - 2.0 * 2f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn euler_constant_matches_digamma() {
        assert_abs_diff_eq!(-digamma(1.0).unwrap().value, EULER_GAMMA, epsilon = 1e-15);
    }

    #[test]
    fn single_precision_kernels() {
        let g = gamma(4.5f32).unwrap().value;
        assert!((g - 11.631_728).abs() / 11.631_728 < 1e-5);
        let d = digamma(1.0f32).unwrap().value;
        assert!((d + 0.577_215_7).abs() < 1e-5);
    }

    #[test]
    fn quadrature_routes_agree_with_series() {
        for x in [0.5, 1.0, 2.0, 5.0] {
            let s = digamma(x).unwrap().value;
            let q = digamma_by_quadrature(x).unwrap().value;
            assert_abs_diff_eq!(s, q, epsilon = 1e-8);
            let h = digamma_shifted_by_quadrature(x).unwrap().value - EULER_GAMMA;
            assert_abs_diff_eq!(s, h, epsilon = 1e-8);
        }
    }

    #[test]
    fn beta_examples() {
        let b = beta_integral(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(b.quadrature.value, 1.0, epsilon = 1e-10);
        let b = beta_integral(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(b.quadrature.value, 0.5, epsilon = 1e-10);
        let b = beta_integral(0.5, 0.5).unwrap();
        assert_abs_diff_eq!(b.quadrature.value, PI, epsilon = 1e-8);
        assert!(b.residual < 1e-8);
    }

    #[test]
    fn lt1_closed_form_example() {
        let r = lt1(1.0, 2.0).unwrap();
        assert_abs_diff_eq!(r.value.value, 2f64.ln() - 0.5, epsilon = 1e-14);
        assert!(r.residual < 1e-12);
        let small = lt1(1e-12f64, 2.0).unwrap();
        assert!(small.value.value.abs() < 1e-20);
    }

    #[test]
    fn lt1_integer_remainder_matches_quadrature() {
        for &z in &[0.1, 1.0, 10.0, 100.0] {
            for p in 2..=5u32 {
                let r = lt1(z, p as f64).unwrap();
                assert_abs_diff_eq!(r.remainder, lt1_remainder_integer(z, p), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn lt2_examples_and_printed_discrepancy() {
        let r = lt2(1.0, 2.0).unwrap();
        assert_abs_diff_eq!(r.value.value, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(r.printed_residual.unwrap(), 0.5, epsilon = 1e-12);
        let r = lt2(3.0, 2.0).unwrap();
        assert_abs_diff_eq!(r.value.value, 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(r.printed_residual.unwrap(), 0.25, epsilon = 1e-12);
        let big = lt2(1e9, 3.0).unwrap();
        assert_abs_diff_eq!(big.value.value, 0.5, epsilon = 1e-8);
        assert!(big.printed_residual.is_none());
        assert!(lt2(1.0, 1.5).is_err());
        assert!(lt1(0.0, 2.0).is_err());
    }

    #[test]
    fn suite_residuals() {
        let rows = identity_suite().unwrap();
        assert_eq!(rows.len(), 33);
        for r in &rows[..32] {
            assert!(r.residual < 1e-8, "{r:?}");
        }
        assert!((rows[32].residual - 0.5).abs() < 1e-8);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(binomial(7, 3), 35.0);
    }
}
