//! The (super)critical functional `∫_0^1 r^{N−1} exp(β|v|^{(N+2)/N + f(r)}) dr`.
//!
//! In `t = −ln r` this is `∫_0^∞ e^{−Nt} exp(β|v|^q) dt`. It is evaluated as
//! `1/N + ∫ e^{−Nt} expm1(β|v|^q) dt`, so the trivial part is exact and the
//! value never drops below `1/N`. Beyond `t_max` the profile is frozen and the
//! remaining tail is integrated analytically.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::model::{DimensionParams, Perturbation};
use crate::profile::{layout_for, RadialProfile, Samples};
use crate::quadrature::{Layout, Scheme};

/// Exponents above this (natural log scale) are reported as blow-up.
pub const BLOWUP_LIMIT: f64 = 700.0;

/// Values of `|v|` below this count as zero in the power.
pub const ZERO_CUTOFF: f64 = 1e-300;

/// Region boundaries in `t` for the split: `r > e^{−1}`, `e^{−10} < r ≤ e^{−1}`, `r ≤ e^{−10}`.
pub const SPLIT_T: [f64; 2] = [1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Split {
    pub near_origin: f64,
    pub middle: f64,
    pub near_boundary: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub split: Split,
    /// `|value(refined) − value| / value` under panel doubling.
    pub refinement_delta: f64,
}

/// `β |v|^q` with `q = (N+2)/N + f`, computed in log space.
#[inline]
pub fn exponent(beta: f64, v: f64, q: f64) -> f64 {
    let a = v.abs();
    if a < ZERO_CUTOFF {
        0.0
    } else {
        beta * (q * a.ln()).exp()
    }
}

fn checked_exponent(beta: f64, v: f64, q: f64, t: f64) -> Result<f64> {
    let e = exponent(beta, v, q);
    if e > BLOWUP_LIMIT || e.is_nan() {
        return Err(LabError::BlowUp { radius: (-t).exp(), exponent: e, limit: BLOWUP_LIMIT });
    }
    Ok(e)
}

/// Exact `∫_a^b e^{−Nt} dt`.
fn base_mass(n: f64, a: f64, b: f64) -> f64 {
    if b == f64::INFINITY {
        return (-n * a).exp() / n;
    }
    (-n * a).exp() * -(-n * (b - a)).exp_m1() / n
}

/// Evaluates the functional on one layout given node samples.
pub fn tm_on_samples(
    samples: &Samples,
    layout: &Layout,
    f: &Perturbation,
    beta: f64,
    params: &DimensionParams,
) -> Result<Split> {
    let n = params.nf();
    let q0 = params.q0();
    let mut parts = [0.0f64; 3];
    for (i, &t) in layout.nodes.iter().enumerate() {
        let e = checked_exponent(beta, samples.v[i], q0 + f.eval_t(t), t)?;
        let region = SPLIT_T.iter().filter(|&&b| t >= b).count();
        parts[2 - region] += layout.weights[i] * (-n * t).exp() * e.exp_m1();
    }
    let t_max = layout.t_max();
    let e_end = checked_exponent(beta, samples.v_end, q0 + f.eval_t(t_max), t_max)?;
    parts[0] += (-n * t_max).exp() * e_end.exp_m1() / n;
    Ok(Split {
        near_origin: parts[0] + base_mass(n, SPLIT_T[1], f64::INFINITY),
        middle: parts[1] + base_mass(n, SPLIT_T[0], SPLIT_T[1]),
        near_boundary: parts[2] + base_mass(n, 0.0, SPLIT_T[0]),
    })
}

fn total(s: &Split) -> f64 {
    s.near_boundary + s.middle + s.near_origin
}

fn evaluate(v: &dyn RadialProfile, f: &Perturbation, beta: f64, params: &DimensionParams, scheme: &Scheme) -> Result<Split> {
    let layout = layout_for(v, scheme, &SPLIT_T);
    tm_on_samples(&v.sample(&layout), &layout, f, beta, params)
}

/// The functional with split and refinement delta.
pub fn tm_integral(
    v: &dyn RadialProfile,
    f: &Perturbation,
    beta: f64,
    params: &DimensionParams,
    scheme: &Scheme,
) -> Result<FunctionalValue> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(LabError::domain("tm_integral", format!("beta = {beta} must be positive")));
    }
    let split = evaluate(v, f, beta, params, scheme)?;
    let value = total(&split);
    let fine = total(&evaluate(v, f, beta, params, &scheme.refined())?);
    Ok(FunctionalValue { value, split, refinement_delta: ((fine - value) / fine).abs() })
}

/// `ω_{N−1} ·` the functional at `β = μ_N`: the integral over the unit ball.
pub fn ball_functional(v: &dyn RadialProfile, f: &Perturbation, params: &DimensionParams, scheme: &Scheme) -> Result<f64> {
    Ok(params.omega * tm_integral(v, f, params.mu_n, params, scheme)?.value)
}

/// The functional at each β of a strictly increasing list.
pub fn monotonicity_probe(
    v: &dyn RadialProfile,
    f: &Perturbation,
    betas: &[f64],
    params: &DimensionParams,
    scheme: &Scheme,
) -> Result<Vec<FunctionalValue>> {
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::precondition("monotonicity_probe", "betas must be strictly increasing"));
    }
    betas.iter().map(|&b| tm_integral(v, f, b, params, scheme)).collect()
}

/// `∫_{t_lo}^{t_hi} e^{−Nt} exp(β|v|^q) dt` restricted to a `t`-window, on a
/// layout cut at both window ends (`t_hi = ∞` includes the frozen tail).
pub fn partial_integral(
    v: &dyn RadialProfile,
    f: &Perturbation,
    beta: f64,
    params: &DimensionParams,
    scheme: &Scheme,
    t_lo: f64,
    t_hi: f64,
) -> Result<f64> {
    let cuts: Vec<f64> = [t_lo, t_hi].into_iter().filter(|x| x.is_finite()).collect();
    let layout = layout_for(v, scheme, &cuts);
    let s = v.sample(&layout);
    let n = params.nf();
    let q0 = params.q0();
    let mut acc = 0.0;
    for (i, &t) in layout.nodes.iter().enumerate() {
        if t >= t_lo && t < t_hi {
            let e = checked_exponent(beta, s.v[i], q0 + f.eval_t(t), t)?;
            acc += layout.weights[i] * (-n * t + e).exp();
        }
    }
    if t_hi == f64::INFINITY {
        let t_max = layout.t_max();
        let e = checked_exponent(beta, s.v_end, q0 + f.eval_t(t_max), t_max)?;
        acc += (-n * t_max + e).exp() / n;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{scale, LinearProfile, Profile, ZeroProfile};
    use std::sync::Arc;

    #[test]
    fn zero_profile_gives_one_over_n() {
        let s = Scheme::default();
        for n in [2, 4, 6] {
            let p = DimensionParams::new(n).unwrap();
            for f in [Perturbation::Zero, Perturbation::power(1.0, 2.0, 3.0)] {
                let v = tm_integral(&ZeroProfile, &f, 7.0, &p, &s).unwrap();
                assert!((v.value - 1.0 / n as f64).abs() < 1e-15);
            }
        }
        let p = DimensionParams::new(2).unwrap();
        let b = ball_functional(&ZeroProfile, &Perturbation::Zero, &p, &s).unwrap();
        assert!((b - std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn even_in_v_and_monotone_in_beta() {
        let s = Scheme::default();
        let p = DimensionParams::new(2).unwrap();
        let v: Profile = Arc::new(LinearProfile);
        let m = scale(&v, -1.0);
        let f = Perturbation::power(1.0, 1.0, 1.0);
        let a = tm_integral(v.as_ref(), &f, p.mu_n, &p, &s).unwrap();
        let b = tm_integral(m.as_ref(), &f, p.mu_n, &p, &s).unwrap();
        assert_eq!(a.value, b.value);
        let vals = monotonicity_probe(v.as_ref(), &f, &[1.0, 5.0, 9.0], &p, &s).unwrap();
        assert!(vals.windows(2).all(|w| w[0].value <= w[1].value));
        assert!(monotonicity_probe(v.as_ref(), &f, &[2.0, 1.0], &p, &s).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let s = Scheme::default();
        let p = DimensionParams::new(2).unwrap();
        let v = scale(&(Arc::new(LinearProfile) as Profile), 30.0);
        match tm_integral(v.as_ref(), &Perturbation::Zero, p.mu_n, &p, &s) {
            Err(LabError::BlowUp { radius, exponent, .. }) => {
                assert!(radius > 0.0 && radius < 1.0);
                assert!(exponent > BLOWUP_LIMIT);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
        assert!(tm_integral(&ZeroProfile, &Perturbation::Zero, 0.0, &p, &s).is_err());
    }

    #[test]
    fn partial_integrals_add_up() {
        let s = Scheme::default();
        let p = DimensionParams::new(2).unwrap();
        let f = Perturbation::Zero;
        let whole = tm_integral(&LinearProfile, &f, p.mu_n, &p, &s).unwrap().value;
        let a = partial_integral(&LinearProfile, &f, p.mu_n, &p, &s, 0.0, 3.0).unwrap();
        let b = partial_integral(&LinearProfile, &f, p.mu_n, &p, &s, 3.0, f64::INFINITY).unwrap();
        assert!(((a + b) - whole).abs() < 1e-12 * whole);
    }
}
