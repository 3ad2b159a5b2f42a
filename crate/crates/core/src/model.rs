//! Dimensional constants and the exponent perturbation `f`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::interp;
use crate::special::{binomial, gamma};

/// Constants attached to an even dimension `N = 2k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionParams {
    pub n: u32,
    pub k: u32,
    /// Surface area of the unit sphere in `R^N`.
    pub omega: f64,
    pub c_n: f64,
    pub mu_n: f64,
    pub a_n: f64,
}

impl DimensionParams {
    pub fn new(n: i64) -> Result<Self> {
        if n < 2 || n % 2 != 0 || n > 200 {
            return Err(LabError::Dimension(n));
        }
        let nn = n as u32;
        let k = nn / 2;
        let nf = nn as f64;
        let omega = 2.0 * PI.powf(nf / 2.0) / gamma(nf / 2.0)?.value;
        let c_n = omega * binomial(nn, k) / nf;
        let mu_n = nf * (omega * binomial(nn - 1, k - 1) / k as f64).powf(2.0 / nf);
        let a_n = (omega / nf).powf(2.0 / nf);
        Ok(Self { n: nn, k, omega, c_n, mu_n, a_n })
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn kf(&self) -> f64 {
        self.k as f64
    }

    /// Critical exponent `(N+2)/N`.
    pub fn q0(&self) -> f64 {
        (self.nf() + 2.0) / self.nf()
    }
}

/// Growth metadata of a perturbation near the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SigmaClass {
    /// `f(r)|ln r|^σ → 0` for every σ.
    Every,
    /// `f(r)|ln r|^σ` bounded exactly up to the given σ.
    UpTo { sigma: f64 },
    Unknown,
}

/// Exponent perturbation `f` on `[0, 1)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Perturbation {
    #[default]
    Zero,
    /// `γ r^a / (1 − r)^b`.
    Power { a: f64, b: f64, gamma: f64 },
    /// `c / |ln r|^σ` for `r ≤ 1/e`, bridged to 0 at `r = 1` by a cubic in `t = −ln r`.
    Log { c: f64, sigma: f64 },
    /// Monotone cubic interpolation of `(r_i, f_i)`; constant beyond the last node.
    Table { r: Vec<f64>, f: Vec<f64> },
}

impl Perturbation {
    pub fn power(a: f64, b: f64, gamma: f64) -> Self {
        Perturbation::Power { a, b, gamma }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(LabError::domain("perturbation", d));
        match self {
            Perturbation::Zero => Ok(()),
            Perturbation::Power { a, b, gamma } => {
                if !(*a > 0.0 && a.is_finite() && b.is_finite() && gamma.is_finite()) {
                    return bad(format!("power family needs a > 0 and finite b, gamma (a={a}, b={b}, gamma={gamma})"));
                }
                Ok(())
            }
            Perturbation::Log { c, sigma } => {
                if !(*c > 0.0 && c.is_finite() && *sigma > 1.0 && sigma.is_finite()) {
                    return bad(format!("log family needs c > 0 and sigma > 1 (c={c}, sigma={sigma})"));
                }
                Ok(())
            }
            Perturbation::Table { r, f } => {
                if r.len() != f.len() || r.len() < 2 {
                    return bad("table needs at least two (r, f) pairs of equal length".into());
                }
                if r[0] != 0.0 || f[0] != 0.0 {
                    return bad("table must start at r = 0 with f = 0".into());
                }
                if r.windows(2).any(|w| !(w[1] > w[0])) || *r.last().unwrap() >= 1.0 {
                    return bad("table radii must increase strictly inside [0, 1)".into());
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return bad("table values must be finite".into());
                }
                Ok(())
            }
        }
    }

    /// `f(r)` for `r ∈ [0, 1)`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return Err(LabError::domain("eval_f", format!("r = {r} outside [0, 1)")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        Ok(self.eval_t(-r.ln()))
    }

    /// `f(e^{−t})` for `t > 0`; `t = ∞` gives `f(0) = 0`.
    pub fn eval_t(&self, t: f64) -> f64 {
        if t == f64::INFINITY {
            return 0.0;
        }
        match self {
            Perturbation::Zero => 0.0,
            Perturbation::Power { a, b, gamma } => {
                let one_minus_r = -(-t).exp_m1();
                gamma * (-a * t - b * one_minus_r.ln()).exp()
            }
            Perturbation::Log { c, sigma } => {
                if t >= 1.0 {
                    c * t.powf(-sigma)
                } else {
                    // C¹ match of value c and slope −cσ at t = 1, zero at t = 0
                    c * t * t * ((3.0 + sigma) - (2.0 + sigma) * t)
                }
            }
            Perturbation::Table { r, f } => {
                let x = (-t).exp();
                if x >= *r.last().unwrap() {
                    return *f.last().unwrap();
                }
                let d = interp::pchip_slopes(r, f);
                interp::hermite(r, f, &d, x).0
            }
        }
    }

    pub fn sigma_class(&self) -> SigmaClass {
        match self {
            Perturbation::Zero | Perturbation::Power { .. } => SigmaClass::Every,
            Perturbation::Log { sigma, .. } => SigmaClass::UpTo { sigma: *sigma },
            Perturbation::Table { .. } => SigmaClass::Unknown,
        }
    }

    /// `γ ≤ 0` in the power family: the subcritical regime.
    pub fn is_nonpositive(&self) -> bool {
        match self {
            Perturbation::Zero => true,
            Perturbation::Power { gamma, .. } => *gamma <= 0.0,
            Perturbation::Log { .. } => false,
            Perturbation::Table { f, .. } => f.iter().all(|&v| v <= 0.0),
        }
    }

    /// Short text label used in tables.
    pub fn label(&self) -> String {
        match self {
            Perturbation::Zero => "zero".into(),
            Perturbation::Power { a, b, gamma } => format!("power(a={a},b={b},gamma={gamma})"),
            Perturbation::Log { c, sigma } => format!("log(c={c},sigma={sigma})"),
            Perturbation::Table { r, .. } => format!("table({} nodes)", r.len()),
        }
    }
}

/// `sup_{m=4..60} f(2^{−m}) |ln 2^{−m}|^σ`, an empirical surrogate of the limsup at 0.
pub fn growth_diagnostic(f: &Perturbation, sigma: f64) -> Result<f64> {
    if !(sigma > 1.0 && sigma.is_finite()) {
        return Err(LabError::domain("growth_diagnostic", format!("sigma = {sigma} must exceed 1")));
    }
    Ok((4..=60)
        .map(|m| {
            let t = m as f64 * std::f64::consts::LN_2;
            f.eval_t(t) * t.powf(sigma)
        })
        .fold(0.0, f64::max))
}
