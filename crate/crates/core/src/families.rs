//! Moser functions `w_j` and the concentration family `v_ε`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::functional::{partial_integral, tm_integral, FunctionalValue};
use crate::model::{DimensionParams, Perturbation};
use crate::profile::{x1_norm, RadialProfile};
use crate::quadrature::Scheme;
use crate::special::{digamma, lt1_remainder_integer, EULER_GAMMA};

/// Default ε grid for the lower-bound witness.
pub const DEFAULT_EPS_GRID: [f64; 5] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-8];

/// `w_j`: linear in `t` up to `t = j/N`, constant beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MoserProfile {
    pub j: f64,
    /// Kink location `t = j/N` (radius `e^{−j/N}`).
    pub kink_t: f64,
    pub plateau: f64,
    /// `dv/dt` on the linear branch.
    pub slope: f64,
}

pub fn moser(j: f64, params: &DimensionParams) -> Result<MoserProfile> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(LabError::domain("moser", format!("j = {j} must be positive")));
    }
    let nf = params.nf();
    let e = nf / (nf + 2.0);
    let plateau = (j / params.mu_n).powf(e);
    let slope = nf * params.mu_n.powf(-e) * j.powf(-2.0 / (nf + 2.0));
    Ok(MoserProfile { j, kink_t: j / nf, plateau, slope })
}

impl RadialProfile for MoserProfile {
    fn value_t(&self, t: f64) -> f64 {
        if t < self.kink_t {
            self.slope * t
        } else {
            self.plateau
        }
    }
    fn slope_t(&self, t: f64) -> f64 {
        if t < self.kink_t {
            self.slope
        } else {
            0.0
        }
    }
    fn curvature_t(&self, _t: f64) -> Option<f64> {
        Some(0.0)
    }
    fn breakpoints_t(&self) -> Vec<f64> {
        vec![self.kink_t]
    }
    fn label(&self) -> String {
        format!("moser(j={})", self.j)
    }
}

/// `v_ε`: logarithmic bump for `r ≤ εL_ε`, linear in `t` outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcProfile {
    pub epsilon: f64,
    /// `L_ε = −ln ε`.
    pub l: f64,
    /// `a_ε = a_N L_ε²`.
    pub a_eps: f64,
    pub c: f64,
    pub b: f64,
    /// Limit of `b_ε` as `ε → 0`: `−(N/2)[Ψ(N/2+1) + γ]/μ_N`.
    pub b_limit: f64,
    /// Kink at `t = −ln(εL_ε)`.
    pub kink_t: f64,
    n: f64,
    mu: f64,
    a_n: f64,
    /// `N / (μ_N c^{2/N})`.
    coef: f64,
}

pub fn conc_family(epsilon: f64, params: &DimensionParams) -> Result<ConcProfile> {
    if !(epsilon > 0.0 && epsilon <= 0.1) {
        return Err(LabError::domain("conc_family", format!("epsilon = {epsilon} outside (0, 0.1]")));
    }
    let l = -epsilon.ln();
    let kink_r = epsilon * l;
    if kink_r >= (-1f64).exp() {
        return Err(LabError::domain("conc_family", format!("kink radius εL = {kink_r} not below 1/e")));
    }
    let nf = params.nf();
    let mu = params.mu_n;
    let a_eps = params.a_n * l * l;
    let harmonic = digamma(params.kf() + 1.0)?.value + EULER_GAMMA;
    // ∫_0^{a_ε} s^k/(1+s)^{k+1} ds with the exact finite-z remainder
    let lt = a_eps.ln_1p() - harmonic + lt1_remainder_integer(a_eps, params.k + 1);
    let mu_c_q = 0.5 * nf * (lt - 2.0 * kink_r.ln());
    let c = (mu_c_q / mu).powf(nf / (nf + 2.0));
    let b = (mu_c_q - 0.5 * nf * a_eps.ln_1p() + nf * kink_r.ln()) / mu;
    Ok(ConcProfile {
        epsilon,
        l,
        a_eps,
        c,
        b,
        b_limit: -0.5 * nf * harmonic / mu,
        kink_t: -kink_r.ln(),
        n: nf,
        mu,
        a_n: params.a_n,
        coef: nf / (mu * c.powf(2.0 / nf)),
    })
}

impl ConcProfile {
    fn x(&self, t: f64) -> f64 {
        self.a_n * (2.0 * (self.l - t)).exp()
    }

    /// Inner branch evaluated at any `t`.
    pub fn inner_value_t(&self, t: f64) -> f64 {
        let log_term = self.n / (2.0 * self.mu) * self.x(t).ln_1p();
        self.c - (log_term + self.b) / self.c.powf(2.0 / self.n)
    }

    /// Outer branch evaluated at any `t`.
    pub fn outer_value_t(&self, t: f64) -> f64 {
        self.coef * t
    }

    /// `|inner − outer|` at the kink.
    pub fn continuity_residual(&self) -> f64 {
        (self.inner_value_t(self.kink_t) - self.outer_value_t(self.kink_t)).abs()
    }

    pub fn kink_radius(&self) -> f64 {
        self.epsilon * self.l
    }
}

impl RadialProfile for ConcProfile {
    fn value_t(&self, t: f64) -> f64 {
        if t < self.kink_t {
            self.outer_value_t(t)
        } else {
            self.inner_value_t(t)
        }
    }
    fn slope_t(&self, t: f64) -> f64 {
        if t < self.kink_t {
            self.coef
        } else {
            let x = self.x(t);
            self.coef * x / (1.0 + x)
        }
    }
    fn curvature_t(&self, t: f64) -> Option<f64> {
        if t < self.kink_t {
            Some(0.0)
        } else {
            let x = self.x(t);
            Some(-2.0 * self.coef * x / ((1.0 + x) * (1.0 + x)))
        }
    }
    fn breakpoints_t(&self) -> Vec<f64> {
        vec![self.kink_t]
    }
    fn label(&self) -> String {
        format!("conc(eps={:e})", self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupRow {
    pub j: f64,
    pub plateau: f64,
    pub value: f64,
    /// `e^{j(β/μ_N − 1)}/N`.
    pub bound: f64,
    /// Whether the bound is guaranteed (plateau ≥ 1 or f ≡ 0 on the plateau).
    pub bound_applies: bool,
    pub holds: bool,
    pub refinement_delta: f64,
}

/// The functional along `w_j` against its explicit lower bound.
pub fn blowup_table(j_list: &[f64], beta: f64, f: &Perturbation, params: &DimensionParams, scheme: &Scheme) -> Result<Vec<BlowupRow>> {
    if j_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::precondition("blowup_table", "j values must increase strictly"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(LabError::domain("blowup_table", format!("beta = {beta} must be positive")));
    }
    if beta <= params.mu_n {
        log::info!("blowup_table: beta = {beta} <= mu_N, the bound does not grow");
    }
    j_list
        .par_iter()
        .map(|&j| {
            let w = moser(j, params)?;
            let fv: FunctionalValue = tm_integral(&w, f, beta, params, scheme)?;
            let bound = (j * (beta / params.mu_n - 1.0)).exp() / params.nf();
            // |w|^f ≥ 1 on the plateau is what the bound needs
            let bound_applies = match f {
                Perturbation::Zero => true,
                _ if f.is_nonpositive() => w.plateau <= 1.0,
                _ => w.plateau >= 1.0,
            };
            Ok(BlowupRow {
                j,
                plateau: w.plateau,
                value: fv.value,
                bound,
                bound_applies,
                holds: fv.value >= bound * (1.0 - 1e-12),
                refinement_delta: fv.refinement_delta,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessRow {
    pub epsilon: f64,
    pub c_eps: f64,
    pub b_eps: f64,
    pub norm: f64,
    pub value: f64,
    pub refinement_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub value: f64,
    pub best_epsilon: f64,
    pub rows: Vec<WitnessRow>,
}

/// Largest functional value at `β = μ_N` over `v_ε`, `ε ∈ eps_grid`.
pub fn witness_lower_bound(f: &Perturbation, params: &DimensionParams, eps_grid: &[f64], scheme: &Scheme) -> Result<Witness> {
    if eps_grid.is_empty() {
        return Err(LabError::precondition("witness_lower_bound", "empty epsilon grid"));
    }
    let rows: Vec<WitnessRow> = eps_grid
        .par_iter()
        .map(|&eps| {
            let v = conc_family(eps, params)?;
            let fv = tm_integral(&v, f, params.mu_n, params, scheme)?;
            Ok(WitnessRow {
                epsilon: eps,
                c_eps: v.c,
                b_eps: v.b,
                norm: x1_norm(&v, params, scheme)?,
                value: fv.value,
                refinement_delta: fv.refinement_delta,
            })
        })
        .collect::<Result<_>>()?;
    let best = rows.iter().fold(rows[0], |a, r| if r.value > a.value { *r } else { a });
    Ok(Witness { value: best.value, best_epsilon: best.epsilon, rows })
}

/// The functional restricted to the region `t ≥ kink` of `v_ε`, where `v_ε ≥ 1` for small ε.
pub fn conc_plateau_integral(v: &ConcProfile, f: &Perturbation, params: &DimensionParams, scheme: &Scheme) -> Result<f64> {
    partial_integral(v, f, params.mu_n, params, scheme, v.kink_t, f64::INFINITY)
}
