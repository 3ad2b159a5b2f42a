//! Bound constants and certificate reports.
//!
//! The report puts the proven upper bound for the concentration level next to
//! the test-family lower bound, a blow-up table above the critical constant,
//! the computed extremal and its admissibility verdict.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::extremal::{multistart, ExtremalSolution, SolveOptions};
use crate::families::{blowup_table, moser, witness_lower_bound, BlowupRow, MoserProfile, WitnessRow, DEFAULT_EPS_GRID};
use crate::functional::tm_integral;
use crate::hessian::{admissibility_check, lift, AdmissibilityVerdict};
use crate::interp;
use crate::model::{DimensionParams, Perturbation};
use crate::profile::{Profile, ZeroProfile};
use crate::quadrature::{integrate_adaptive, Scheme};
use crate::special::{digamma, EULER_GAMMA};

/// `(1 + e^{Ψ(N/2+1)+γ}) / N`.
pub fn concentration_upper(params: &DimensionParams) -> f64 {
    let psi = digamma(params.kf() + 1.0).expect("k + 1 > 0").value;
    (1.0 + (psi + EULER_GAMMA).exp()) / params.nf()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

/// The integrability exponent `P = (1 − ‖v‖^{k+1})^{−2/N}`, infinite at norm 1.
pub fn cc_exponent(norm: f64, params: &DimensionParams) -> Result<Exponent> {
    if !(0.0..=1.0).contains(&norm) {
        return Err(LabError::domain("cc_exponent", format!("norm {norm} outside [0, 1]")));
    }
    if norm == 1.0 {
        return Ok(Exponent::Infinite);
    }
    let x = norm.powi(params.k as i32 + 1);
    Ok(Exponent::Finite((-2.0 / params.nf() * (-x).ln_1p()).exp()))
}

/// A nonnegative C¹ function on a half line, constant beyond `plateau_start`.
pub trait HalfLineFunction {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
    fn plateau_start(&self) -> f64;
    /// Points where the derivative may jump.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Cubic Hermite data `(t_i, w_i, w′_i)`; constant after the last node.
#[derive(Debug, Clone)]
pub struct SampledHalfLine {
    t: Vec<f64>,
    w: Vec<f64>,
    dw: Vec<f64>,
}

impl SampledHalfLine {
    pub fn new(t: Vec<f64>, w: Vec<f64>, dw: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || w.len() != t.len() || dw.len() != t.len() {
            return Err(LabError::precondition("sampled half line", "need at least two nodes and matching lengths"));
        }
        if t.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(LabError::precondition("sampled half line", "nodes must increase strictly"));
        }
        if w.iter().chain(&dw).any(|x| !x.is_finite()) || w.iter().any(|&x| x < 0.0) {
            return Err(LabError::precondition("sampled half line", "values must be finite and nonnegative"));
        }
        Ok(Self { t, w, dw })
    }
}

impl HalfLineFunction for SampledHalfLine {
    fn value(&self, t: f64) -> f64 {
        let end = *self.t.last().unwrap();
        if t >= end {
            return *self.w.last().unwrap();
        }
        interp::hermite(&self.t, &self.w, &self.dw, t.max(self.t[0])).0.max(0.0)
    }
    fn derivative(&self, t: f64) -> f64 {
        if t >= *self.t.last().unwrap() {
            return 0.0;
        }
        interp::hermite(&self.t, &self.w, &self.dw, t.max(self.t[0])).1
    }
    fn plateau_start(&self) -> f64 {
        *self.t.last().unwrap()
    }
}

/// `w(τ) = c_N^{1/(k+1)} N^{N/(N+2)} v(r)` with `τ = −N ln r`, which turns the
/// norm into `∫|w′|^{k+1}` and the functional into `N^{-1} ∫ e^{w^q − τ}`.
#[derive(Debug, Clone)]
pub struct TransformedProfile {
    profile: Profile,
    scale: f64,
    n: f64,
    t_max: f64,
}

impl TransformedProfile {
    pub fn new(profile: Profile, params: &DimensionParams, scheme: &Scheme) -> Self {
        let nf = params.nf();
        let scale = params.c_n.powf(1.0 / (params.kf() + 1.0)) * nf.powf(nf / (nf + 2.0));
        Self { profile, scale, n: nf, t_max: scheme.t_max }
    }
}

impl HalfLineFunction for TransformedProfile {
    fn value(&self, tau: f64) -> f64 {
        self.scale * self.profile.value_t((tau / self.n).min(self.t_max)).abs()
    }
    fn derivative(&self, tau: f64) -> f64 {
        let t = tau / self.n;
        if t >= self.t_max {
            return 0.0;
        }
        let sign = self.profile.value_t(t).signum();
        sign * self.scale * self.profile.slope_t(t) / self.n
    }
    fn plateau_start(&self) -> f64 {
        self.n * self.t_max
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.profile.breakpoints_t().into_iter().map(|t| self.n * t).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpEstimate {
    pub a: f64,
    pub p: f64,
    pub delta: f64,
    pub gamma_p: f64,
    pub c: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn integrate_pieces(f: impl Fn(f64) -> f64, a: f64, b: f64, cuts: &[f64]) -> f64 {
    let mut pts = vec![a];
    pts.extend(cuts.iter().copied().filter(|&c| c > a && c < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| integrate_adaptive(&f, w[0], w[1], 1e-300, 1e-13, 4000).value).sum()
}

/// Checks `∫_a^∞ e^{w^q − t} dt ≤ e^{w(a)^q − a} (1 − δ^{1/(p−1)})^{−1}
/// exp(((p−1)/p)^{p−1} c^p γ_p / p + Ψ(p) + γ)` with `δ = ∫_a^∞ |w′|^p`,
/// `q = p/(p−1)`, `c = q w(a)^{q−1}`, `γ_p = δ (1 − δ^{1/(p−1)})^{1−p}`.
pub fn sharp_estimate_check(w: &dyn HalfLineFunction, a: f64, p: f64) -> Result<SharpEstimate> {
    if !(a > 0.0) || !(p >= 2.0) {
        return Err(LabError::domain("sharp_estimate_check", format!("need a > 0 and p >= 2, got a = {a}, p = {p}")));
    }
    let q = p / (p - 1.0);
    let end = w.plateau_start().max(a);
    let cuts = w.breakpoints();
    let delta = integrate_pieces(|t| w.derivative(t).abs().powf(p), a, end, &cuts);
    if !(delta < 1.0) {
        return Err(LabError::precondition("sharp_estimate_check", format!("delta = {delta} must be below 1")));
    }
    let lhs = integrate_pieces(|t| (w.value(t).powf(q) - t).exp(), a, end, &cuts) + (w.value(end).powf(q) - end).exp();
    let wa = w.value(a);
    let root = delta.powf(1.0 / (p - 1.0));
    let gamma_p = delta * (1.0 - root).powf(1.0 - p);
    let c = if wa > 0.0 { q * wa.powf(q - 1.0) } else { 0.0 };
    let psi = digamma(p)?.value;
    let expo = ((p - 1.0) / p).powf(p - 1.0) * c.powf(p) * gamma_p / p + psi + EULER_GAMMA;
    let rhs = (wa.powf(q) - a + expo).exp() / (1.0 - root);
    Ok(SharpEstimate { a, p, delta, gamma_p, c, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-8) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpEstimateRow {
    pub j: f64,
    #[serde(flatten)]
    pub check: SharpEstimate,
}

/// The estimate on transformed Moser profiles, at `a = j/2` (midway to the kink).
pub fn sharp_estimate_battery(j_list: &[f64], params: &DimensionParams, scheme: &Scheme) -> Result<Vec<SharpEstimateRow>> {
    j_list
        .iter()
        .map(|&j| {
            let w: MoserProfile = moser(j, params)?;
            let h = TransformedProfile::new(Arc::new(w), params, scheme);
            Ok(SharpEstimateRow { j, check: sharp_estimate_check(&h, j / 2.0, params.kf() + 1.0)? })
        })
        .collect()
}

/// A report component: its value, the failure it produced, or why it was not run.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok { value: T },
    Error { message: String, numeric: bool },
    Skipped { reason: String },
}

impl<T> Outcome<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(value) => Outcome::Ok { value },
            Err(e) => Outcome::Error { numeric: e.is_numeric(), message: e.to_string() },
        }
    }

    fn skipped(reason: &str) -> Self {
        Outcome::Skipped { reason: reason.into() }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok { value } => Some(value),
            _ => None,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Outcome::Error { .. })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessSection {
    pub value: f64,
    pub best_epsilon: Option<f64>,
    pub rows: Vec<WitnessRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupSection {
    pub beta: f64,
    pub rows: Vec<BlowupRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalSummary {
    pub init: String,
    pub functional_value: f64,
    pub lambda: f64,
    pub multiplier: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub norm: f64,
    pub nonincreasing: bool,
    pub radial_bound_slack: f64,
    pub stationarity_max: f64,
    pub starts: Vec<crate::extremal::StartSummary>,
    pub multistart_spread: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossChecks {
    /// The test family does not beat the computed extremal.
    pub witness_below_extremal: Option<bool>,
    /// The family value exceeds the concentration bound.
    pub witness_above_concentration: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub timestamp: u64,
    pub params: DimensionParams,
    pub perturbation: Perturbation,
    pub quadrature: Scheme,
    pub dry_run: bool,
    pub concentration_upper: f64,
    pub witness_lower: Outcome<WitnessSection>,
    pub blowup: Outcome<BlowupSection>,
    pub sharp_estimate: Outcome<Vec<SharpEstimateRow>>,
    pub extremal: Outcome<ExtremalSummary>,
    pub admissibility: Outcome<AdmissibilityVerdict>,
    pub cross_checks: CrossChecks,
    /// Sibling CSV with the extremal profile, filled in by the writer.
    pub profile_csv: Option<String>,
}

impl CertificateReport {
    /// True when a component failed, admissibility failed or a cross-check is violated.
    pub fn has_failures(&self) -> bool {
        self.witness_lower.is_error()
            || self.blowup.is_error()
            || self.sharp_estimate.is_error()
            || self.extremal.is_error()
            || self.admissibility.is_error()
            || self.admissibility.ok().is_some_and(|v| !v.pass)
            || self.cross_checks.witness_below_extremal == Some(false)
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub beta_factor: f64,
    pub j_list: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub inits: Vec<Profile>,
    pub solve: SolveOptions,
    pub scheme: Scheme,
    /// Only the zero profile: no family scan, no solver.
    pub dry_run: bool,
}

impl ReportOptions {
    pub fn new(inits: Vec<Profile>) -> Self {
        Self {
            beta_factor: 1.2,
            j_list: vec![5.0, 10.0, 15.0, 20.0],
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
            inits,
            solve: SolveOptions::default(),
            scheme: Scheme::default(),
            dry_run: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportRun {
    pub report: CertificateReport,
    pub solution: Option<ExtremalSolution>,
}

fn witness_section(f: &Perturbation, params: &DimensionParams, opts: &ReportOptions) -> Result<WitnessSection> {
    if opts.dry_run {
        let value = tm_integral(&ZeroProfile, f, params.mu_n, params, &opts.scheme)?.value;
        return Ok(WitnessSection { value, best_epsilon: None, rows: Vec::new() });
    }
    let w = witness_lower_bound(f, params, &opts.eps_grid, &opts.scheme)?;
    Ok(WitnessSection { value: w.value, best_epsilon: Some(w.best_epsilon), rows: w.rows })
}

fn solve_section(f: &Perturbation, params: &DimensionParams, opts: &ReportOptions) -> Result<(ExtremalSummary, ExtremalSolution, AdmissibilityVerdict)> {
    let m = multistart(f, params, &opts.inits, &opts.solve, &opts.scheme)?;
    let b = m.best;
    let summary = ExtremalSummary {
        init: b.init.clone(),
        functional_value: b.functional_value,
        lambda: b.lambda,
        multiplier: b.multiplier,
        el_residual: b.el_residual,
        iterations: b.iterations,
        norm: b.norm,
        nonincreasing: b.nonincreasing,
        radial_bound_slack: b.radial_bound.min_slack,
        stationarity_max: b.stationarity.max_abs,
        starts: m.starts,
        multistart_spread: m.spread,
    };
    let verdict = admissibility_check(&lift(Arc::new(b.profile.clone()), params)?, &opts.scheme);
    Ok((summary, b, verdict))
}

/// Runs every component (concurrently) and assembles the report; failures are
/// recorded in place.
pub fn build_report(f: &Perturbation, params: &DimensionParams, opts: &ReportOptions) -> ReportRun {
    let ((witness, blowup), (sharp, solved)) = rayon::join(
        || {
            rayon::join(
                || Outcome::from_result(witness_section(f, params, opts)),
                || {
                    if opts.dry_run {
                        return Outcome::skipped("dry run");
                    }
                    let beta = opts.beta_factor * params.mu_n;
                    Outcome::from_result(blowup_table(&opts.j_list, beta, f, params, &opts.scheme).map(|rows| BlowupSection { beta, rows }))
                },
            )
        },
        || {
            rayon::join(
                || {
                    if opts.dry_run {
                        return Outcome::skipped("dry run");
                    }
                    Outcome::from_result(sharp_estimate_battery(&[5.0, 10.0, 20.0], params, &opts.scheme))
                },
                || if opts.dry_run { None } else { Some(solve_section(f, params, opts)) },
            )
        },
    );
    let (extremal, admissibility, solution) = match solved {
        None => (Outcome::skipped("dry run"), Outcome::skipped("dry run"), None),
        Some(Ok((summary, sol, verdict))) => (Outcome::Ok { value: summary }, Outcome::Ok { value: verdict }, Some(sol)),
        Some(Err(e)) => {
            let msg = e.to_string();
            (Outcome::from_result(Err(e)), Outcome::skipped(&format!("no extremal: {msg}")), None)
        }
    };
    let w = witness.ok().map(|w| w.value);
    let upper = concentration_upper(params);
    let cross_checks = CrossChecks {
        witness_below_extremal: match (w, extremal.ok()) {
            (Some(w), Some(e)) => Some(w <= e.functional_value + 1e-8),
            _ => None,
        },
        witness_above_concentration: w.filter(|_| !opts.dry_run).map(|w| w > upper),
    };
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let report = CertificateReport {
        timestamp,
        params: *params,
        perturbation: f.clone(),
        quadrature: opts.scheme.clone(),
        dry_run: opts.dry_run,
        concentration_upper: upper,
        witness_lower: witness,
        blowup,
        sharp_estimate: sharp,
        extremal,
        admissibility,
        cross_checks,
        profile_csv: None,
    };
    ReportRun { report, solution }
}
