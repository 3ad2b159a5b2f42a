//! Candidate maximizers via the Euler–Lagrange fixed point.
//!
//! In `t = −ln r` with `s = dv/dt`, a unit-norm critical point satisfies
//! `c_N s^k(t) = Λ Φ(t)`, `Φ(t) = ∫_t^∞ e^{−Nτ} G(τ) dτ`,
//! `G = q |v|^{q−1} e^{μ_N |v|^q}`, `q = (N+2)/N + f`. The map
//! `s ↦ normalize(Φ[s]^{1/k})` maximizes the linearized functional over the
//! unit sphere, so the damped iteration never decreases the (convex) discrete
//! functional. Testing the weak equation with `h = v` fixes
//! `Λ = 1 / ∫ e^{−Nt} q |v|^q e^{μ|v|^q} dt`; the `λ` reported alongside is
//! `Λ / μ_N`.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::error::{LabError, Result};
use crate::functional::{tm_on_samples, BLOWUP_LIMIT, SPLIT_T, ZERO_CUTOFF};
use crate::model::{DimensionParams, Perturbation};
use crate::profile::{layout_for, x1_norm_on, GridProfile, Profile, RadialBoundReport, RadialProfile, Samples};
use crate::quadrature::{integrate_adaptive, Cumulative, Layout, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Blend weight θ of the new iterate.
    pub damping: f64,
    /// Stop when the sup-node change of `v` drops below this.
    pub tol: f64,
    pub maxiter: usize,
    /// Seed for the random tangent directions of the stationarity check.
    pub seed: u64,
    pub directions: usize,
    pub fd_step: f64,
    /// Anderson memory depth; 0 gives the plain damped iteration.
    pub acceleration: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-10, maxiter: 500, seed: 7, directions: 5, fd_step: 1e-4, acceleration: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub change: f64,
    pub functional: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureKind {
    NoProgress,
    MaxIterations,
    Numeric { detail: String },
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureKind::NoProgress => write!(f, "no progress (damping 0 leaves the iterate unchanged)"),
            FailureKind::MaxIterations => write!(f, "no convergence within the iteration limit"),
            FailureKind::Numeric { detail } => write!(f, "numeric failure: {detail}"),
        }
    }
}

/// Structured non-convergence: the best iterate and the change history.
#[derive(Debug, Clone, Error)]
#[error("{kind} after {iterations} iterations (last change {last_change:e})")]
pub struct SolveFailure {
    pub kind: FailureKind,
    pub iterations: usize,
    pub last_change: f64,
    pub best: Option<Box<GridProfile>>,
    pub history: Vec<HistoryRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    /// `v′(r)` at the innermost node.
    pub slope_at_origin: f64,
    /// `v′(r)/r` at the innermost node.
    pub slope_ratio_limit: f64,
    /// `−(Λ q₀ v(0)^{2/N} e^{μ v(0)^{q₀}} / (N c_N))^{2/N}`.
    pub slope_ratio_predicted: f64,
    pub hessian_trace_ok: bool,
    /// `max r |v|^{2/N} e^{μ|v|^{q₀}}` over the ten innermost nodes.
    pub decay_check: f64,
    pub decay_innermost: f64,
    pub decay_tenth: f64,
    /// `sup (q₀ + f)|v|^f`.
    pub f0_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub step: f64,
    pub derivatives: Vec<f64>,
    pub max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalSolution {
    #[serde(skip)]
    pub profile: GridProfile,
    pub init: String,
    pub init_value: f64,
    /// `λ = (μ_N ∫ r^{N−1} q |v|^q e^{μ|v|^q} dr)^{−1}`.
    pub lambda: f64,
    /// `Λ = μ_N λ`, the multiplier of the integral equation.
    pub multiplier: f64,
    pub functional_value: f64,
    pub norm: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub final_change: f64,
    pub nonincreasing: bool,
    pub radial_bound: RadialBoundReport,
    pub diagnostics: RegularityReport,
    pub stationarity: StationarityReport,
    #[serde(skip)]
    pub history: Vec<HistoryRow>,
}

/// Discretized fixed-point map on the slope nodes of one layout.
#[derive(Debug, Clone)]
pub struct FixedPointMap {
    layout: Layout,
    cum: Cumulative,
    params: DimensionParams,
    f: Perturbation,
    q: Vec<f64>,
    q_end: f64,
}

/// Node data derived from a slope vector.
#[derive(Debug, Clone)]
pub struct State {
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub v_end: f64,
    /// `e^{−Nt} G` at the nodes.
    pub y: Vec<f64>,
    /// `Φ` at the nodes.
    pub phi: Vec<f64>,
    /// `Φ(t_max)`, the frozen tail.
    pub tail: f64,
}

impl FixedPointMap {
    pub fn new(f: &Perturbation, params: &DimensionParams, scheme: &Scheme) -> Result<Self> {
        scheme.validate()?;
        f.validate()?;
        let layout = scheme.layout(&SPLIT_T);
        let q0 = params.q0();
        let q = layout.nodes.iter().map(|&t| q0 + f.eval_t(t)).collect();
        let q_end = q0 + f.eval_t(layout.t_max());
        Ok(Self { cum: Cumulative::new(&layout), layout, params: *params, f: f.clone(), q, q_end })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn norm(&self, s: &[f64]) -> f64 {
        let p = self.params.k as i32 + 1;
        let acc: f64 = self.layout.weights.iter().zip(s).map(|(w, x)| w * x.abs().powi(p)).sum();
        (self.params.c_n * acc).powf(1.0 / p as f64)
    }

    fn normalize(&self, mut s: Vec<f64>) -> Result<Vec<f64>> {
        let n = self.norm(&s);
        if !(n > 0.0) {
            return Err(LabError::ZeroProfile);
        }
        if !n.is_finite() {
            return Err(LabError::NonFinite { quantity: "norm", t: f64::NAN, r: f64::NAN });
        }
        s.iter_mut().for_each(|x| *x /= n);
        Ok(s)
    }

    /// Unit-norm nonnegative slopes of a profile.
    pub fn initial(&self, v: &dyn RadialProfile) -> Result<Vec<f64>> {
        let s = v.sample(&self.layout).s.into_iter().map(|x| x.abs()).collect();
        self.normalize(s)
    }

    /// `ln G` for `v ≥ 0`, or `None` where `G = 0`.
    fn ln_g(&self, v: f64, q: f64, t: f64) -> Result<Option<f64>> {
        if v < ZERO_CUTOFF {
            return Ok(None);
        }
        let lv = v.ln();
        let e = self.params.mu_n * (q * lv).exp();
        if e > BLOWUP_LIMIT {
            return Err(LabError::BlowUp { radius: (-t).exp(), exponent: e, limit: BLOWUP_LIMIT });
        }
        Ok(Some(q.ln() + (q - 1.0) * lv + e))
    }

    pub fn state(&self, s: Vec<f64>) -> Result<State> {
        let v: Vec<f64> = self.cum.from_left(&s).into_iter().map(|x| x.max(0.0)).collect();
        let v_end = self.cum.total_from_right(&s, 0.0).max(0.0);
        let n = self.params.nf();
        let mut y = Vec::with_capacity(v.len());
        for i in 0..v.len() {
            let t = self.layout.nodes[i];
            y.push(match self.ln_g(v[i], self.q[i], t)? {
                Some(lg) => (lg - n * t).exp(),
                None => 0.0,
            });
        }
        let t_max = self.layout.t_max();
        let tail = match self.ln_g(v_end, self.q_end, t_max)? {
            Some(lg) => (lg - n * t_max).exp() / n,
            None => 0.0,
        };
        let phi = self.cum.from_right(&y, tail);
        Ok(State { s, v, v_end, y, phi, tail })
    }

    /// Unnormalized image `Φ^{1/k}` and its normalizing factor.
    fn image(&self, st: &State) -> Result<(Vec<f64>, f64)> {
        let inv_k = 1.0 / self.params.kf();
        let raw: Vec<f64> = st.phi.iter().map(|&p| p.max(0.0).powf(inv_k)).collect();
        let n = self.norm(&raw);
        if !(n > 0.0 && n.is_finite()) {
            return Err(LabError::ZeroProfile);
        }
        Ok((raw, 1.0 / n))
    }

    /// One damped step; `θ = 0` returns the iterate unchanged.
    pub fn step(&self, st: &State, theta: f64) -> Result<Vec<f64>> {
        if theta == 0.0 {
            return Ok(st.s.clone());
        }
        let (raw, scale) = self.image(st)?;
        let blend = raw.iter().zip(&st.s).map(|(a, b)| (theta * a * scale + (1.0 - theta) * b).max(0.0)).collect();
        self.normalize(blend)
    }

    /// Discrete functional at `β = μ_N` (same rule as the functional module).
    pub fn functional(&self, st: &State) -> Result<f64> {
        let samples = Samples { v: st.v.clone(), s: st.s.clone(), v_end: st.v_end };
        let sp = tm_on_samples(&samples, &self.layout, &self.f, self.params.mu_n, &self.params)?;
        Ok(sp.near_boundary + sp.middle + sp.near_origin)
    }

    /// Discrete functional at arbitrary (not necessarily unit) slopes, using |v|.
    fn functional_of_slopes(&self, s: &[f64]) -> Result<f64> {
        let v = self.cum.from_left(s).into_iter().map(f64::abs).collect();
        let v_end = self.cum.total_from_right(s, 0.0).abs();
        let samples = Samples { v, s: s.to_vec(), v_end };
        let sp = tm_on_samples(&samples, &self.layout, &self.f, self.params.mu_n, &self.params)?;
        Ok(sp.near_boundary + sp.middle + sp.near_origin)
    }

    /// `∫ e^{−Nt} q v^q e^{μ v^q} dt = ∫ y v dt` including the tail.
    pub fn multiplier_integral(&self, st: &State) -> f64 {
        let body: f64 = (0..st.v.len()).map(|i| self.layout.weights[i] * st.y[i] * st.v[i]).sum();
        body + st.tail * st.v_end
    }
}

fn numeric(e: LabError, iterations: usize, history: &[HistoryRow], best: Option<GridProfile>) -> LabError {
    LabError::Solver(SolveFailure {
        kind: FailureKind::Numeric { detail: e.to_string() },
        iterations,
        last_change: history.last().map_or(f64::NAN, |h| h.change),
        best: best.map(Box::new),
        history: history.to_vec(),
    })
}

/// Damped fixed-point iteration from `init`.
pub fn solve_extremal(
    f: &Perturbation,
    params: &DimensionParams,
    init: &dyn RadialProfile,
    opts: &SolveOptions,
    scheme: &Scheme,
) -> Result<ExtremalSolution> {
    if !(0.0..=1.0).contains(&opts.damping) {
        return Err(LabError::Config(format!("damping {} outside [0, 1]", opts.damping)));
    }
    let map = FixedPointMap::new(f, params, scheme)?;
    let mut st = map.state(map.initial(init)?)?;
    let init_value = map.functional(&st)?;
    let mut history: Vec<HistoryRow> = Vec::new();
    if opts.damping == 0.0 {
        return Err(LabError::Solver(SolveFailure {
            kind: FailureKind::NoProgress,
            iterations: 0,
            last_change: 0.0,
            best: grid_profile(&map, &st).ok().map(Box::new),
            history,
        }));
    }
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    let mut anderson = Anderson::new(opts.acceleration, map.layout.weights.clone());
    while iterations < opts.maxiter {
        iterations += 1;
        let plain = match map.step(&st, opts.damping).and_then(|s| map.state(s)) {
            Ok(n) => n,
            Err(e) => return Err(numeric(e, iterations, &history, grid_profile(&map, &st).ok())),
        };
        change = plain.v.iter().zip(&st.v).map(|(a, b)| (a - b).abs()).fold((plain.v_end - st.v_end).abs(), f64::max);
        if !change.is_finite() {
            return Err(numeric(LabError::NonFinite { quantity: "iterate", t: f64::NAN, r: f64::NAN }, iterations, &history, None));
        }
        let mut value = map.functional(&plain).map_err(|e| numeric(e, iterations, &history, None))?;
        let residual: Vec<f64> = plain.s.iter().zip(&st.s).map(|(a, b)| a - b).collect();
        let mut next = plain;
        if change >= opts.tol {
            // Accepted only when it does not lose ascent against the plain step.
            if let Some(candidate) = anderson.propose(&st.s, &residual) {
                let tried = map.normalize(candidate.into_iter().map(|x| x.max(0.0)).collect()).and_then(|c| map.state(c));
                match tried.and_then(|c| map.functional(&c).map(|val| (c, val))) {
                    Ok((c, val)) if val >= value => {
                        next = c;
                        value = val;
                    }
                    _ => anderson.reset(),
                }
            }
        }
        st = next;
        let multiplier = 1.0 / map.multiplier_integral(&st);
        history.push(HistoryRow { iteration: iterations, change, functional: value, multiplier });
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if converged {
        // One undamped step so tail nodes, where v barely moves, satisfy the
        // integral equation to the same accuracy as the bulk.
        iterations += 1;
        st = map.step(&st, 1.0).and_then(|s| map.state(s)).map_err(|e| numeric(e, iterations, &history, None))?;
        let value = map.functional(&st).map_err(|e| numeric(e, iterations, &history, None))?;
        history.push(HistoryRow { iteration: iterations, change, functional: value, multiplier: 1.0 / map.multiplier_integral(&st) });
    }
    if !converged {
        return Err(LabError::Solver(SolveFailure {
            kind: FailureKind::MaxIterations,
            iterations,
            last_change: change,
            best: grid_profile(&map, &st).ok().map(Box::new),
            history,
        }));
    }
    finish(&map, st, init.label(), init_value, iterations, change, history, opts, scheme)
}

/// Anderson mixing on the fixed-point residual in the weighted `ℓ²` product.
#[derive(Debug)]
struct Anderson {
    depth: usize,
    weights: Vec<f64>,
    dx: VecDeque<Vec<f64>>,
    dg: VecDeque<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(depth: usize, weights: Vec<f64>) -> Self {
        Self { depth, weights, dx: VecDeque::new(), dg: VecDeque::new(), last: None }
    }

    fn reset(&mut self) {
        self.dx.clear();
        self.dg.clear();
        self.last = None;
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }

    fn propose(&mut self, x: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        if self.depth == 0 {
            return None;
        }
        if let Some((xp, gp)) = self.last.take() {
            self.dx.push_back(x.iter().zip(&xp).map(|(a, b)| a - b).collect());
            self.dg.push_back(g.iter().zip(&gp).map(|(a, b)| a - b).collect());
            if self.dx.len() > self.depth {
                self.dx.pop_front();
                self.dg.pop_front();
            }
        }
        self.last = Some((x.to_vec(), g.to_vec()));
        let m = self.dg.len();
        if m == 0 {
            return None;
        }
        let mut a = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            for j in 0..m {
                a[i][j] = self.dot(&self.dg[i], &self.dg[j]);
            }
            a[i][m] = self.dot(&self.dg[i], g);
        }
        let ridge = 1e-12 * (0..m).map(|i| a[i][i]).sum::<f64>();
        (0..m).for_each(|i| a[i][i] += ridge);
        let gamma = solve_dense(a)?;
        let mut out: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + b).collect();
        for (j, c) in gamma.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o -= c * (self.dx[j][i] + self.dg[j][i]);
            }
        }
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

/// Gaussian elimination with partial pivoting on an augmented `m × (m+1)` system.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < f64::MIN_POSITIVE {
            return None;
        }
        a.swap(c, p);
        for r in c + 1..m {
            let factor = a[r][c] / a[c][c];
            for k in c..=m {
                a[r][k] -= factor * a[c][k];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let tail: f64 = (r + 1..m).map(|k| a[r][k] * x[k]).sum();
        x[r] = (a[r][m] - tail) / a[r][r];
    }
    Some(x)
}

/// Grid profile with nodes `0`, the layout nodes and `t_max`, carrying EL curvatures.
fn grid_profile(map: &FixedPointMap, st: &State) -> Result<GridProfile> {
    let (_, scale) = map.image(st)?;
    let k = map.params.kf();
    let s_of_phi = |p: f64| scale * p.max(0.0).powf(1.0 / k);
    let phi0 = map.cum.total_from_right(&st.y, st.tail);
    let layout = &map.layout;
    let mut t = Vec::with_capacity(st.s.len() + 2);
    t.push(0.0);
    t.extend_from_slice(&layout.nodes);
    t.push(layout.t_max());
    let mut v = vec![0.0];
    v.extend_from_slice(&st.v);
    v.push(st.v_end);
    let mut s = vec![s_of_phi(phi0)];
    s.extend_from_slice(&st.s);
    let s_end = s_of_phi(st.tail);
    s.push(s_end);
    let mut curv = vec![0.0];
    for i in 0..st.s.len() {
        curv.push(if st.phi[i] > 0.0 { -st.s[i] * st.y[i] / (k * st.phi[i]) } else { 0.0 });
    }
    curv.push(-map.params.nf() / k * s_end);
    GridProfile::new(t, v, s, Some(curv))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    map: &FixedPointMap,
    st: State,
    init: String,
    init_value: f64,
    iterations: usize,
    final_change: f64,
    history: Vec<HistoryRow>,
    opts: &SolveOptions,
    scheme: &Scheme,
) -> Result<ExtremalSolution> {
    let params = &map.params;
    let functional_value = map.functional(&st)?;
    let multiplier = 1.0 / map.multiplier_integral(&st);
    let k = params.kf();
    let el_residual = (0..st.s.len())
        .filter(|&i| st.phi[i] > 0.0)
        .map(|i| (params.c_n * st.s[i].powf(k) / (multiplier * st.phi[i]) - 1.0).abs())
        .fold(0.0, f64::max);
    let profile = grid_profile(map, &st)?;
    let nonincreasing = profile.values().windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let norm = x1_norm_on(&profile, params, &map.layout)?;
    let radial_bound = crate::profile::radial_bound_check(&profile, params, scheme, 1e-6)?;
    let diagnostics = regularity(map, &st, &profile, multiplier);
    let stationarity = stationarity(map, &st, opts)?;
    Ok(ExtremalSolution {
        profile,
        init,
        init_value,
        lambda: multiplier / params.mu_n,
        multiplier,
        functional_value,
        norm,
        el_residual,
        iterations,
        final_change,
        nonincreasing,
        radial_bound,
        diagnostics,
        stationarity,
        history,
    })
}

fn regularity(map: &FixedPointMap, st: &State, profile: &GridProfile, multiplier: f64) -> RegularityReport {
    let params = &map.params;
    let (nf, q0) = (params.nf(), params.q0());
    let nodes = &map.layout.nodes;
    let m = nodes.len() - 1;
    let r_in = (-nodes[m]).exp();
    let slope_at_origin = -st.s[m] / r_in;
    let slope_ratio_limit = slope_at_origin / r_in;
    let v0 = st.v_end;
    let g0 = q0 * v0.powf(2.0 / nf) * (params.mu_n * v0.powf(q0)).exp();
    let slope_ratio_predicted = -(multiplier * g0 / (nf * params.c_n)).powf(2.0 / nf);
    let curv = profile.curvatures().unwrap_or(&[]);
    let finite = nodes.iter().enumerate().all(|(i, &t)| {
        let r = (-t).exp();
        ((curv[i + 1] + st.s[i]) / (r * r)).is_finite()
    });
    let ratio_ok = ((slope_ratio_limit - slope_ratio_predicted) / slope_ratio_predicted).abs() < 1e-3;
    let decay_at = |i: usize| {
        let (t, v) = (nodes[i], st.v[i]);
        (-t).exp() * v.powf(2.0 / nf) * (params.mu_n * v.powf(q0)).exp()
    };
    let inner: Vec<f64> = (0..10.min(m + 1)).map(|j| decay_at(m - j)).collect();
    let f0_constant = (0..st.v.len())
        .map(|i| {
            let fv = map.f.eval_t(nodes[i]);
            let v = st.v[i];
            if v < ZERO_CUTOFF {
                q0 + fv
            } else {
                (q0 + fv) * (fv * v.ln()).exp()
            }
        })
        .fold(0.0, f64::max);
    RegularityReport {
        slope_at_origin,
        slope_ratio_limit,
        slope_ratio_predicted,
        hessian_trace_ok: finite && ratio_ok,
        decay_check: inner.iter().cloned().fold(0.0, f64::max),
        decay_innermost: inner[0],
        decay_tenth: *inner.last().unwrap(),
        f0_constant,
    }
}

/// Tangent unit directions built from `sin(mπ(1 − e^{−t/3}))`, `m = 1..8`,
/// with seeded random coefficients.
fn tangent_directions(map: &FixedPointMap, s: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = map.params.k as i32;
    let w = &map.layout.weights;
    let sk: Vec<f64> = s.iter().map(|x| x.powi(k)).collect();
    let denom: f64 = (0..s.len()).map(|i| w[i] * sk[i] * s[i]).sum();
    (0..count)
        .map(|_| {
            let coeffs: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut d: Vec<f64> = map
                .layout
                .nodes
                .iter()
                .map(|&t| {
                    let x = 1.0 - (-t / 3.0).exp();
                    coeffs.iter().enumerate().map(|(m, a)| a * ((m + 1) as f64 * std::f64::consts::PI * x).sin()).sum()
                })
                .collect();
            let proj: f64 = (0..s.len()).map(|i| w[i] * sk[i] * d[i]).sum::<f64>() / denom;
            d.iter_mut().zip(s).for_each(|(x, si)| *x -= proj * si);
            let n = map.norm(&d);
            d.iter_mut().for_each(|x| *x /= n);
            d
        })
        .collect()
}

fn stationarity(map: &FixedPointMap, st: &State, opts: &SolveOptions) -> Result<StationarityReport> {
    let h = opts.fd_step;
    let retract = |sign: f64, d: &[f64]| -> Result<f64> {
        let moved: Vec<f64> = st.s.iter().zip(d).map(|(a, b)| a + sign * h * b).collect();
        let n = map.norm(&moved);
        let unit: Vec<f64> = moved.iter().map(|x| x / n).collect();
        map.functional_of_slopes(&unit)
    };
    let mut derivatives = Vec::with_capacity(opts.directions);
    for d in tangent_directions(map, &st.s, opts.directions, opts.seed) {
        derivatives.push((retract(1.0, &d)? - retract(-1.0, &d)?) / (2.0 * h));
    }
    let max_abs = derivatives.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok(StationarityReport { step: h, derivatives, max_abs })
}

/// `(μ_N ∫ r^{N−1} q |v|^q e^{μ_N|v|^q} dr)^{−1}` for a unit-norm profile.
pub fn lambda_of(v: &dyn RadialProfile, f: &Perturbation, params: &DimensionParams, scheme: &Scheme) -> Result<f64> {
    let layout = layout_for(v, scheme, &SPLIT_T);
    let norm = x1_norm_on(v, params, &layout)?;
    if norm == 0.0 {
        return Err(LabError::ZeroProfile);
    }
    if (norm - 1.0).abs() > 1e-6 {
        return Err(LabError::precondition("lambda_of", format!("profile norm {norm} is not 1")));
    }
    let smp = v.sample(&layout);
    let (n, q0, mu) = (params.nf(), params.q0(), params.mu_n);
    let term = |v: f64, t: f64| -> Result<f64> {
        let a = v.abs();
        if a < ZERO_CUTOFF {
            return Ok(0.0);
        }
        let q = q0 + f.eval_t(t);
        let p = (q * a.ln()).exp();
        if mu * p > BLOWUP_LIMIT {
            return Err(LabError::BlowUp { radius: (-t).exp(), exponent: mu * p, limit: BLOWUP_LIMIT });
        }
        Ok(q * p * (mu * p - n * t).exp())
    };
    let mut acc = 0.0;
    for (i, &t) in layout.nodes.iter().enumerate() {
        acc += layout.weights[i] * term(smp.v[i], t)?;
    }
    acc += term(smp.v_end, layout.t_max())? / n;
    if !(acc > 0.0) {
        return Err(LabError::ZeroProfile);
    }
    Ok(1.0 / (mu * acc))
}

/// `∫_0^r s^{N−1} q |v|^{q−1} e^{μ|v|^q} ds` by adaptive quadrature in `t`.
fn inner_integral(v: &dyn RadialProfile, t: f64, f: &Perturbation, params: &DimensionParams, t_max: f64) -> f64 {
    let (n, q0, mu) = (params.nf(), params.q0(), params.mu_n);
    let g = |tau: f64| {
        let a = v.value_t(tau).abs();
        if a < ZERO_CUTOFF {
            return 0.0;
        }
        let q = q0 + f.eval_t(tau);
        (q.ln() + (q - 1.0) * a.ln() + mu * (q * a.ln()).exp() - n * tau).exp()
    };
    let body = if t < t_max { integrate_adaptive(g, t, t_max, 1e-300, 1e-13, 2000).value } else { 0.0 };
    let from = t.max(t_max);
    body + g(from) / n
}

/// `v′(r) = −(λ/(c_N r^{N−k}) ∫_0^r s^{N−1} q|v|^{q−1} e^{μ|v|^q} ds)^{1/k}`, with `v′(0) = 0`.
pub fn el_slope(v: &dyn RadialProfile, r: f64, lambda: f64, f: &Perturbation, params: &DimensionParams, scheme: &Scheme) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(LabError::domain("el_slope", format!("lambda = {lambda} must be positive")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(LabError::domain("el_slope", format!("r = {r} outside [0, 1]")));
    }
    let t = -r.ln();
    let phi = inner_integral(v, t, f, params, scheme.t_max);
    Ok(-(lambda * phi / params.c_n).powf(1.0 / params.kf()) / r)
}

/// `v″(r)` from the integral equation; at `r = 0` the limit `lim v′(r)/r`.
pub fn second_derivative(sol: &ExtremalSolution, r: f64, f: &Perturbation, params: &DimensionParams, scheme: &Scheme) -> Result<f64> {
    if r == 0.0 {
        return Ok(sol.diagnostics.slope_ratio_predicted);
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(LabError::domain("second_derivative", format!("r = {r} outside [0, 1]")));
    }
    let v = &sol.profile;
    let t = -r.ln();
    let (nf, k) = (params.nf(), params.kf());
    let dv = v.derivative(r);
    let phi = inner_integral(v, t, f, params, scheme.t_max);
    let a = v.value_t(t).abs();
    let q = params.q0() + f.eval_t(t);
    let g = if a < ZERO_CUTOFF { 0.0 } else { (q.ln() + (q - 1.0) * a.ln() + params.mu_n * (q * a.ln()).exp()).exp() };
    let ratio = r.powf(nf - 1.0) * g / phi;
    Ok(dv / k * (-(nf - k) / r + ratio))
}

#[derive(Debug, Clone, Serialize)]
pub struct StartSummary {
    pub init: String,
    pub converged: bool,
    pub functional_value: Option<f64>,
    pub iterations: usize,
    pub el_residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiStart {
    pub starts: Vec<StartSummary>,
    pub selected: usize,
    /// Spread of the converged functional values.
    pub spread: f64,
    pub disagreement: bool,
    pub best: ExtremalSolution,
}

/// Runs one solve per initial profile concurrently and keeps the best value.
pub fn multistart(
    f: &Perturbation,
    params: &DimensionParams,
    inits: &[Profile],
    opts: &SolveOptions,
    scheme: &Scheme,
) -> Result<MultiStart> {
    if inits.is_empty() {
        return Err(LabError::Config("multistart needs at least one initial profile".into()));
    }
    let results: Vec<Result<ExtremalSolution>> =
        inits.par_iter().map(|v| solve_extremal(f, params, v.as_ref(), opts, scheme)).collect();
    let starts = inits
        .iter()
        .zip(&results)
        .map(|(v, r)| match r {
            Ok(s) => StartSummary {
                init: v.label(),
                converged: true,
                functional_value: Some(s.functional_value),
                iterations: s.iterations,
                el_residual: Some(s.el_residual),
                error: None,
            },
            Err(e) => StartSummary {
                init: v.label(),
                converged: false,
                functional_value: None,
                iterations: match e {
                    LabError::Solver(fail) => fail.iterations,
                    _ => 0,
                },
                el_residual: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut selected = None;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, r) in results.iter().enumerate() {
        if let Ok(s) = r {
            lo = lo.min(s.functional_value);
            hi = hi.max(s.functional_value);
            if selected.is_none_or(|j: usize| s.functional_value > results[j].as_ref().unwrap().functional_value) {
                selected = Some(i);
            }
        }
    }
    let Some(selected) = selected else {
        return Err(results.into_iter().next().unwrap().unwrap_err());
    };
    let spread = hi - lo;
    if spread > 1e-6 {
        log::warn!("multistart: converged values differ by {spread:e}");
    }
    let best = results.into_iter().nth(selected).unwrap().unwrap();
    Ok(MultiStart { starts, selected, spread, disagreement: spread > 1e-6, best })
}
