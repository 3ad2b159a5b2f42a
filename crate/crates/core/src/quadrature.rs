//! Quadrature kernels.
//!
//! * [`GaussLegendre`]: fixed-order rule on `[-1, 1]` with spectral integration
//!   matrices for cumulative integrals at the nodes.
//! * [`integrate_adaptive`]: globally adaptive Gauss–Kronrod (7/15) integration,
//!   used as the independent oracle route.
//! * [`integrate_half_line`]: improper integrals over `(0, ∞)` with power-law
//!   endpoint behaviour, truncated where the analytic tail bound drops below
//!   the requested tolerance.
//! * [`Scheme`] / [`Layout`]: composite panels in `t = -ln r` on which every
//!   radial integral of the crate is evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::Scalar;

/// Gauss–Legendre rule of order `n` on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    /// Builds the rule by Newton iteration on the three-term Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let nf = T::of_usize(n);
        for i in 0..n {
            let mut x = (T::PI() * (T::of_usize(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
            let mut dp = T::one();
            for _ in 0..100 {
                let (p, p_prev) = legendre_pair(n, x);
                dp = nf * (x * p - p_prev) / (x * x - T::one());
                let dx = p / dp;
                x = x - dx;
                if dx.abs() <= T::epsilon() * T::lit(4.0) {
                    let (p, p_prev) = legendre_pair(n, x);
                    dp = nf * (x * p - p_prev) / (x * x - T::one());
                    break;
                }
            }
            nodes.push(x);
            weights.push(T::lit(2.0) / ((T::one() - x * x) * dp * dp));
        }
        // Newton from the cosine guesses yields descending nodes.
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + *w * f(mid + half * *x);
        }
        acc * half
    }

    /// Lagrange basis polynomial `j` of the node set, evaluated at `x`.
    pub fn lagrange(&self, j: usize, x: T) -> T {
        let xj = self.nodes[j];
        self.nodes
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != j)
            .fold(T::one(), |acc, (_, xm)| acc * (x - *xm) / (xj - *xm))
    }

    /// Matrix `S[i][j] = ∫_{-1}^{x_i} ℓ_j` (left) or `∫_{x_i}^{1} ℓ_j` (right).
    ///
    /// Exact for the interpolating polynomial of the node values, so
    /// `Σ_j S[i][j] y_j` is the cumulative integral to spectral accuracy.
    pub fn integration_matrix(&self, from_left: bool) -> Vec<Vec<T>> {
        let n = self.order();
        let mut out = vec![vec![T::zero(); n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            let xi = self.nodes[i];
            let (a, b) = if from_left { (-T::one(), xi) } else { (xi, T::one()) };
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = self.integrate(a, b, |x| self.lagrange(j, x));
            }
        }
        out
    }
}

fn legendre_pair<T: Scalar>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    if n == 0 {
        return (p0, T::zero());
    }
    for j in 2..=n {
        let jf = T::of_usize(j);
        let p2 = ((T::lit(2.0) * jf - T::one()) * x * p1 - (jf - T::one()) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub abs_error: T,
}

const GK_XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const GK_WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_9,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

fn gk15<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let fc = f(mid);
    let mut kronrod = fc * T::lit(GK_WGK[7]);
    let mut gauss = fc * T::lit(GK_WG[3]);
    for (k, (&x, &wk)) in GK_XGK.iter().zip(&GK_WGK).take(7).enumerate() {
        let dx = half * T::lit(x);
        let s = f(mid - dx) + f(mid + dx);
        kronrod = kronrod + s * T::lit(wk);
        if k % 2 == 1 {
            gauss = gauss + s * T::lit(GK_WG[k / 2]);
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Globally adaptive Gauss–Kronrod 7/15 integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol·|I|)` or `max_intervals` is hit.
pub fn integrate_adaptive<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
    max_intervals: usize,
) -> Integral<T> {
    if a == b {
        return Integral { value: T::zero(), abs_error: T::zero() };
    }
    let (v0, e0) = gk15(&mut f, a, b);
    let mut segments = vec![(a, b, v0, e0)];
    loop {
        let total: T = segments.iter().fold(T::zero(), |acc, s| acc + s.2);
        let err: T = segments.iter().fold(T::zero(), |acc, s| acc + s.3);
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target || segments.len() >= max_intervals {
            return Integral { value: total, abs_error: err };
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .fold((0, -T::one()), |best, (i, s)| if s.3 > best.1 { (i, s.3) } else { best });
        let (lo, hi, _, _) = segments.swap_remove(idx);
        let m = (lo + hi) * T::lit(0.5);
        if m <= lo || m >= hi {
            // Interval exhausted at machine resolution.
            let total = segments.iter().fold(T::zero(), |acc, s| acc + s.2);
            let err = segments.iter().fold(T::zero(), |acc, s| acc + s.3);
            return Integral { value: total, abs_error: err };
        }
        let (v1, e1) = gk15(&mut f, lo, m);
        let (v2, e2) = gk15(&mut f, m, hi);
        segments.push((lo, m, v1, e1));
        segments.push((m, hi, v2, e2));
    }
}

/// Integrates `f` over `(0, ∞)` for integrands with `|f(s)| ≲ C s^{near_zero - 1}`
/// as `s → 0` and `|f(s)| ≲ C s^{-decay - 1}` as `s → ∞` (`near_zero, decay > 0`).
///
/// Works in `u = ln s`. Each end is truncated once the analytic tail bound
/// `C s₀^{α}/α`, with `C` measured at the cut, is below `tail_tol`; the bounds are
/// added to the reported error.
pub fn integrate_half_line<T: Scalar, F: Fn(T) -> T>(
    f: F,
    near_zero: T,
    decay: T,
    tail_tol: T,
    rel_tol: T,
) -> Integral<T> {
    let g = |u: T| {
        let s = u.exp();
        f(s) * s
    };
    // Lower end: C = |f(s)| s^{1-α}, ∫_0^s Cσ^{α-1} = |f(s)| s/α.
    // Upper end: C = |f(s)| s^{β+1}, ∫_s^∞ Cσ^{-β-1} = |f(s)| s/β.
    let tail_bound = |s: T, exponent: T| f(s).abs() * s / exponent;
    let step = T::lit(4.0);
    let limit = T::lit(700.0).min(T::max_value().ln() - T::lit(2.0));
    let mut u_lo = -step;
    while tail_bound(u_lo.exp(), near_zero) > tail_tol && u_lo > -limit {
        u_lo = u_lo - step;
    }
    let mut u_hi = step;
    while tail_bound(u_hi.exp(), decay) > tail_tol && u_hi < limit {
        u_hi = u_hi + step;
    }
    let left = integrate_adaptive(g, u_lo, T::zero(), tail_tol, rel_tol, 2000);
    let right = integrate_adaptive(g, T::zero(), u_hi, tail_tol, rel_tol, 2000);
    let tails = tail_bound(u_lo.exp(), near_zero) + tail_bound(u_hi.exp(), decay);
    Integral {
        value: left.value + right.value,
        abs_error: left.abs_error + right.abs_error + tails,
    }
}

/// Composite panel layout in `t = -ln r` on `[0, t_max]`.
///
/// The first `graded_panels` panels cover `[0, graded_span]` geometrically
/// (ratio 2, refined toward `t = 0`, i.e. `r = 1`); the rest are uniform on
/// `[graded_span, t_max]`. Every base panel is cut into `split` equal pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scheme {
    pub panels: usize,
    pub order: usize,
    pub t_max: f64,
    pub graded_panels: usize,
    pub graded_span: f64,
    pub split: usize,
}

impl Default for Scheme {
    fn default() -> Self {
        Self { panels: 64, order: 16, t_max: 32.0, graded_panels: 16, graded_span: 1.0, split: 1 }
    }
}

impl Scheme {
    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(LabError::Config(d));
        if self.order < 2 || self.order > 64 {
            return bad(format!("quadrature order {} outside [2, 64]", self.order));
        }
        if self.panels <= self.graded_panels {
            return bad(format!(
                "panel count {} must exceed graded panel count {}",
                self.panels, self.graded_panels
            ));
        }
        if !(self.t_max >= 20.0 && self.t_max.is_finite()) {
            return bad(format!("t_max = {} must be finite and >= 20", self.t_max));
        }
        if !(self.graded_span > 0.0 && self.graded_span < self.t_max) {
            return bad(format!("graded span {} must lie in (0, t_max)", self.graded_span));
        }
        if self.split == 0 {
            return bad("split factor must be positive".into());
        }
        Ok(())
    }

    /// The same layout with every panel halved.
    pub fn refined(&self) -> Self {
        Self { split: self.split * 2, ..self.clone() }
    }

    /// Panel edges, strictly increasing from 0 to `t_max`.
    pub fn edges(&self) -> Vec<f64> {
        let mut base = vec![0.0];
        let g = self.graded_panels;
        for i in 1..=g {
            base.push(self.graded_span * 2f64.powi(i as i32 - g as i32));
        }
        let uniform = self.panels - g;
        let width = (self.t_max - self.graded_span) / uniform as f64;
        for i in 1..=uniform {
            base.push(if i == uniform { self.t_max } else { self.graded_span + width * i as f64 });
        }
        if self.split == 1 {
            return base;
        }
        let mut out = vec![0.0];
        for w in base.windows(2) {
            for s in 1..=self.split {
                out.push(if s == self.split {
                    w[1]
                } else {
                    w[0] + (w[1] - w[0]) * s as f64 / self.split as f64
                });
            }
        }
        out
    }

    /// Layout with panels additionally cut at the given breakpoints.
    pub fn layout(&self, breakpoints: &[f64]) -> Layout {
        let mut edges = self.edges();
        for &b in breakpoints {
            if !(b > 0.0 && b < self.t_max) {
                continue;
            }
            let pos = edges.partition_point(|&e| e < b);
            let near = |e: f64| (e - b).abs() <= 1e-13 * b.max(1.0);
            if near(edges[pos]) || (pos > 0 && near(edges[pos - 1])) {
                continue;
            }
            edges.insert(pos, b);
        }
        Layout::from_edges(edges, self.order)
    }
}

/// Concrete composite rule: panels, nodes and weights for `∫_0^{t_max} · dt`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub edges: Vec<f64>,
    pub rule: GaussLegendre<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Layout {
    pub fn from_edges(edges: Vec<f64>, order: usize) -> Self {
        let rule = GaussLegendre::<f64>::new(order);
        let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, wt) in rule.nodes().iter().zip(rule.weights()) {
                nodes.push(mid + half * x);
                weights.push(half * wt);
            }
        }
        Self { edges, rule, nodes, weights }
    }

    pub fn t_max(&self) -> f64 {
        *self.edges.last().expect("layout has edges")
    }

    pub fn panel_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    /// `Σ w_i y_i`.
    pub fn sum(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, y)| w * y).sum()
    }
}

/// Cumulative-integration operator on a [`Layout`].
#[derive(Debug, Clone)]
pub struct Cumulative {
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    half_widths: Vec<f64>,
    order: usize,
}

impl Cumulative {
    pub fn new(layout: &Layout) -> Self {
        Self {
            left: layout.rule.integration_matrix(true),
            right: layout.rule.integration_matrix(false),
            half_widths: layout.edges.windows(2).map(|w| 0.5 * (w[1] - w[0])).collect(),
            order: layout.order(),
        }
    }

    /// `∫_0^{t_i} y` at every node.
    pub fn from_left(&self, y: &[f64]) -> Vec<f64> {
        let n = self.order;
        let mut out = vec![0.0; y.len()];
        let mut base = 0.0;
        for (p, &h) in self.half_widths.iter().enumerate() {
            let ys = &y[p * n..(p + 1) * n];
            for i in 0..n {
                let s: f64 = self.left[i].iter().zip(ys).map(|(a, b)| a * b).sum();
                out[p * n + i] = base + h * s;
            }
            let total: f64 = (0..n).map(|i| self.left[n - 1][i] * ys[i] + self.right[n - 1][i] * ys[i]).sum();
            base += h * total;
        }
        out
    }

    /// `tail + ∫_{t_i}^{t_max} y` at every node, accumulated from the right so
    /// exponentially small values keep their relative precision.
    pub fn from_right(&self, y: &[f64], tail: f64) -> Vec<f64> {
        let n = self.order;
        let mut out = vec![0.0; y.len()];
        let mut base = tail;
        for p in (0..self.half_widths.len()).rev() {
            let h = self.half_widths[p];
            let ys = &y[p * n..(p + 1) * n];
            for i in 0..n {
                let s: f64 = self.right[i].iter().zip(ys).map(|(a, b)| a * b).sum();
                out[p * n + i] = base + h * s;
            }
            let total: f64 = (0..n).map(|i| self.left[0][i] * ys[i] + self.right[0][i] * ys[i]).sum();
            base += h * total;
        }
        out
    }

    /// `tail + ∫_0^{t_max} y`, accumulated from the right.
    pub fn total_from_right(&self, y: &[f64], tail: f64) -> f64 {
        let n = self.order;
        let mut base = tail;
        for p in (0..self.half_widths.len()).rev() {
            let ys = &y[p * n..(p + 1) * n];
            let total: f64 = (0..n).map(|i| self.left[0][i] * ys[i] + self.right[0][i] * ys[i]).sum();
            base += self.half_widths[p] * total;
        }
        base
    }
}
