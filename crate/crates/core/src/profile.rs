//! Radial profiles `v` on `(0, 1]` and the geometry of the weighted space.
//!
//! Everything is parametrized by `t = −ln r`; `slope` means `dv/dt` and
//! `curvature` means `d²v/dt²`. The radial derivative is `v′(r) = −slope / r`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::interp;
use crate::model::DimensionParams;
use crate::quadrature::{Layout, Scheme};

/// A radial function with `v(1) = 0`, evaluated in `t = −ln r`.
pub trait RadialProfile: Send + Sync + fmt::Debug {
    fn value_t(&self, t: f64) -> f64;

    /// `dv/dt`.
    fn slope_t(&self, t: f64) -> f64;

    /// `d²v/dt²` when available in closed form or from stored data.
    fn curvature_t(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Points in `t` where the profile is not smooth; panels are cut there.
    fn breakpoints_t(&self) -> Vec<f64> {
        Vec::new()
    }

    fn label(&self) -> String;

    /// Values and slopes at the nodes of `layout`.
    fn sample(&self, layout: &Layout) -> Samples {
        let v = layout.nodes.iter().map(|&t| self.value_t(t)).collect();
        let s = layout.nodes.iter().map(|&t| self.slope_t(t)).collect();
        Samples { v, s, v_end: self.value_t(layout.t_max()) }
    }

    fn value(&self, r: f64) -> f64 {
        self.value_t(-r.ln())
    }

    /// `v′(r)`.
    fn derivative(&self, r: f64) -> f64 {
        -self.slope_t(-r.ln()) / r
    }
}

/// Shared handle to a profile.
pub type Profile = Arc<dyn RadialProfile>;

/// Node samples of a profile on a layout; `v_end` is the value at `t_max`,
/// which is held constant beyond it.
#[derive(Debug, Clone)]
pub struct Samples {
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub v_end: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroProfile;

impl RadialProfile for ZeroProfile {
    fn value_t(&self, _t: f64) -> f64 {
        0.0
    }
    fn slope_t(&self, _t: f64) -> f64 {
        0.0
    }
    fn curvature_t(&self, _t: f64) -> Option<f64> {
        Some(0.0)
    }
    fn label(&self) -> String {
        "zero".into()
    }
}

/// `v(r) = 1 − r`.
#[derive(Debug, Clone, Copy)]
pub struct LinearProfile;

impl RadialProfile for LinearProfile {
    fn value_t(&self, t: f64) -> f64 {
        -(-t).exp_m1()
    }
    fn slope_t(&self, t: f64) -> f64 {
        (-t).exp()
    }
    fn curvature_t(&self, t: f64) -> Option<f64> {
        Some(-(-t).exp())
    }
    fn label(&self) -> String {
        "linear".into()
    }
}

/// `v(r) = (1 − r²)/2`, whose lift has identity Hessian.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticProfile;

impl RadialProfile for QuadraticProfile {
    fn value_t(&self, t: f64) -> f64 {
        -0.5 * (-2.0 * t).exp_m1()
    }
    fn slope_t(&self, t: f64) -> f64 {
        (-2.0 * t).exp()
    }
    fn curvature_t(&self, t: f64) -> Option<f64> {
        Some(-2.0 * (-2.0 * t).exp())
    }
    fn label(&self) -> String {
        "quadratic".into()
    }
}

/// Pointwise multiple `factor · v`.
#[derive(Debug, Clone)]
pub struct Scaled {
    pub inner: Profile,
    pub factor: f64,
}

impl RadialProfile for Scaled {
    fn value_t(&self, t: f64) -> f64 {
        self.factor * self.inner.value_t(t)
    }
    fn slope_t(&self, t: f64) -> f64 {
        self.factor * self.inner.slope_t(t)
    }
    fn curvature_t(&self, t: f64) -> Option<f64> {
        self.inner.curvature_t(t).map(|c| self.factor * c)
    }
    fn breakpoints_t(&self) -> Vec<f64> {
        self.inner.breakpoints_t()
    }
    fn label(&self) -> String {
        format!("{}*{}", self.factor, self.inner.label())
    }
    fn sample(&self, layout: &Layout) -> Samples {
        let mut s = self.inner.sample(layout);
        s.v.iter_mut().for_each(|x| *x *= self.factor);
        s.s.iter_mut().for_each(|x| *x *= self.factor);
        s.v_end *= self.factor;
        s
    }
}

/// A profile reported under a different label.
#[derive(Debug, Clone)]
pub struct Named {
    pub inner: Profile,
    pub name: String,
}

impl RadialProfile for Named {
    fn value_t(&self, t: f64) -> f64 {
        self.inner.value_t(t)
    }
    fn slope_t(&self, t: f64) -> f64 {
        self.inner.slope_t(t)
    }
    fn curvature_t(&self, t: f64) -> Option<f64> {
        self.inner.curvature_t(t)
    }
    fn breakpoints_t(&self) -> Vec<f64> {
        self.inner.breakpoints_t()
    }
    fn label(&self) -> String {
        self.name.clone()
    }
    fn sample(&self, layout: &Layout) -> Samples {
        self.inner.sample(layout)
    }
}

pub fn scale(v: &Profile, factor: f64) -> Profile {
    if factor == 0.0 {
        return Arc::new(ZeroProfile);
    }
    Arc::new(Scaled { inner: Arc::clone(v), factor })
}

/// Profile stored on nodes `0 = t_0 < … < t_m` with values, slopes and
/// optional curvatures; constant beyond the last node.
#[derive(Debug, Clone)]
pub struct GridProfile {
    t: Vec<f64>,
    v: Vec<f64>,
    s: Vec<f64>,
    curvature: Option<Vec<f64>>,
    slope_knots: Vec<f64>,
    value_knots: Vec<f64>,
}

impl GridProfile {
    pub fn new(t: Vec<f64>, v: Vec<f64>, s: Vec<f64>, curvature: Option<Vec<f64>>) -> Result<Self> {
        let n = t.len();
        if n < 4 || v.len() != n || s.len() != n || curvature.as_ref().is_some_and(|c| c.len() != n) {
            return Err(LabError::precondition("grid profile", "need at least 4 nodes with matching columns"));
        }
        if t[0] != 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::precondition("grid profile", "nodes must increase strictly from t = 0"));
        }
        if v[0].abs() > 1e-10 {
            return Err(LabError::precondition("grid profile", format!("v(1) = {} must vanish", v[0])));
        }
        if t[n - 1] < 20.0 {
            return Err(LabError::precondition("grid profile", format!("nodes end at t = {} < 20", t[n - 1])));
        }
        for i in 0..n {
            if !v[i].is_finite() {
                return Err(LabError::NonFinite { quantity: "value", t: t[i], r: (-t[i]).exp() });
            }
            if !s[i].is_finite() {
                return Err(LabError::NonFinite { quantity: "slope", t: t[i], r: (-t[i]).exp() });
            }
        }
        let slope_knots = match &curvature {
            Some(c) => c.clone(),
            None => interp::bessel_slopes(&t, &s),
        };
        let mut value_knots = s.clone();
        let monotone = v.windows(2).all(|w| w[1] >= w[0]) || v.windows(2).all(|w| w[1] <= w[0]);
        if monotone {
            interp::limit_monotone(&t, &v, &mut value_knots);
        }
        Ok(Self { t, v, s, curvature, slope_knots, value_knots })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn slopes(&self) -> &[f64] {
        &self.s
    }

    pub fn curvatures(&self) -> Option<&[f64]> {
        self.curvature.as_deref()
    }

    fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Writes columns `r,t,v,slope` with `slope = dv/dr`, plus `d2v_dr2` when
    /// curvatures are stored.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| csv_io(path, e))?;
        let mut header = vec!["r", "t", "v", "slope"];
        if self.curvature.is_some() {
            header.push("d2v_dr2");
        }
        w.write_record(&header)?;
        for i in 0..self.t.len() {
            let r = (-self.t[i]).exp();
            let mut row = vec![fmt_float(r), fmt_float(self.t[i]), fmt_float(self.v[i]), fmt_float(-self.s[i] / r)];
            if let Some(c) = &self.curvature {
                row.push(fmt_float((c[i] + self.s[i]) / (r * r)));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| LabError::io(path, e))?;
        Ok(())
    }

    /// Reads the format written by [`GridProfile::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
        let headers = rd.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| LabError::Config(format!("{}: missing column '{name}'", path.display())))
        };
        let (ct, cv, cs) = (col("t")?, col("v")?, col("slope")?);
        let cc = col("d2v_dr2").ok();
        let (mut t, mut v, mut s, mut curv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|x| x.trim().parse::<f64>().ok())
                    .ok_or_else(|| LabError::Config(format!("{}: bad number in row {}", path.display(), t.len() + 1)))
            };
            let (ti, vi, di) = (num(ct)?, num(cv)?, num(cs)?);
            let r = (-ti).exp();
            if let Some(c) = cc {
                // d²v/dt² = r² v″ − dv/dt
                curv.push(r * r * num(c)? + di * r);
            }
            t.push(ti);
            v.push(vi);
            s.push(-di * r);
        }
        GridProfile::new(t, v, s, cc.map(|_| curv))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> LabError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => LabError::io(path, io),
        other => LabError::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Deterministic float text: shortest round-trip representation.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:e}")
    }
}

impl RadialProfile for GridProfile {
    fn value_t(&self, t: f64) -> f64 {
        if t >= self.t_end() {
            return *self.v.last().unwrap();
        }
        interp::hermite(&self.t, &self.v, &self.value_knots, t.max(0.0)).0
    }

    fn slope_t(&self, t: f64) -> f64 {
        if t > self.t_end() {
            return 0.0;
        }
        interp::hermite(&self.t, &self.s, &self.slope_knots, t.max(0.0)).0
    }

    fn curvature_t(&self, t: f64) -> Option<f64> {
        if t > self.t_end() {
            return Some(0.0);
        }
        Some(interp::hermite(&self.t, &self.s, &self.slope_knots, t.max(0.0)).1)
    }

    fn label(&self) -> String {
        format!("grid({} nodes)", self.t.len())
    }

    fn sample(&self, layout: &Layout) -> Samples {
        let m = self.t.len();
        // fast path: interior nodes coincide with the layout nodes
        if m == layout.nodes.len() + 2 && self.t[1..m - 1] == layout.nodes[..] && self.t_end() == layout.t_max() {
            return Samples { v: self.v[1..m - 1].to_vec(), s: self.s[1..m - 1].to_vec(), v_end: self.v[m - 1] };
        }
        let v = layout.nodes.iter().map(|&t| self.value_t(t)).collect();
        let s = layout.nodes.iter().map(|&t| self.slope_t(t)).collect();
        Samples { v, s, v_end: self.value_t(layout.t_max()) }
    }
}

/// Layout of `scheme` cut at the profile's breakpoints and the given extras.
pub fn layout_for(v: &dyn RadialProfile, scheme: &Scheme, extra: &[f64]) -> Layout {
    let mut b = v.breakpoints_t();
    b.extend_from_slice(extra);
    scheme.layout(&b)
}

/// `(c_N ∫_0^∞ |dv/dt|^{k+1} dt)^{1/(k+1)}` on `layout`.
pub fn x1_norm_on(v: &dyn RadialProfile, params: &DimensionParams, layout: &Layout) -> Result<f64> {
    let s = v.sample(layout);
    for (i, &x) in s.s.iter().enumerate() {
        if !x.is_finite() {
            let t = layout.nodes[i];
            return Err(LabError::NonFinite { quantity: "derivative", t, r: (-t).exp() });
        }
    }
    let p = params.k as i32 + 1;
    let integral: f64 = layout.weights.iter().zip(&s.s).map(|(w, x)| w * x.abs().powi(p)).sum();
    Ok((params.c_n * integral).powf(1.0 / p as f64))
}

/// X₁ norm with the layout derived from `scheme` and the profile's breakpoints.
pub fn x1_norm(v: &dyn RadialProfile, params: &DimensionParams, scheme: &Scheme) -> Result<f64> {
    x1_norm_on(v, params, &layout_for(v, scheme, &[]))
}

/// Profile divided by its norm.
pub fn normalized(v: &Profile, params: &DimensionParams, scheme: &Scheme) -> Result<Profile> {
    let n = x1_norm(v.as_ref(), params, scheme)?;
    if n == 0.0 {
        return Err(LabError::ZeroProfile);
    }
    Ok(scale(v, 1.0 / n))
}

/// `‖v‖ (N t / μ_N)^{N/(N+2)} − |v(t)|`: nonnegative wherever the pointwise
/// radial estimate holds.
pub fn radial_bound_slack(v: &dyn RadialProfile, norm: f64, params: &DimensionParams, t: f64) -> f64 {
    let nf = params.nf();
    norm * (nf * t / params.mu_n).powf(nf / (nf + 2.0)) - v.value_t(t).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialBoundReport {
    pub norm: f64,
    pub min_slack: f64,
    pub worst_t: f64,
    pub worst_r: f64,
    pub holds: bool,
}

/// Scans the radial estimate over the quadrature nodes and panel edges.
pub fn radial_bound_check(v: &dyn RadialProfile, params: &DimensionParams, scheme: &Scheme, tol: f64) -> Result<RadialBoundReport> {
    let layout = layout_for(v, scheme, &[]);
    let norm = x1_norm_on(v, params, &layout)?;
    let mut worst = (f64::INFINITY, 0.0);
    for &t in layout.nodes.iter().chain(layout.edges.iter()) {
        let slack = radial_bound_slack(v, norm, params, t);
        if slack < worst.0 {
            worst = (slack, t);
        }
    }
    Ok(RadialBoundReport { norm, min_slack: worst.0, worst_t: worst.1, worst_r: (-worst.1).exp(), holds: worst.0 >= -tol })
}
