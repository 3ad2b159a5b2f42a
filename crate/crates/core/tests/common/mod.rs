#![allow(dead_code)]

use khtm_core::profile::RadialProfile;

/// Composite Simpson rule with `n` (even) subintervals.
pub fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Sphere area by the recursion ω_{N} = 2π ω_{N−2}/(N−2), seeded at 2π and 4π.
pub fn sphere_area(n: u32) -> f64 {
    use std::f64::consts::PI;
    match n {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI * sphere_area(n - 2) / (n - 2) as f64,
    }
}

pub fn choose(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `v(r) = Σ a_i (1 − r^{m_i})`, smooth and k-admissible for `a_i ≥ 0`.
#[derive(Debug, Clone)]
pub struct PowerSum {
    pub terms: Vec<(f64, f64)>,
}

impl RadialProfile for PowerSum {
    fn value_t(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(a, m)| -a * (-m * t).exp_m1()).sum()
    }
    fn slope_t(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(a, m)| a * m * (-m * t).exp()).sum()
    }
    fn curvature_t(&self, t: f64) -> Option<f64> {
        Some(self.terms.iter().map(|&(a, m)| -a * m * m * (-m * t).exp()).sum())
    }
    fn label(&self) -> String {
        "power-sum".into()
    }
}

impl PowerSum {
    /// `v′(r)` and `v″(r)` in closed form.
    pub fn dr(&self, r: f64) -> (f64, f64) {
        let d1 = self.terms.iter().map(|&(a, m)| -a * m * r.powf(m - 1.0)).sum();
        let d2 = self.terms.iter().map(|&(a, m)| -a * m * (m - 1.0) * r.powf(m - 2.0)).sum();
        (d1, d2)
    }
}
