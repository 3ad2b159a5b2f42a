//! Piecewise cubic Hermite interpolation on strictly increasing nodes.

/// Fritsch–Carlson monotone slopes (PCHIP) for data `(x_i, y_i)`.
pub fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    debug_assert_eq!(n, y.len());
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Slopes of the parabola through each node and its two neighbours
/// (one-sided parabolas at the ends). Not shape preserving.
pub fn bessel_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 3 {
        return pchip_slopes(x, y);
    }
    let para = |i0: usize, at: usize| {
        let (x0, x1, x2) = (x[i0], x[i0 + 1], x[i0 + 2]);
        let (y0, y1, y2) = (y[i0], y[i0 + 1], y[i0 + 2]);
        let t = x[at];
        y0 * (2.0 * t - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * t - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * t - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|i| match i {
            0 => para(0, 0),
            _ if i == n - 1 => para(n - 3, n - 1),
            _ => para(i - 1, i),
        })
        .collect()
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

/// Clips slopes so the Hermite interpolant of monotone data stays monotone.
pub fn limit_monotone(x: &[f64], y: &[f64], d: &mut [f64]) {
    for i in 0..x.len().saturating_sub(1) {
        let delta = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        if delta == 0.0 {
            d[i] = 0.0;
            d[i + 1] = 0.0;
            continue;
        }
        let (a, b) = (d[i] / delta, d[i + 1] / delta);
        if a < 0.0 {
            d[i] = 0.0;
        }
        if b < 0.0 {
            d[i + 1] = 0.0;
        }
        let (a, b) = (d[i] / delta, d[i + 1] / delta);
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            d[i] = tau * a * delta;
            d[i + 1] = tau * b * delta;
        }
    }
}

/// Index `i` with `x[i] <= t <= x[i + 1]`, clamped to the node range.
pub fn locate(x: &[f64], t: f64) -> usize {
    let p = x.partition_point(|&e| e <= t);
    p.saturating_sub(1).min(x.len().saturating_sub(2))
}

/// Value and derivative of the cubic Hermite interpolant at `t`.
pub fn hermite(x: &[f64], y: &[f64], d: &[f64], t: f64) -> (f64, f64) {
    if x.len() == 1 {
        return (y[0], 0.0);
    }
    let i = locate(x, t);
    let h = x[i + 1] - x[i];
    let s = (t - x[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1];
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    let deriv = dh00 * y[i] + dh10 * d[i] + dh01 * y[i + 1] + dh11 * d[i + 1];
    (value, deriv)
}
