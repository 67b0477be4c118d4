//! Small fitting helpers for width-refinement studies.

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), (x, y)| {
        (n + (x - mx) * (y - my), d + (x - mx) * (x - mx))
    });
    num / den
}

/// Fitted power `p` in `|value| ~ width^p` (log-log least squares).
/// Zero values make the fit undefined and give NaN.
pub fn fitted_order(widths: &[f64], values: &[f64]) -> f64 {
    if values.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return f64::NAN;
    }
    let pts: Vec<(f64, f64)> = widths
        .iter()
        .zip(values)
        .map(|(w, v)| (w.ln(), v.abs().ln()))
        .collect();
    least_squares_slope(&pts)
}

/// Two-level Richardson extrapolation to zero width for three widths halving
/// each time, assuming an expansion in even powers `δ², δ⁴, …`.
pub fn richardson_even(values: [f64; 3]) -> f64 {
    let [coarse, mid, fine] = values;
    let r1 = (4.0 * mid - coarse) / 3.0;
    let r2 = (4.0 * fine - mid) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// True when `|values|` strictly decreases along the sequence.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1].abs() < w[0].abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        assert!((least_squares_slope(&pts) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn richardson_removes_two_even_terms() {
        let f = |d: f64| 0.25 + 2.0 * d * d - 0.5 * d.powi(4);
        let v = [f(0.8), f(0.4), f(0.2)];
        assert!((richardson_even(v) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn order_of_quadratic() {
        let w = [0.8, 0.4, 0.2];
        let v: Vec<f64> = w.iter().map(|d| 3.0 * d * d).collect();
        assert!((fitted_order(&w, &v) - 2.0).abs() < 1e-12);
        assert!(fitted_order(&w, &[1.0, 0.0, 1.0]).is_nan());
    }
}
