//! Composite Simpson rules on arbitrary (sorted) sample grids.

/// Integral over `[lo, hi]` of the quadratic through three points.
pub fn quadratic_integral(x: [f64; 3], f: [f64; 3], lo: f64, hi: f64) -> f64 {
    // Newton form in t = x - lo
    let t0 = x[0] - lo;
    let t1 = x[1] - lo;
    let t2 = x[2] - lo;
    let d01 = (f[1] - f[0]) / (t1 - t0);
    let d12 = (f[2] - f[1]) / (t2 - t1);
    let d012 = (d12 - d01) / (t2 - t0);
    let l = hi - lo;
    let int_lin = l * l / 2.0 - t0 * l;
    let int_quad = l * l * l / 3.0 - (t0 + t1) * l * l / 2.0 + t0 * t1 * l;
    f[0] * l + d01 * int_lin + d012 * int_quad
}

/// Composite Simpson over the whole grid. An odd trailing interval is
/// closed with the quadratic through the last three points.
pub fn simpson(x: &[f64], f: &[f64]) -> f64 {
    assert_eq!(x.len(), f.len());
    let n = x.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * (x[1] - x[0]) * (f[0] + f[1]),
        _ => {
            let mut total = 0.0;
            let mut i = 0;
            while i + 2 < n {
                total += quadratic_integral(
                    [x[i], x[i + 1], x[i + 2]],
                    [f[i], f[i + 1], f[i + 2]],
                    x[i],
                    x[i + 2],
                );
                i += 2;
            }
            if i + 1 < n {
                total += quadratic_integral(
                    [x[n - 3], x[n - 2], x[n - 1]],
                    [f[n - 3], f[n - 2], f[n - 1]],
                    x[n - 2],
                    x[n - 1],
                );
            }
            total
        }
    }
}

/// Running integral `∫_{x_0}^{x_i} f` at every grid point.
pub fn cumulative_simpson(x: &[f64], f: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), f.len());
    let n = x.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * (x[1] - x[0]) * (f[0] + f[1]);
        return out;
    }
    for i in 1..n {
        if i % 2 == 0 {
            out[i] = out[i - 2]
                + quadratic_integral(
                    [x[i - 2], x[i - 1], x[i]],
                    [f[i - 2], f[i - 1], f[i]],
                    x[i - 2],
                    x[i],
                );
        } else {
            let (a, b, c) = if i + 1 < n {
                (i - 1, i, i + 1)
            } else {
                (i - 2, i - 1, i)
            };
            out[i] = out[i - 1]
                + quadratic_integral([x[a], x[b], x[c]], [f[a], f[b], f[c]], x[i - 1], x[i]);
        }
    }
    out
}
