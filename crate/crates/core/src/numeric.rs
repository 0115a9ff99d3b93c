//! Quadrature and small numeric helpers.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 50;

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    // Split first so that narrow features away from the midpoint are not missed.
    let pieces = 16;
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let lo = a + h * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + h };
        let fa = f(lo);
        let fb = f(hi);
        let m = 0.5 * (lo + hi);
        let fm = f(m);
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_rec(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, MAX_DEPTH)?;
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Quadrature(format!("non-finite integral on [{a}, {b}]")))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol || (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
        return Ok(left + right + diff / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!("depth exhausted near [{a}, {b}]")));
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

/// Iterated adaptive Simpson over the square `[a, b]²`.
pub fn adaptive_simpson_2d<F: Fn(f64, f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let width = (b - a).abs().max(1e-300);
    let inner_tol = tol / (2.0 * width);
    let err = std::cell::Cell::new(None);
    let outer = |x: f64| match adaptive_simpson(&|y| f(x, y), a, b, inner_tol) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(e.to_string()));
            f64::NAN
        }
    };
    let v = adaptive_simpson(&outer, a, b, tol / 2.0);
    if let Some(e) = err.take() {
        return Err(Error::Quadrature(e));
    }
    v
}

/// Standard normal upper-tail two-sided p-value for a z-score.
pub fn two_sided_p(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * n.sf(z.abs())
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Sample variance with a delta-method standard error, `sqrt((m4 - s^4) / n)`.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (0.0, 0.0);
    }
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (v, ((m4 - v * v).max(0.0) / n).sqrt())
}

/// Least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomials_and_exp() {
        let v = adaptive_simpson(&|x: f64| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-10);
        let v = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn simpson_narrow_bump() {
        let s = 0.01;
        let f = |x: f64| (-(x - 0.37).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let v = adaptive_simpson(&f, 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn simpson_2d_product() {
        let v = adaptive_simpson_2d(&|x, y| x * y, 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 0.25).abs() < 1e-9);
    }

    #[test]
    fn p_values() {
        assert!((two_sided_p(0.0) - 1.0).abs() < 1e-12);
        assert!((two_sided_p(1.959964) - 0.05).abs() < 1e-5);
    }
}
