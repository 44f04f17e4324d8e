//! Scalar root finding, quadrature and differencing shared by the solvers.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Shareable real function of one variable.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Wraps a closure as a [`RealFn`].
pub fn real_fn<F>(f: F) -> RealFn
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

pub const INVERSION_MAX_ITER: usize = 80;
pub const INVERSION_TOL: f64 = 1e-12;

/// Solves `f(x) = target` for monotone `f` on `[lo, hi]`.
///
/// Newton steps are taken from the current iterate and rejected in favour of
/// bisection whenever they leave the bracket. Fails with `InversionFailure`
/// when the target is not bracketed or the residual does not fall below
/// `tol·(1 + |target|)` in `max_iter` iterations.
pub fn invert_monotone(
    f: &dyn Fn(f64) -> f64,
    f_prime: &dyn Fn(f64) -> f64,
    target: f64,
    lo: f64,
    hi: f64,
    max_iter: usize,
    tol: f64,
) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let ra = f(a) - target;
    let rb = f(b) - target;
    let scale = 1.0 + target.abs();
    if ra.abs() <= tol * scale {
        return Ok(a);
    }
    if rb.abs() <= tol * scale {
        return Ok(b);
    }
    if !(ra.signum() != rb.signum()) || !ra.is_finite() || !rb.is_finite() {
        return Err(Error::InversionFailure {
            target,
            residual: ra.abs().min(rb.abs()),
        });
    }
    let increasing = rb > 0.0;
    let mut x = 0.5 * (a + b);
    let mut best = (f64::INFINITY, x);
    for _ in 0..max_iter {
        let r = f(x) - target;
        if r.abs() < best.0 {
            best = (r.abs(), x);
        }
        if r.abs() <= tol * scale {
            return Ok(polish(f, f_prime, target, x, a, b));
        }
        if (r > 0.0) == increasing {
            b = x;
        } else {
            a = x;
        }
        if b - a <= f64::EPSILON * scale.max(b.abs()) {
            break;
        }
        let d = f_prime(x);
        let newton = x - r / d;
        x = if d.is_finite() && d != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    let r = (f(x) - target).abs();
    if r < best.0 {
        best = (r, x);
    }
    // the bracket collapsed onto the root to machine precision
    if b - a <= 4.0 * f64::EPSILON * scale.max(b.abs()) && best.0 <= 1e-9 * scale {
        return Ok(best.1);
    }
    Err(Error::InversionFailure {
        target,
        residual: best.0,
    })
}

/// One extra Newton step, kept only if it stays in the bracket and does not
/// increase the residual.
fn polish(f: &dyn Fn(f64) -> f64, f_prime: &dyn Fn(f64) -> f64, target: f64, x: f64, a: f64, b: f64) -> f64 {
    let r = f(x) - target;
    let d = f_prime(x);
    if r == 0.0 || !(d.is_finite() && d != 0.0) {
        return x;
    }
    let y = x - r / d;
    if y >= a && y <= b && (f(y) - target).abs() <= r.abs() {
        y
    } else {
        x
    }
}

pub const SIMPSON_MAX_DEPTH: u32 = 20;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
        .ok_or(Error::QuadratureFailure { a, b })
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return None;
    }
    // absolute tolerance, floored at round-off of the partial sums
    if delta.abs() <= 15.0 * tol.max(64.0 * f64::EPSILON * (left.abs() + right.abs())) {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let l = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Some(l + r)
}

/// Second-order central difference.
pub fn central_difference(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `n + 1` equally spaced points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let h = (hi - lo) / n as f64;
    (0..=n).map(move |i| if i == n { hi } else { lo + h * i as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverts_square_root() {
        let x = invert_monotone(&|x| x * x, &|x| 2.0 * x, 4.0, 0.5, 3.0, 80, 1e-12).unwrap();
        assert_relative_eq!(x, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn inverts_decreasing_function() {
        let x = invert_monotone(&|x| -x.powi(3), &|x| -3.0 * x * x, -8.0, 1.0, 3.0, 80, 1e-12)
            .unwrap();
        assert_relative_eq!(x, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn unbracketed_target_fails() {
        let r = invert_monotone(&|x| x, &|_| 1.0, 10.0, 0.0, 1.0, 80, 1e-12);
        assert!(matches!(r, Err(Error::InversionFailure { .. })));
    }

    #[test]
    fn bad_derivative_falls_back_to_bisection() {
        let x = invert_monotone(&|x| x.powi(3), &|_| 1e-30, 27.0, 0.0, 10.0, 80, 1e-12).unwrap();
        assert_relative_eq!(x, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn simpson_integrates_cubic_and_exp() {
        let v = adaptive_simpson(&|x| 4.0 * x * x, 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, 4.0 / 3.0, max_relative = 1e-12);
        let v = adaptive_simpson(&f64::exp, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(v, 2f64.exp() - 1.0, max_relative = 1e-11);
        assert_eq!(adaptive_simpson(&f64::exp, 1.0, 1.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn simpson_reports_failure_on_singularity() {
        let r = adaptive_simpson(&|x: f64| 1.0 / x.abs().sqrt(), -1.0, 1.0, 1e-14);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
