//! Adaptive Simpson quadrature and the regularized incomplete beta function.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default absolute tolerance.
pub const SIMPSON_TOL: f64 = 1e-10;
/// Maximum number of interval subdivisions.
pub const MAX_SUBDIVISIONS: usize = 1_000_000;
const MAX_DEPTH: u32 = 60;

struct Panel<T> {
    a: T,
    m: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Uses an explicit stack; fails if more than [`MAX_SUBDIVISIONS`] subdivisions are needed.
pub fn adaptive_simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    if b < a {
        return adaptive_simpson(f, b, a, tol).map(|v| -v);
    }
    let six = T::lit(6.0);
    let fifteen = T::lit(15.0);
    let half = T::lit(0.5);
    let tol = T::tol_floor(tol, 16.0);

    let m = (a + b) * half;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / six * (fa + T::lit(4.0) * fm + fb);
    let mut stack = vec![Panel { a, m, b, fa, fm, fb, whole, tol, depth: 0 }];
    let mut total = T::zero();
    let mut subdivisions = 0usize;

    while let Some(p) = stack.pop() {
        let lm = (p.a + p.m) * half;
        let rm = (p.m + p.b) * half;
        let flm = f(lm);
        let frm = f(rm);
        let left = (p.m - p.a) / six * (p.fa + T::lit(4.0) * flm + p.fm);
        let right = (p.b - p.m) / six * (p.fm + T::lit(4.0) * frm + p.fb);
        let delta = left + right - p.whole;
        if p.depth >= MAX_DEPTH || delta.abs() <= fifteen * p.tol {
            total = total + left + right + delta / fifteen;
            continue;
        }
        subdivisions += 1;
        if subdivisions > MAX_SUBDIVISIONS {
            return Err(Error::SearchFailed(format!(
                "adaptive Simpson exceeded {MAX_SUBDIVISIONS} subdivisions on [{a}, {b}]"
            )));
        }
        let tol = p.tol * half;
        stack.push(Panel { a: p.m, m: rm, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right, tol, depth: p.depth + 1 });
        stack.push(Panel { a: p.a, m: lm, b: p.m, fa: p.fa, fm: flm, fb: p.fm, whole: left, tol, depth: p.depth + 1 });
    }
    Ok(total)
}

/// `∫_0^x t^{p−1} (1−t)^{q−1} dt` via `t = u²`, which is bounded for `p ≥ ½`.
fn partial_beta<T: Real>(x: T, p: T, q: T, tol: T) -> Result<T> {
    let two = T::lit(2.0);
    adaptive_simpson(
        |u: T| {
            let t = u * u;
            let head = if p == T::lit(0.5) { T::one() } else { u.powf(two * p - T::one()) };
            two * head * (T::one() - t).powf(q - T::one())
        },
        T::zero(),
        x.sqrt(),
        tol,
    )
}

/// Regularized incomplete beta `I_x(a, b)` by quadrature of the beta density.
///
/// Requires `a, b ≥ ½` and `x ∈ [0, 1]`.
pub fn regularized_incomplete_beta<T: Real>(x: T, a: T, b: T) -> Result<T> {
    let half = T::lit(0.5);
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    if a < half || b < half {
        return Err(Error::InvalidArgument(format!("shape parameters ({a}, {b}) must be at least 1/2")));
    }
    let tol = T::lit(1e-13);
    let lower = partial_beta(x, a, b, tol)?;
    let upper = partial_beta(T::one() - x, b, a, tol)?;
    Ok(lower / (lower + upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = adaptive_simpson(f64::sin, 0.0, 1.0, 1e-12).unwrap();
        let b = adaptive_simpson(f64::sin, 1.0, 0.0, 1e-12).unwrap();
        assert_abs_diff_eq!(a, -b, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 1.0 - 1f64.cos(), epsilon = 1e-11);
    }

    #[test]
    fn rational_profile_integral() {
        // antiderivative r/(1+r²)
        let g = |r: f64| (1.0 - r * r) / ((1.0 + r * r) * (1.0 + r * r));
        for d in 3..=8 {
            let top = ((d - 1) as f64).sqrt();
            let v = adaptive_simpson(g, 0.0, top, SIMPSON_TOL).unwrap();
            assert_abs_diff_eq!(v, top / d as f64, epsilon = 1e-8);
        }
    }

    #[test]
    fn kinked_integrand() {
        let v = adaptive_simpson(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 0.5 * 0.09 + 0.5 * 0.49, epsilon = 1e-11);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, b) = 1 − (1 − x)^b
        for &(x, b) in &[(0.5, 0.5), (0.2, 2.0), (0.9, 1.5)] {
            let v = regularized_incomplete_beta(x, 1.0f64, b).unwrap();
            assert_abs_diff_eq!(v, 1.0 - (1.0f64 - x).powf(b), epsilon = 1e-10);
        }
        // I_x(a, 1) = x^a
        let v = regularized_incomplete_beta(0.3, 2.5f64, 1.0).unwrap();
        assert_abs_diff_eq!(v, 0.3f64.powf(2.5), epsilon = 1e-10);
        // symmetry I_x(a,b) = 1 − I_{1−x}(b,a)
        let p = regularized_incomplete_beta(0.35, 3.0f64, 0.5).unwrap();
        let q = regularized_incomplete_beta(0.65, 0.5f64, 3.0).unwrap();
        assert_abs_diff_eq!(p, 1.0 - q, epsilon = 1e-12);
        assert!(regularized_incomplete_beta(1.5, 1.0f64, 1.0).is_err());
        assert!(regularized_incomplete_beta(0.5, 0.2f64, 1.0).is_err());
    }
}
