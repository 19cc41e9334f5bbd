//! The radial profile `h → H → ψ` behind the recurrence Lyapunov function.
//!
//! `h` follows the parabola `r²/(4ε₀²)` from the origin and is blended into
//! `g(r) = (1−r²)/(1+r²)²` over a window of width `ε₀/4` ending where the two
//! curves meet; past that point `h = g`. Then
//!
//! ```text
//! H(r) = ∫₀^r h,   b = H(√(d−1)),   ψ(r) = ∫_r^{√(d−1)} (H(v)/v² − c·v) dv,   c = b / (3 (d−1)^{3/2})
//! ```
//!
//! so that `r²ψ′(r) = c·r³ − H(r)`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, SIMPSON_TOL};

/// Default knot count.
pub const DEFAULT_KNOTS: usize = 4096;

/// `(1−r²)/(1+r²)²`.
#[inline]
pub fn target_curve(r: f64) -> f64 {
    let q = 1.0 + r * r;
    (1.0 - r * r) / (q * q)
}

#[derive(Clone, Debug, Serialize)]
pub struct RadialProfile {
    pub d: usize,
    pub eps0: f64,
    /// `H(√(d−1))`.
    pub b: f64,
    /// Where the parabola meets the target curve.
    pub r_star: f64,
    /// `√(d−1)`.
    pub top: f64,
    /// `max ψ′` on `[1, √(d−1)]`, negated.
    pub delta0: f64,
    #[serde(skip)]
    shape: Shape,
    step: f64,
    knots: Vec<f64>,
    big_h: Vec<f64>,
    psi: Vec<f64>,
    dpsi: Vec<f64>,
}

/// Blend shape: parabola, then smoothstep into the target curve.
#[derive(Clone, Copy, Debug)]
struct Shape {
    inv_4eps2: f64,
    lo: f64,
    hi: f64,
}

impl Shape {
    fn new(eps0: f64) -> Self {
        let inv_4eps2 = 1.0 / (4.0 * eps0 * eps0);
        let gap = |r: f64| r * r * inv_4eps2 - target_curve(r);
        // gap < 0 near 0 and gap(1) > 0
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        let r_star = 0.5 * (lo + hi);
        Self { inv_4eps2, lo: (r_star - eps0 / 4.0).max(0.0), hi: r_star }
    }

    fn h(&self, r: f64) -> f64 {
        let p = r * r * self.inv_4eps2;
        if r <= self.lo {
            p
        } else if r >= self.hi {
            target_curve(r)
        } else {
            let t = (r - self.lo) / (self.hi - self.lo);
            let s = t * t * (3.0 - 2.0 * t);
            (1.0 - s) * p + s * target_curve(r)
        }
    }
}

impl RadialProfile {
    /// Tabulates the profile on `knots` uniform intervals and validates it.
    pub fn build(d: usize, eps0: f64, knots: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidArgument(format!("radial profile needs d >= 3, got {d}")));
        }
        if !(eps0 > 0.0 && eps0 < 0.5) {
            return Err(Error::InvalidArgument(format!("eps0 must lie in (0, 0.5), got {eps0}")));
        }
        if knots < 8 {
            return Err(Error::InvalidArgument(format!("need at least 8 knots, got {knots}")));
        }
        let shape = Shape::new(eps0);
        let top = ((d - 1) as f64).sqrt();
        let step = top / knots as f64;
        let grid: Vec<f64> = (0..=knots).map(|k| if k == knots { top } else { k as f64 * step }).collect();
        let piece_tol = SIMPSON_TOL / knots as f64;
        let h = |r: f64| shape.h(r);

        let mut big_h = vec![0.0; knots + 1];
        for k in 0..knots {
            big_h[k + 1] = big_h[k] + adaptive_simpson(h, grid[k], grid[k + 1], piece_tol)?;
        }
        let b = big_h[knots];
        let c = b / (3.0 * ((d - 1) as f64).powf(1.5));

        let mut psi = vec![0.0; knots + 1];
        for k in (0..knots).rev() {
            let (rk, hk) = (grid[k], big_h[k]);
            let integrand = |v: f64| {
                if v <= 0.0 {
                    return 0.0;
                }
                let hv = hk + adaptive_simpson(h, rk, v, piece_tol).unwrap_or(f64::NAN);
                hv / (v * v) - c * v
            };
            let piece = adaptive_simpson(integrand, rk, grid[k + 1], piece_tol)?;
            if piece.is_nan() {
                return Err(Error::SearchFailed(format!("inner quadrature failed on [{rk}, {}]", grid[k + 1])));
            }
            psi[k] = psi[k + 1] + piece;
        }
        let dpsi: Vec<f64> =
            grid.iter().zip(&big_h).map(|(&r, &hh)| if r == 0.0 { 0.0 } else { c * r - hh / (r * r) }).collect();
        let delta0 = -grid
            .iter()
            .zip(&dpsi)
            .filter(|(&r, _)| r >= 1.0)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);

        let profile =
            Self { d, eps0, b, r_star: shape.hi, top, delta0, shape, step, knots: grid, big_h, psi, dpsi };
        profile.validate()?;
        Ok(profile)
    }

    fn shape(&self) -> Shape {
        self.shape
    }

    /// `c = b / (3 (d−1)^{3/2})`.
    pub fn c(&self) -> f64 {
        self.b / (3.0 * ((self.d - 1) as f64).powf(1.5))
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_h_values(&self) -> &[f64] {
        &self.big_h
    }

    pub fn knot_psi_values(&self) -> &[f64] {
        &self.psi
    }

    pub fn knot_dpsi_values(&self) -> &[f64] {
        &self.dpsi
    }

    /// Blend window `[start, r*]`.
    pub fn blend_window(&self) -> (f64, f64) {
        let s = self.shape();
        (s.lo, s.hi)
    }

    /// `h(r)`, evaluated in closed form.
    pub fn h(&self, r: f64) -> f64 {
        self.shape().h(r)
    }

    #[inline]
    fn locate(&self, r: f64) -> (usize, f64) {
        let n = self.knots.len() - 1;
        let r = r.clamp(0.0, self.top);
        let k = ((r / self.step) as usize).min(n - 1);
        (k, r - self.knots[k])
    }

    #[inline]
    fn hermite(&self, vals: &[f64], ders: &[f64], k: usize, dx: f64) -> f64 {
        let w = self.knots[k + 1] - self.knots[k];
        let t = dx / w;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * vals[k] + h10 * w * ders[k] + h01 * vals[k + 1] + h11 * w * ders[k + 1]
    }

    /// Interpolated `H(r)`; exact at knots.
    pub fn big_h(&self, r: f64) -> f64 {
        let (k, dx) = self.locate(r);
        let hv = [self.h(self.knots[k]), self.h(self.knots[k + 1])];
        let w = self.knots[k + 1] - self.knots[k];
        let t = dx / w;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.big_h[k]
            + (t3 - 2.0 * t2 + t) * w * hv[0]
            + (-2.0 * t3 + 3.0 * t2) * self.big_h[k + 1]
            + (t3 - t2) * w * hv[1]
    }

    /// Interpolated `ψ(r)`, clamped to `[0, √(d−1)]`.
    #[inline]
    pub fn psi(&self, r: f64) -> f64 {
        let (k, dx) = self.locate(r);
        self.hermite(&self.psi, &self.dpsi, k, dx)
    }

    /// `ψ′(r) = c·r − H(r)/r²`.
    pub fn dpsi(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.c() * r - self.big_h(r) / (r * r)
    }

    /// `H(r)` by direct quadrature, bypassing the table.
    pub fn big_h_direct(&self, r: f64) -> Result<f64> {
        let s = self.shape();
        adaptive_simpson(|u| s.h(u), 0.0, r, 1e-13)
    }

    /// `ψ(r₂) − ψ(r₁) = −∫_{r₁}^{r₂} (H(v)/v² − c·v) dv` by nested direct quadrature.
    pub fn psi_difference_direct(&self, r1: f64, r2: f64) -> Result<f64> {
        let s = self.shape();
        let c = self.c();
        let h1 = self.big_h_direct(r1)?;
        let v = adaptive_simpson(
            |v: f64| {
                if v <= 0.0 {
                    return 0.0;
                }
                let hv = h1 + adaptive_simpson(|u| s.h(u), r1, v, 1e-14).unwrap_or(f64::NAN);
                hv / (v * v) - c * v
            },
            r1,
            r2,
            1e-12,
        )?;
        if v.is_nan() {
            return Err(Error::SearchFailed("nested quadrature failed".into()));
        }
        Ok(-v)
    }

    /// `ψ(r)` by nested direct quadrature.
    pub fn psi_direct(&self, r: f64) -> Result<f64> {
        self.psi_difference_direct(self.top, r)
    }

    /// Checks properties (i)–(v), `ψ(√(d−1)) = 0` and `ψ′ ≤ 0` on the knot grid.
    pub fn validate(&self) -> Result<()> {
        let eps0 = self.eps0;
        let fail = |msg: String| Err(Error::PropertyViolation(msg));
        for &r in &self.knots {
            let (h, g) = (self.h(r), target_curve(r));
            if r < 2.0 * eps0 {
                if !(h >= 0.0 && h <= g) {
                    return fail(format!("(i) 0 <= h <= g fails at r={r}: h={h}, g={g}"));
                }
            } else if h != g {
                return fail(format!("(i) h != g at r={r} >= 2*eps0"));
            }
        }
        if self.h(0.0) != 0.0 {
            return fail("(ii) h(0) != 0".into());
        }
        for &r in &self.knots[1..5] {
            let ratio = self.h(r) / (r * r / (4.0 * eps0 * eps0));
            if (ratio - 1.0).abs() > 0.05 {
                return fail(format!("(ii) h(r)/(r^2/(4 eps0^2)) = {ratio} at r={r}"));
            }
        }
        for &r in self.knots.iter().take_while(|&&r| r <= eps0) {
            if !(target_curve(r) - self.h(r) > 0.5) {
                return fail(format!("(iii) g - h <= 1/2 at r={r}"));
            }
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return fail(format!("(iv) b = {} outside (0, 1)", self.b));
        }
        let c = self.c();
        for (&r, &hh) in self.knots.iter().zip(&self.big_h).skip(1) {
            if !(hh > c * r * r * r) {
                return fail(format!("(v) H({r}) = {hh} <= b r^3 / (3 (d-1)^(3/2)) = {}", c * r * r * r));
            }
        }
        if *self.psi.last().unwrap_or(&1.0) != 0.0 {
            return fail("psi(sqrt(d-1)) != 0".into());
        }
        if let Some((r, v)) = self.knots.iter().zip(&self.dpsi).skip(1).find(|(_, &v)| v > 0.0) {
            return fail(format!("psi'({r}) = {v} > 0"));
        }
        Ok(())
    }

    /// `g(r) − h(r) + b (d−1)^{−3/2} r²`, the bracket of the spherical-coordinate drift term.
    pub fn capital_phi(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0 && r <= self.top * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!("r = {r} outside [0, {}]", self.top)));
        }
        Ok(target_curve(r) - self.h(r) + 3.0 * self.c() * r * r)
    }

    /// `min(b (d−1)^{−3/2} ε₀², ½)`.
    pub fn capital_phi_floor(&self) -> f64 {
        (3.0 * self.c() * self.eps0 * self.eps0).min(0.5)
    }

    /// CSV with columns `r,h,H,psi,dpsi`, one row per knot.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,h,H,psi,dpsi")?;
        for k in 0..self.knots.len() {
            let r = self.knots[k];
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r,
                self.h(r),
                self.big_h[k],
                self.psi[k],
                self.dpsi[k]
            )?;
        }
        Ok(())
    }
}

/// Convenience wrapper for [`RadialProfile::build`].
pub fn build_radial_profile(d: usize, eps0: f64, knots: usize) -> Result<RadialProfile> {
    RadialProfile::build(d, eps0, knots)
}
