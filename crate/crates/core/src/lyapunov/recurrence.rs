//! `f(x) = (1 − αψ(r))‖x‖^α` and its exact drift under the γ-weighted lattice walk.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lyapunov::profile::RadialProfile;
use crate::sphere::random_unit_vector;

/// Ratio-coordinate radius: with `a₀ ≥ a₁ ≥ …` the sorted `|x_j|`, `r = (Σ_{j≥1} (a_j/a₀)²)^{1/2}`.
pub fn ratio_radius(x: &[f64]) -> Result<f64> {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    if a.is_empty() || a[0] == 0.0 {
        return Err(Error::InvalidArgument("ratio radius undefined at the origin".into()));
    }
    let s2: f64 = a[1..].iter().map(|&v| (v / a[0]) * (v / a[0])).sum();
    Ok(s2.sqrt())
}

/// `(1 − αψ(r))‖x‖^α`; invariant under signed coordinate permutations.
pub fn f_value(x: &[f64], alpha: f64, profile: &RadialProfile) -> Result<f64> {
    let r = ratio_radius(x)?;
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    let n2: f64 = a.iter().map(|v| v * v).sum();
    Ok((1.0 - alpha * profile.psi(r)) * n2.powf(0.5 * alpha))
}

/// Index of the first coordinate with maximal absolute value.
pub fn rho(x: &[i64]) -> usize {
    let mut best = 0;
    for (k, v) in x.iter().enumerate() {
        if v.unsigned_abs() > x[best].unsigned_abs() {
            best = k;
        }
    }
    best
}

#[inline]
fn lattice_radius(max_abs: i64, n2: i128) -> f64 {
    let m = max_abs as f64;
    ((n2 - (max_abs as i128) * (max_abs as i128)) as f64).sqrt() / m
}

/// [`gamma_walk_drift`] with an arbitrary radial function in place of `ψ`.
pub fn gamma_walk_drift_with(x: &[i64], gamma: f64, alpha: f64, psi: impl Fn(f64) -> f64) -> Result<f64> {
    let d = x.len();
    let n2: i128 = x.iter().map(|&v| (v as i128) * (v as i128)).sum();
    if n2 == 0 {
        return Err(Error::InvalidArgument("drift of f is undefined at the origin".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let max_abs = x.iter().map(|v| v.abs()).max().unwrap_or(0);
    let psi_x = psi(lattice_radius(max_abs, n2));
    let lead = rho(x);
    let denom = 2.0 * (gamma + (d - 1) as f64);
    let n2f = n2 as f64;
    let half_alpha = 0.5 * alpha;

    let mut total = 0.0;
    for k in 0..d {
        let w = if k == lead { gamma / denom } else { 1.0 / denom };
        for sign in [1i64, -1] {
            let yk = x[k] + sign;
            let delta = 2 * sign as i128 * x[k] as i128 + 1;
            let yn2 = n2 + delta;
            if yn2 == 0 {
                // stepping onto the origin: f(0) = 0
                total += w * -((1.0 - alpha * psi_x) * n2f.powf(half_alpha));
                continue;
            }
            let ymax = x
                .iter()
                .enumerate()
                .map(|(j, &v)| if j == k { yk.abs() } else { v.abs() })
                .max()
                .unwrap_or(0);
            let psi_y = psi(lattice_radius(ymax, yn2));
            let growth = (half_alpha * (delta as f64 / n2f).ln_1p()).exp_m1();
            total += w * ((1.0 - alpha * psi_y) * growth - alpha * (psi_y - psi_x));
        }
    }
    Ok(total * n2f.powf(half_alpha))
}

/// `E[f(x + ξ) − f(x)]` for the γ-walk, summed exactly over the `2d` neighbors.
pub fn gamma_walk_drift(x: &[i64], gamma: f64, alpha: f64, profile: &RadialProfile) -> Result<f64> {
    if x.len() != profile.d {
        return Err(Error::DimensionMismatch { expected: profile.d, got: x.len() });
    }
    gamma_walk_drift_with(x, gamma, alpha, |r| profile.psi(r))
}

/// Largest fundamental-domain count enumerated exhaustively.
pub const ENUMERATION_LIMIT: f64 = 5e7;
/// Points drawn per shell when it is too large to enumerate.
pub const SHELL_SAMPLES: usize = 100_000;
const SAMPLE_SEED: u64 = 0x5eed_0f_5e11;

#[derive(Clone, Debug, Serialize)]
pub struct ShellScan {
    pub worst_drift: f64,
    pub worst_point: Vec<i64>,
    pub points_checked: u64,
    pub exhaustive: bool,
}

impl ShellScan {
    fn empty() -> Self {
        Self { worst_drift: f64::NEG_INFINITY, worst_point: vec![], points_checked: 0, exhaustive: true }
    }

    fn offer(&mut self, drift: f64, x: &[i64]) {
        self.points_checked += 1;
        if drift > self.worst_drift || (drift == self.worst_drift && x < self.worst_point.as_slice()) {
            self.worst_drift = drift;
            self.worst_point = x.to_vec();
        }
    }

    fn merge(mut self, other: Self) -> Self {
        let n = self.points_checked + other.points_checked;
        if other.worst_drift > self.worst_drift
            || (other.worst_drift == self.worst_drift && other.worst_point < self.worst_point)
        {
            self = other;
        }
        self.points_checked = n;
        self
    }

    pub fn passed(&self) -> bool {
        self.points_checked > 0 && self.worst_drift <= 0.0
    }
}

/// Expected number of points `x₀ ≥ … ≥ x_{d−1} ≥ 0` in the shell.
fn fundamental_count_estimate(d: usize, r0: f64, r1: f64) -> f64 {
    // ball volume π^{d/2} R^d / Γ(d/2 + 1), one of 2^d·d! signed permutations
    let mut unit = 1.0;
    let mut k = d;
    while k >= 2 {
        unit *= 2.0 * std::f64::consts::PI / k as f64;
        k -= 2;
    }
    if k == 1 {
        unit *= 2.0;
    }
    let fact: f64 = (1..=d).map(|v| v as f64).product();
    unit * (r1.powi(d as i32) - r0.powi(d as i32)) / (2f64.powi(d as i32) * fact)
}

fn enumerate_suffix(
    prefix: &mut Vec<i64>,
    sum_sq: i128,
    d: usize,
    lo2: i128,
    hi2: i128,
    visit: &mut impl FnMut(&[i64]),
) {
    if prefix.len() == d {
        if sum_sq >= lo2 {
            visit(prefix);
        }
        return;
    }
    let cap = *prefix.last().expect("prefix starts non-empty");
    for v in 0..=cap {
        let s = sum_sq + (v as i128) * (v as i128);
        if s > hi2 {
            break;
        }
        prefix.push(v);
        enumerate_suffix(prefix, s, d, lo2, hi2, visit);
        prefix.pop();
    }
}

/// Worst γ-walk drift over lattice points with `r0 ≤ ‖x‖ ≤ r1`.
///
/// The drift is invariant under signed coordinate permutations, so only the
/// fundamental domain `x₀ ≥ x₁ ≥ … ≥ 0` is visited: exhaustively when it has at
/// most [`ENUMERATION_LIMIT`] points, otherwise by [`SHELL_SAMPLES`] seeded samples.
pub fn scan_gamma_shell(
    d: usize,
    gamma: f64,
    alpha: f64,
    r0: f64,
    r1: f64,
    psi: &(impl Fn(f64) -> f64 + Sync),
) -> Result<ShellScan> {
    if !(r0 > 0.0 && r1 >= r0) {
        return Err(Error::InvalidArgument(format!("invalid shell [{r0}, {r1}]")));
    }
    let lo2 = (r0 * r0).ceil() as i128;
    let hi2 = (r1 * r1).floor() as i128;
    if fundamental_count_estimate(d, r0, r1) <= ENUMERATION_LIMIT {
        let top = r1.floor() as i64;
        let first = ((r0 * r0 / d as f64).sqrt().floor() as i64).max(1);
        let scans: Vec<Result<ShellScan>> = (first..=top)
            .into_par_iter()
            .map(|x0| {
                let mut scan = ShellScan::empty();
                let mut err = None;
                let mut prefix = vec![x0];
                enumerate_suffix(&mut prefix, (x0 as i128) * (x0 as i128), d, lo2, hi2, &mut |x| {
                    match gamma_walk_drift_with(x, gamma, alpha, psi) {
                        Ok(v) => scan.offer(v, x),
                        Err(e) => {
                            err.get_or_insert(e);
                        }
                    }
                });
                err.map_or(Ok(scan), Err)
            })
            .collect();
        let mut out = ShellScan::empty();
        for s in scans {
            out = out.merge(s?);
        }
        return Ok(out);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let (p0, p1) = (r0.powi(d as i32), r1.powi(d as i32));
    let mut points = Vec::with_capacity(SHELL_SAMPLES);
    while points.len() < SHELL_SAMPLES {
        let u = random_unit_vector(&mut rng, d);
        let t: f64 = rand::Rng::random(&mut rng);
        let radius = (p0 + t * (p1 - p0)).powf(1.0 / d as f64);
        let mut x: Vec<i64> = u.iter().map(|c| (c * radius).round().abs() as i64).collect();
        x.sort_unstable_by(|a, b| b.cmp(a));
        let n2: i128 = x.iter().map(|&v| (v as i128) * (v as i128)).sum();
        if n2 >= lo2 && n2 <= hi2 {
            points.push(x);
        }
    }
    let scan = points
        .par_iter()
        .map(|x| {
            let mut s = ShellScan::empty();
            s.offer(gamma_walk_drift_with(x, gamma, alpha, psi)?, x);
            Ok(s)
        })
        .try_reduce(ShellScan::empty, |a, b| Ok::<_, Error>(a.merge(b)))?;
    Ok(ShellScan { exhaustive: false, ..scan })
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaCertificate {
    pub d: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub eps0: f64,
    pub r0: f64,
    pub r1: f64,
    pub scan: ShellScan,
}

/// First `(γ, α)` (smallest γ, then smallest α) whose drift is `≤ 0` on the whole shell.
pub fn find_gamma_alpha(
    profile: &RadialProfile,
    gamma_grid: &[f64],
    alpha_grid: &[f64],
    shell: (f64, f64),
) -> Result<GammaCertificate> {
    let sorted = |g: &[f64]| {
        let mut v = g.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (gammas, alphas) = (sorted(gamma_grid), sorted(alpha_grid));
    if gammas.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidArgument("empty gamma or alpha grid".into()));
    }
    let psi = |r: f64| profile.psi(r);
    let mut least_bad: Option<(f64, f64, ShellScan)> = None;
    for &gamma in &gammas {
        for &alpha in &alphas {
            let scan = scan_gamma_shell(profile.d, gamma, alpha, shell.0, shell.1, &psi)?;
            if scan.passed() {
                return Ok(GammaCertificate {
                    d: profile.d,
                    gamma,
                    alpha,
                    eps0: profile.eps0,
                    r0: shell.0,
                    r1: shell.1,
                    scan,
                });
            }
            if least_bad.as_ref().is_none_or(|(_, _, s)| scan.worst_drift < s.worst_drift) {
                least_bad = Some((gamma, alpha, scan));
            }
        }
    }
    let (g, a, s) = least_bad.expect("grids are non-empty");
    Err(Error::SearchFailed(format!(
        "no (gamma, alpha) pair has non-positive drift on [{}, {}]; best was gamma={g}, alpha={a} with drift {:e} at {:?}",
        shell.0, shell.1, s.worst_drift, s.worst_point
    )))
}
