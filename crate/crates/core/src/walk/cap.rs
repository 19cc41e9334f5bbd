//! Spherical-cap covers and the cap walk.
//!
//! At `x ≠ 0` the walk finds the first cap (in stored order) containing `x/‖x‖`,
//! takes a fair `±1` step along that cap's center `m`, and independently moves
//! `±1` along each complement vector `v_j` with probability `ε/2` each.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::lyapunov::log_drift;
use crate::measure::{Atom, FiniteMeasure};
use crate::sphere::{random_unit_vector, SphereSequence};
use crate::walk::engine::WalkProcess;

/// Consecutive rejected candidates that end the greedy construction.
pub const GREEDY_PATIENCE: usize = 100_000;
/// Directions used by the covering check.
pub const COVER_CHECK_DIRECTIONS: usize = 1_000_000;
/// Centers are kept pairwise farther apart than this fraction of `θ`.
pub const PACKING_FRACTION: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub center: Vec<f64>,
    /// Orthonormal basis of the plane orthogonal to `center`.
    pub complement: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapSystem {
    pub d: usize,
    pub theta: f64,
    pub caps: Vec<Cap>,
}

/// Orthonormal complement of a unit vector, by Gram–Schmidt on the canonical basis,
/// always taking next the basis vector with the largest residual.
pub fn orthonormal_complement(center: &[f64]) -> Vec<Vec<f64>> {
    let d = center.len();
    let mut basis: Vec<Vec<f64>> = vec![center.to_vec()];
    let mut unused: Vec<usize> = (0..d).collect();
    while basis.len() < d {
        let residual = |k: usize| {
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            for b in &basis {
                let c = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
            v
        };
        let (pos, mut v) = unused
            .iter()
            .enumerate()
            .map(|(pos, &k)| (pos, residual(k)))
            .max_by(|a, b| norm(&a.1).total_cmp(&norm(&b.1)))
            .expect("fewer than d vectors so far");
        unused.remove(pos);
        // second pass for numerical orthogonality
        for b in &basis {
            let c = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let n = norm(&v);
        basis.push(v.into_iter().map(|x| x / n).collect());
    }
    basis.split_off(1)
}

impl CapSystem {
    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    /// Index of the first cap whose center is within `θ` of `x/‖x‖`; cap 0 at the origin.
    ///
    /// A direction outside every cap (excluded by the covering check up to a null set)
    /// falls back to the nearest center.
    pub fn select(&self, x: &[f64]) -> usize {
        let n = norm(x);
        if n == 0.0 {
            return 0;
        }
        let cos_theta = self.theta.cos();
        let mut nearest = (0, f64::NEG_INFINITY);
        for (i, cap) in self.caps.iter().enumerate() {
            let c = dot(&cap.center, x) / n;
            if c >= cos_theta {
                return i;
            }
            if c > nearest.1 {
                nearest = (i, c);
            }
        }
        nearest.0
    }

    /// Largest angle between one of `count` random directions and its nearest center.
    pub fn covering_radius_estimate<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> (f64, Vec<f64>) {
        let mut worst = (0.0, vec![]);
        for _ in 0..count {
            let u = random_unit_vector(rng, self.d);
            let best = self.caps.iter().map(|c| dot(&c.center, &u)).fold(f64::NEG_INFINITY, f64::max);
            let angle = best.clamp(-1.0, 1.0).acos();
            if angle > worst.0 {
                worst = (angle, u);
            }
        }
        worst
    }

    /// Fails if any of `count` random directions is more than `θ` from every center.
    pub fn verify_covering<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<()> {
        let (angle, direction) = self.covering_radius_estimate(rng, count);
        if angle > self.theta {
            return Err(Error::CoveringFailed { direction, angle });
        }
        Ok(())
    }

    /// Largest deviation of any complement from orthonormality (including orthogonality to its center).
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for cap in &self.caps {
            let mut frame = vec![cap.center.clone()];
            frame.extend(cap.complement.iter().cloned());
            for i in 0..frame.len() {
                for j in 0..frame.len() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((dot(&frame[i], &frame[j]) - target).abs());
                }
            }
        }
        worst
    }

    /// Exact step law of the walk from cap `i`: `2·3^{d−1}` atoms.
    pub fn step_measure(&self, i: usize, eps: f64) -> Result<FiniteMeasure<f64>> {
        check_eps(eps)?;
        let cap = &self.caps[i];
        let d = self.d;
        let mut atoms = Vec::new();
        let transversal = d - 1;
        for code in 0..3usize.pow(transversal as u32) {
            let mut point = vec![0.0; d];
            let mut w = 0.5;
            let mut c = code;
            for v in &cap.complement {
                let eta = (c % 3) as i64 - 1;
                c /= 3;
                w *= if eta == 0 { 1.0 - eps } else { eps / 2.0 };
                for (p, vi) in point.iter_mut().zip(v) {
                    *p += eta as f64 * vi;
                }
            }
            if w == 0.0 {
                continue;
            }
            for s in [1.0, -1.0] {
                let p: Vec<f64> = point.iter().zip(&cap.center).map(|(a, m)| a + s * m).collect();
                atoms.push(Atom { point: p, weight: w });
            }
        }
        FiniteMeasure::new(d, atoms)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps must lie in [0, 1], got {eps}")));
    }
    Ok(())
}

/// Greedy cap cover from the low-discrepancy sphere sequence, then a Monte Carlo covering check.
pub fn build_cap_system<R: Rng + ?Sized>(d: usize, theta: f64, rng: &mut R) -> Result<CapSystem> {
    build_cap_system_checked(d, theta, rng, COVER_CHECK_DIRECTIONS)
}

/// [`build_cap_system`] with a configurable number of check directions.
pub fn build_cap_system_checked<R: Rng + ?Sized>(
    d: usize,
    theta: f64,
    rng: &mut R,
    check_directions: usize,
) -> Result<CapSystem> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("cap covers need d >= 2, got {d}")));
    }
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, pi/4), got {theta}")));
    }
    let cos_sep = (PACKING_FRACTION * theta).cos();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut rejected = 0;
    for u in SphereSequence::new(d) {
        if centers.iter().all(|c| dot(c, &u) < cos_sep) {
            centers.push(u);
            rejected = 0;
        } else {
            rejected += 1;
            if rejected >= GREEDY_PATIENCE {
                break;
            }
        }
    }
    let caps = centers
        .into_iter()
        .map(|center| {
            let complement = orthonormal_complement(&center);
            Cap { center, complement }
        })
        .collect();
    let system = CapSystem { d, theta, caps };
    system.verify_covering(rng, check_directions)?;
    Ok(system)
}

/// One cap-walk step from `x`.
pub fn cap_walk_step<R: Rng + ?Sized>(x: &[f64], caps: &CapSystem, eps: f64, rng: &mut R) -> Vec<f64> {
    cap_walk_step_indexed(x, caps, eps, rng).0
}

fn cap_walk_step_indexed<R: Rng + ?Sized>(x: &[f64], caps: &CapSystem, eps: f64, rng: &mut R) -> (Vec<f64>, usize) {
    let i = caps.select(x);
    let cap = &caps.caps[i];
    let mut y = x.to_vec();
    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
    for (yk, mk) in y.iter_mut().zip(&cap.center) {
        *yk += s * mk;
    }
    for v in &cap.complement {
        let u: f64 = rng.random();
        let eta = if u < eps / 2.0 {
            1.0
        } else if u < eps {
            -1.0
        } else {
            continue;
        };
        for (yk, vk) in y.iter_mut().zip(v) {
            *yk += eta * vk;
        }
    }
    (y, i)
}

/// The cap walk as a [`WalkProcess`]; the choice is the cap index.
#[derive(Clone, Debug)]
pub struct CapWalk {
    caps: std::sync::Arc<CapSystem>,
    eps: f64,
    x: Vec<f64>,
}

impl CapWalk {
    pub fn new(caps: std::sync::Arc<CapSystem>, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let d = caps.d;
        Ok(Self { caps, eps, x: vec![0.0; d] })
    }
}

impl WalkProcess for CapWalk {
    fn dim(&self) -> usize {
        self.caps.d
    }

    fn position(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn norm_sq(&self) -> f64 {
        dot(&self.x, &self.x)
    }

    fn step(&mut self, rng: &mut dyn RngCore) -> usize {
        let (y, i) = cap_walk_step_indexed(&self.x, &self.caps, self.eps, rng);
        self.x = y;
        i
    }
}

/// Worst `log‖x‖` drift of the cap walk over the scan points.
#[derive(Clone, Debug, Serialize)]
pub struct CapDriftScan {
    pub eps: f64,
    pub worst_drift: f64,
    pub worst_point: Vec<f64>,
    pub points_checked: usize,
}

/// Points `‖x‖ ∈ [r0, span·r0]`: sphere-sequence directions with radii spread geometrically.
pub fn cap_scan_points(d: usize, r0: f64, span: f64, count: usize) -> Vec<Vec<f64>> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    SphereSequence::new(d)
        .take(count)
        .enumerate()
        .map(|(n, u)| {
            let t = (n as f64 * GOLDEN).fract();
            let radius = r0 * span.powf(t);
            u.into_iter().map(|c| c * radius).collect()
        })
        .collect()
}

/// Exact `log‖x‖` drift of the cap walk at every scan point.
pub fn scan_cap_log_drift(caps: &CapSystem, eps: f64, points: &[Vec<f64>]) -> Result<CapDriftScan> {
    let measures: Vec<FiniteMeasure<f64>> = (0..caps.len()).map(|i| caps.step_measure(i, eps)).collect::<Result<_>>()?;
    let mut scan = CapDriftScan { eps, worst_drift: f64::NEG_INFINITY, worst_point: vec![], points_checked: 0 };
    for x in points {
        let v = log_drift(&measures[caps.select(x)], x)?;
        scan.points_checked += 1;
        if v > scan.worst_drift {
            scan.worst_drift = v;
            scan.worst_point = x.clone();
        }
    }
    Ok(scan)
}

/// Largest `ε` in the grid whose cap walk has `log‖x‖` drift `≤ 0` at every scan point.
pub fn find_cap_epsilon(caps: &CapSystem, eps_grid: &[f64], points: &[Vec<f64>]) -> Result<CapDriftScan> {
    let mut grid = eps_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let mut best_failure: Option<CapDriftScan> = None;
    for eps in grid {
        let scan = scan_cap_log_drift(caps, eps, points)?;
        if scan.worst_drift <= 0.0 {
            return Ok(scan);
        }
        if best_failure.as_ref().is_none_or(|b| scan.worst_drift < b.worst_drift) {
            best_failure = Some(scan);
        }
    }
    Err(Error::SearchFailed(match best_failure {
        Some(s) => format!("no eps passed; eps={} still has log drift {:e} at {:?}", s.eps, s.worst_drift, s.worst_point),
        None => "empty eps grid".into(),
    }))
}
