//! The γ-weighted lattice walk: the leading coordinate moves with weight γ, the others with weight 1.

use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::lyapunov::rho;
use crate::measure::{Atom, ExactMeasure, FiniteMeasure};
use crate::walk::engine::{Trajectory, WalkProcess};

fn unit(d: usize, k: usize, sign: i64) -> Vec<i64> {
    let mut e = vec![0; d];
    e[k] = sign;
    e
}

/// Exact step law at `x`: `γ/(2(γ+d−1))` on `±e_ρ(x)`, `1/(2(γ+d−1))` on every other `±e_k`.
pub fn gamma_walk_step_distribution(x: &[i64], gamma: &BigRational) -> Result<ExactMeasure> {
    if !gamma.is_positive() {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let d = x.len();
    if d == 0 {
        return Err(Error::InvalidArgument("empty position".into()));
    }
    let lead = rho(x);
    let denom = (gamma + BigRational::from_integer((d as i64 - 1).into())) * BigRational::from_integer(2.into());
    let heavy = gamma / &denom;
    let light = BigRational::one() / &denom;
    let mut atoms = Vec::with_capacity(2 * d);
    for k in 0..d {
        let w = if k == lead { heavy.clone() } else { light.clone() };
        atoms.push((unit(d, k, 1), w.clone()));
        atoms.push((unit(d, k, -1), w));
    }
    ExactMeasure::new(d, atoms)
}

/// Floating-point version of [`gamma_walk_step_distribution`].
pub fn gamma_walk_step_measure(x: &[i64], gamma: f64) -> Result<FiniteMeasure<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let d = x.len();
    let lead = rho(x);
    let denom = 2.0 * (gamma + (d - 1) as f64);
    let mut atoms = Vec::with_capacity(2 * d);
    for k in 0..d {
        let w = if k == lead { gamma / denom } else { 1.0 / denom };
        for s in [1i64, -1] {
            atoms.push(Atom { point: unit(d, k, s).into_iter().map(|v| v as f64).collect(), weight: w });
        }
    }
    FiniteMeasure::new(d, atoms)
}

/// The γ-walk on `Z^d`, started at the origin.
#[derive(Clone, Debug)]
pub struct GammaWalk {
    pub gamma: f64,
    x: Vec<i64>,
}

impl GammaWalk {
    pub fn new(d: usize, gamma: f64) -> Result<Self> {
        if d == 0 || !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("need d >= 1 and gamma > 0, got d={d}, gamma={gamma}")));
        }
        Ok(Self { gamma, x: vec![0; d] })
    }

    pub fn lattice_position(&self) -> &[i64] {
        &self.x
    }
}

impl WalkProcess for GammaWalk {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn position(&self) -> Vec<f64> {
        self.x.iter().map(|&v| v as f64).collect()
    }

    fn norm_sq(&self) -> f64 {
        self.x.iter().map(|&v| (v * v) as f64).sum()
    }

    /// Returns `ρ(x)` before the move.
    fn step(&mut self, rng: &mut dyn RngCore) -> usize {
        let d = self.x.len();
        let lead = rho(&self.x);
        let u: f64 = rng.random::<f64>() * (self.gamma + (d - 1) as f64);
        let k = if u < self.gamma || d == 1 {
            lead
        } else {
            let other = (((u - self.gamma).floor() as usize).min(d - 2)) as usize;
            if other < lead {
                other
            } else {
                other + 1
            }
        };
        self.x[k] += if rng.random::<bool>() { 1 } else { -1 };
        lead
    }
}

/// A γ-walk path with `ρ(X_i)` in the choice column.
pub fn simulate_gamma_walk<R: Rng>(d: usize, gamma: f64, steps: usize, rng: &mut R) -> Result<Trajectory<i64>> {
    let mut w = GammaWalk::new(d, gamma)?;
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(w.x.clone());
    let mut choices = Vec::with_capacity(steps);
    for _ in 0..steps {
        choices.push(w.step(rng));
        positions.push(w.x.clone());
    }
    Ok(Trajectory { positions, choices, seed: 0 })
}
