//! Finite-support step measures and their exact moments.

use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, jacobi_eigen, norm, Matrix, SymMatrix};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Atom<T> {
    pub point: Vec<T>,
    pub weight: T,
}

/// Probability measure on `R^d` with finitely many atoms.
///
/// Atom order is part of the value: sampling walks the atoms in order.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct FiniteMeasure<T> {
    dim: usize,
    atoms: Vec<Atom<T>>,
}

/// Maximum deviation of the weight sum from 1 accepted by [`FiniteMeasure::new`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Looser bound used when reading measures from JSON files.
pub const FILE_WEIGHT_SUM_TOL: f64 = 1e-9;

impl<T: Real> FiniteMeasure<T> {
    pub fn new(dim: usize, atoms: Vec<Atom<T>>) -> Result<Self> {
        Self::with_tolerance(dim, atoms, WEIGHT_SUM_TOL)
    }

    /// Validates atoms and renormalizes weights if their sum is within `tol` of 1.
    pub fn with_tolerance(dim: usize, mut atoms: Vec<Atom<T>>, tol: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("measure needs at least one atom".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.point.len() != dim {
                return Err(Error::InvalidMeasure(format!(
                    "atom {i} has {} coordinates, expected {dim}",
                    a.point.len()
                )));
            }
            if !(a.weight > T::zero()) || !a.weight.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom {i} has non-positive weight {}", a.weight)));
            }
            if a.point.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom {i} has a non-finite coordinate")));
            }
        }
        let total: T = atoms.iter().map(|a| a.weight).sum();
        let tol = T::tol_floor(T::lit(tol), 4.0 * atoms.len() as f64);
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        for a in &mut atoms {
            a.weight = a.weight / total;
        }
        Ok(Self { dim, atoms })
    }

    /// Uniform measure over the given points.
    pub fn uniform(points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let w = T::one() / T::lit(points.len().max(1) as f64);
        Self::new(dim, points.into_iter().map(|point| Atom { point, weight: w }).collect())
    }

    /// Simple random walk step: `±e_j` with mass `1/(2d)` each.
    pub fn simple_random_walk(dim: usize) -> Self {
        let mut points = Vec::with_capacity(2 * dim);
        for j in 0..dim {
            for sign in [T::one(), -T::one()] {
                let mut p = vec![T::zero(); dim];
                p[j] = sign;
                points.push(p);
            }
        }
        Self::uniform(points).expect("valid SRW measure")
    }

    /// Symmetric measure with `2d` atoms `±√d · L_j` (columns of the Cholesky factor of `cov`),
    /// so its covariance is exactly `cov` up to rounding.
    pub fn symmetric_with_covariance(cov: &SymMatrix<T>) -> Result<Self> {
        let l = cholesky(cov)?;
        let d = cov.dim();
        let s = T::lit(d as f64).sqrt();
        let mut points = Vec::with_capacity(2 * d);
        for j in 0..d {
            let col: Vec<T> = l.column(j).into_iter().map(|x| x * s).collect();
            points.push(col.clone());
            points.push(col.into_iter().map(|x| -x).collect());
        }
        Self::uniform(points)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for a in &self.atoms {
            for (mi, &x) in m.iter_mut().zip(&a.point) {
                *mi = *mi + a.weight * x;
            }
        }
        m
    }

    /// Second central moments.
    pub fn covariance(&self) -> SymMatrix<T> {
        let mean = self.mean();
        let d = self.dim;
        let mut c = Matrix::zeros(d, d);
        for a in &self.atoms {
            let centered: Vec<T> = a.point.iter().zip(&mean).map(|(&x, &m)| x - m).collect();
            for i in 0..d {
                for j in i..d {
                    c[(i, j)] = c[(i, j)] + a.weight * centered[i] * centered[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                c[(i, j)] = c[(j, i)];
            }
        }
        SymMatrix::symmetrize(c)
    }

    pub fn is_full_dimensional(&self, tol: T) -> bool {
        let e = jacobi_eigen(&self.covariance(), T::lit(1e-13));
        *e.values.last().expect("dim > 0") > tol
    }

    /// `E‖Z‖^p`.
    pub fn moment(&self, p: T) -> T {
        self.atoms.iter().map(|a| a.weight * norm(&a.point).powf(p)).sum()
    }

    pub fn max_norm(&self) -> T {
        self.atoms.iter().fold(T::zero(), |m, a| m.max(norm(&a.point)))
    }

    /// Image measure under `z ↦ A z`; weights unchanged.
    pub fn pushforward(&self, a: &Matrix<T>) -> Result<Self> {
        if a.cols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: a.cols() });
        }
        let atoms = self
            .atoms
            .iter()
            .map(|at| Ok(Atom { point: a.mul_vec(&at.point)?, weight: at.weight }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: a.rows(), atoms })
    }

    /// Inverse-CDF draw over the fixed atom order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[T] {
        let idx = self.sample_index(rng);
        &self.atoms[idx].point
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = T::lit(rng.random::<f64>());
        let mut acc = T::zero();
        for (i, a) in self.atoms.iter().enumerate() {
            acc = acc + a.weight;
            if u < acc {
                return i;
            }
        }
        self.atoms.len() - 1
    }

    /// True when every coordinate of every atom is an integer.
    pub fn is_lattice(&self) -> bool {
        self.atoms.iter().all(|a| a.point.iter().all(|x| x.fract() == T::zero()))
    }

    pub fn cast<U: Real>(&self) -> FiniteMeasure<U> {
        FiniteMeasure {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    point: a.point.iter().map(|x| U::lit(x.as_f64())).collect(),
                    weight: U::lit(a.weight.as_f64()),
                })
                .collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
struct RawMeasure<T> {
    dim: usize,
    atoms: Vec<Atom<T>>,
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for FiniteMeasure<T> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMeasure::<T>::deserialize(de)?;
        FiniteMeasure::with_tolerance(raw.dim, raw.atoms, FILE_WEIGHT_SUM_TOL).map_err(serde::de::Error::custom)
    }
}

impl FiniteMeasure<f64> {
    /// Reads `{"dim": d, "atoms": [{"point": [..], "weight": w}, ..]}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Lattice measure with exact rational weights, used by the brute-force enumerator.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMeasure {
    dim: usize,
    atoms: Vec<(Vec<i64>, BigRational)>,
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl ExactMeasure {
    /// Weights must be positive and sum to exactly 1.
    pub fn new(dim: usize, atoms: Vec<(Vec<i64>, BigRational)>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() {
            return Err(Error::InvalidMeasure("need positive dimension and at least one atom".into()));
        }
        let mut total = BigRational::zero();
        for (p, w) in &atoms {
            if p.len() != dim {
                return Err(Error::InvalidMeasure(format!("atom has {} coordinates, expected {dim}", p.len())));
            }
            if !w.is_positive() {
                return Err(Error::InvalidMeasure(format!("non-positive weight {w}")));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not exactly 1")));
        }
        Ok(Self { dim, atoms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(Vec<i64>, BigRational)] {
        &self.atoms
    }

    /// Same atoms with floating-point weights.
    pub fn to_float<T: Real>(&self) -> FiniteMeasure<T> {
        use num_traits::ToPrimitive;
        let atoms = self
            .atoms
            .iter()
            .map(|(p, w)| Atom {
                point: p.iter().map(|&x| T::lit(x as f64)).collect(),
                weight: T::lit(w.to_f64().unwrap_or(f64::NAN)),
            })
            .collect();
        FiniteMeasure::new(self.dim, atoms).expect("exact measure converts")
    }
}
