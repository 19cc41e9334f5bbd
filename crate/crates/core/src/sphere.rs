//! Deterministic and random directions on the unit sphere.

use rand::Rng;
use rand_distr::StandardNormal;

const PRIMES: [u64; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
    109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Radical inverse of `n` in `base`.
pub fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while n > 0 {
        out += (n % base) as f64 * f;
        n /= base;
        f *= inv;
    }
    out
}

/// Halton-based low-discrepancy sequence of unit vectors in `R^dim`.
///
/// `dim == 2` uses the van der Corput angle; higher dimensions push Halton
/// points through Box–Muller and normalize.
#[derive(Clone, Debug)]
pub struct SphereSequence {
    dim: usize,
    index: u64,
}

impl SphereSequence {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1 && dim < 2 * PRIMES.len(), "unsupported dimension {dim}");
        Self { dim, index: 0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Iterator for SphereSequence {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        self.index += 1;
        let n = self.index;
        let v = match self.dim {
            1 => vec![if n % 2 == 1 { 1.0 } else { -1.0 }],
            2 => {
                let t = std::f64::consts::TAU * radical_inverse(n, 2);
                vec![t.cos(), t.sin()]
            }
            d => {
                let mut v = Vec::with_capacity(d + 1);
                let pairs = d.div_ceil(2);
                for p in 0..pairs {
                    let u1 = 1.0 - radical_inverse(n, PRIMES[2 * p]);
                    let u2 = radical_inverse(n, PRIMES[2 * p + 1]);
                    let rad = (-2.0 * u1.ln()).sqrt();
                    let ang = std::f64::consts::TAU * u2;
                    v.push(rad * ang.cos());
                    v.push(rad * ang.sin());
                }
                v.truncate(d);
                v
            }
        };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return self.next();
        }
        Some(v.into_iter().map(|x| x / norm).collect())
    }
}

/// Uniformly distributed unit vector.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
