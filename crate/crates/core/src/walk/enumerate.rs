//! Exact endpoint laws of short walks, by exhaustive tree enumeration.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::ExactMeasure;
use crate::walk::rules::{AdaptedRule, History};

/// Leaf budget for both enumerators.
pub const MAX_LEAVES: u128 = 10_000_000;

/// Endpoint → exact probability.
pub type ExactLaw = BTreeMap<Vec<i64>, BigRational>;

fn common_dim(mus: &[ExactMeasure]) -> Result<usize> {
    let d = mus.first().ok_or_else(|| Error::InvalidArgument("no step measures".into()))?.dim();
    for mu in mus {
        if mu.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mu.dim() });
        }
    }
    Ok(d)
}

fn require_deterministic(rule: &dyn AdaptedRule<i64>) -> Result<()> {
    if rule.is_deterministic() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rule '{}' is randomized; exact enumeration needs a deterministic rule", rule.name())))
    }
}

fn leaf_bound(widths: impl Iterator<Item = u128>) -> u128 {
    widths.fold(1u128, |acc, w| acc.saturating_mul(w))
}

// deterministic rules never draw from it
fn inert_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

struct Tree<'a> {
    mus: &'a [ExactMeasure],
    steps: usize,
    law: ExactLaw,
    rng: ChaCha8Rng,
}

impl Tree<'_> {
    fn descend(
        &mut self,
        rule: &mut dyn AdaptedRule<i64>,
        positions: &mut Vec<Vec<i64>>,
        choices: &mut Vec<usize>,
        mass: &BigRational,
    ) {
        if choices.len() == self.steps {
            let end = positions.last().unwrap().clone();
            *self.law.entry(end).or_insert_with(BigRational::zero) += mass;
            return;
        }
        let rng: &mut dyn RngCore = &mut self.rng;
        let j = rule.choose(History { positions, choices }, rng);
        let mu = self.mus.get(j).expect("rule index out of range");
        let atoms = mu.atoms().to_vec();
        for (point, w) in &atoms {
            let next: Vec<i64> = positions.last().unwrap().iter().zip(point).map(|(a, b)| a + b).collect();
            positions.push(next);
            choices.push(j);
            let mut branch = rule.clone_box();
            self.descend(branch.as_mut(), positions, choices, &(mass * w));
            choices.pop();
            positions.pop();
        }
    }
}

/// Law of `X_T` for the adapted-rule walk, enumerating every sequence of atom choices.
pub fn enumerate_distribution(mus: &[ExactMeasure], rule: &dyn AdaptedRule<i64>, steps: usize) -> Result<ExactLaw> {
    let d = common_dim(mus)?;
    require_deterministic(rule)?;
    let widest = mus.iter().map(|m| m.atoms().len() as u128).max().unwrap_or(1);
    let leaves = leaf_bound(std::iter::repeat_n(widest, steps));
    if leaves > MAX_LEAVES {
        return Err(Error::EnumerationTooLarge { leaves, limit: MAX_LEAVES });
    }
    let mut tree = Tree { mus, steps, law: ExactLaw::new(), rng: inert_rng() };
    let mut r = rule.clone_box();
    tree.descend(r.as_mut(), &mut vec![vec![0; d]], &mut vec![], &BigRational::one());
    Ok(tree.law)
}

/// Law of `X_T` for the stream engine, enumerating every joint configuration of the
/// `k` streams `(ζ^j_1, …, ζ^j_T)` and replaying the walk on each.
pub fn enumerate_stream_distribution(
    mus: &[ExactMeasure],
    rule: &dyn AdaptedRule<i64>,
    steps: usize,
) -> Result<ExactLaw> {
    let d = common_dim(mus)?;
    require_deterministic(rule)?;
    let k = mus.len();
    let widths: Vec<usize> = mus.iter().map(|m| m.atoms().len()).collect();
    let leaves = leaf_bound(widths.iter().flat_map(|&w| std::iter::repeat_n(w as u128, steps)));
    if leaves > MAX_LEAVES {
        return Err(Error::EnumerationTooLarge { leaves, limit: MAX_LEAVES });
    }

    // mixed-radix counter over k·T digits; stream j, slot m is digit j·T + m
    let mut digits = vec![0usize; k * steps];
    let mut law = ExactLaw::new();
    let mut rng = inert_rng();
    loop {
        let mut mass = BigRational::one();
        for (idx, &a) in digits.iter().enumerate() {
            mass *= &mus[idx / steps.max(1)].atoms()[a].1;
        }
        let mut r = rule.clone_box();
        let mut used = vec![0usize; k];
        let mut positions = vec![vec![0i64; d]];
        let mut choices = Vec::with_capacity(steps);
        for _ in 0..steps {
            let j = r.choose(History { positions: &positions, choices: &choices }, &mut rng);
            let atom = &mus[j].atoms()[digits[j * steps + used[j]]].0;
            used[j] += 1;
            let next: Vec<i64> = positions.last().unwrap().iter().zip(atom).map(|(a, b)| a + b).collect();
            positions.push(next);
            choices.push(j);
        }
        *law.entry(positions.pop().unwrap()).or_insert_with(BigRational::zero) += mass;

        let mut pos = 0;
        loop {
            if pos == digits.len() {
                return Ok(law);
            }
            digits[pos] += 1;
            if digits[pos] < widths[pos / steps] {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Total mass of a law.
pub fn total_mass(law: &ExactLaw) -> BigRational {
    law.values().fold(BigRational::zero(), |acc, v| acc + v)
}

/// `½ Σ |p(x) − q(x)|`.
pub fn total_variation(p: &ExactLaw, q: &ExactLaw) -> BigRational {
    let mut keys: Vec<&Vec<i64>> = p.keys().chain(q.keys()).collect();
    keys.sort();
    keys.dedup();
    let zero = BigRational::zero();
    let sum = keys.into_iter().fold(BigRational::zero(), |acc, x| {
        let diff = p.get(x).unwrap_or(&zero) - q.get(x).unwrap_or(&zero);
        acc + if diff < zero { -diff } else { diff }
    });
    sum / BigRational::from_integer(2.into())
}
