//! Adapted rules: which measure drives the next step, given the walk's past.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measure::FiniteMeasure;
use crate::scalar::Real;

/// Coordinate types a walk can live on.
pub trait Site: Copy + PartialEq + fmt::Debug + Send + Sync + 'static {
    /// Exact integer value, if the coordinate is one.
    fn site_key(self) -> Option<i64>;
}

impl Site for i64 {
    fn site_key(self) -> Option<i64> {
        Some(self)
    }
}

macro_rules! float_site {
    ($t:ty) => {
        impl Site for $t {
            fn site_key(self) -> Option<i64> {
                let limit = (1u64 << (<$t>::MANTISSA_DIGITS)) as $t;
                (self.fract() == 0.0 && self.abs() <= limit).then(|| self as i64)
            }
        }
    };
}
float_site!(f32);
float_site!(f64);

/// What a rule may look at before step `i`: `X₀ … X_i` and `ℓ(0) … ℓ(i−1)`.
#[derive(Clone, Copy, Debug)]
pub struct History<'a, P> {
    pub positions: &'a [Vec<P>],
    pub choices: &'a [usize],
}

impl<P> History<'_, P> {
    /// Current time `i`.
    pub fn time(&self) -> usize {
        self.choices.len()
    }

    pub fn current(&self) -> &[P] {
        self.positions.last().expect("history always holds X_0")
    }
}

/// A measure-selection policy `ℓ`; indices are 0-based.
pub trait AdaptedRule<P>: Send {
    fn choose(&mut self, history: History<'_, P>, rng: &mut dyn RngCore) -> usize;

    /// Fresh copy carrying the current state; used once per trial and per enumeration branch.
    fn clone_box(&self) -> Box<dyn AdaptedRule<P>>;

    /// Serializable snapshot of the internal state.
    fn state(&self) -> Value;

    fn name(&self) -> &'static str;

    /// `true` if the choice is a function of the history alone.
    fn is_deterministic(&self) -> bool {
        true
    }
}

impl<P> Clone for Box<dyn AdaptedRule<P>> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// `ℓ ≡ index`.
#[derive(Clone, Debug)]
pub struct ConstantRule(pub usize);

impl<P: Site> AdaptedRule<P> for ConstantRule {
    fn choose(&mut self, _: History<'_, P>, _: &mut dyn RngCore) -> usize {
        self.0
    }
    fn clone_box(&self) -> Box<dyn AdaptedRule<P>> {
        Box::new(self.clone())
    }
    fn state(&self) -> Value {
        json!({ "index": self.0 })
    }
    fn name(&self) -> &'static str {
        "constant"
    }
}

/// `ℓ(i) = i mod k`.
#[derive(Clone, Debug)]
pub struct AlternatingRule {
    pub k: usize,
}

impl<P: Site> AdaptedRule<P> for AlternatingRule {
    fn choose(&mut self, h: History<'_, P>, _: &mut dyn RngCore) -> usize {
        h.time() % self.k
    }
    fn clone_box(&self) -> Box<dyn AdaptedRule<P>> {
        Box::new(self.clone())
    }
    fn state(&self) -> Value {
        json!({ "k": self.k })
    }
    fn name(&self) -> &'static str {
        "alternating"
    }
}

/// Measure 0 on the first visit to a site, measure 1 on every later visit.
#[derive(Clone, Debug, Default)]
pub struct FirstVisitRule {
    visited: HashSet<Vec<i64>>,
    consumed: usize,
}

impl FirstVisitRule {
    /// Fails unless every atom of every measure is an integer vector, so positions stay on the lattice.
    pub fn new<T: Real + Site>(mus: &[FiniteMeasure<T>]) -> Result<Self> {
        if mus.len() != 2 {
            return Err(Error::InvalidArgument(format!("first-visit rule needs exactly 2 measures, got {}", mus.len())));
        }
        for (j, mu) in mus.iter().enumerate() {
            if !mu.atoms().iter().all(|a| a.point.iter().all(|&c| c.site_key().is_some())) {
                return Err(Error::InvalidMeasure(format!("measure {j} has non-integer atoms")));
            }
        }
        Ok(Self::default())
    }

    /// For integer-valued walks, where the check is vacuous.
    pub fn lattice() -> Self {
        Self::default()
    }

    pub fn visited_count(&self) -> usize {
        self.visited.len()
    }
}

impl<P: Site> AdaptedRule<P> for FirstVisitRule {
    fn choose(&mut self, h: History<'_, P>, _: &mut dyn RngCore) -> usize {
        let key = |x: &Vec<P>| -> Vec<i64> {
            x.iter().map(|c| c.site_key().expect("first-visit rule on a non-lattice position")).collect()
        };
        // history seen so far, excluding the current position
        let now = h.positions.len() - 1;
        if self.consumed > now {
            self.visited.clear();
            self.consumed = 0;
        }
        for x in &h.positions[self.consumed..now] {
            self.visited.insert(key(x));
        }
        self.consumed = now;
        usize::from(self.visited.contains(&key(&h.positions[now])))
    }
    fn clone_box(&self) -> Box<dyn AdaptedRule<P>> {
        Box::new(self.clone())
    }
    fn state(&self) -> Value {
        let mut sites: Vec<&Vec<i64>> = self.visited.iter().collect();
        sites.sort();
        json!({ "visited": sites })
    }
    fn name(&self) -> &'static str {
        "first_visit"
    }
}

/// Potential used by [`GreedyAdversaryRule`].
pub type Potential<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Picks the measure with the smallest exact expected potential increment; ties go to the smaller index.
#[derive(Clone)]
pub struct GreedyAdversaryRule<T> {
    mus: Vec<FiniteMeasure<T>>,
    potential: Potential<T>,
}

impl<T: Real> GreedyAdversaryRule<T> {
    pub fn new(mus: Vec<FiniteMeasure<T>>, potential: Potential<T>) -> Result<Self> {
        if mus.is_empty() {
            return Err(Error::InvalidArgument("greedy rule needs at least one measure".into()));
        }
        Ok(Self { mus, potential })
    }

    /// `E_j[V(x + Z) − V(x)]` for each measure `j`.
    pub fn increments(&self, x: &[T]) -> Vec<T> {
        let v0 = (self.potential)(x);
        self.mus
            .iter()
            .map(|mu| {
                let mut y = x.to_vec();
                mu.atoms().iter().fold(T::zero(), |acc, a| {
                    for (k, yk) in y.iter_mut().enumerate() {
                        *yk = x[k] + a.point[k];
                    }
                    acc + a.weight * ((self.potential)(&y) - v0)
                })
            })
            .collect()
    }

    pub fn pick(&self, x: &[T]) -> usize {
        let inc = self.increments(x);
        let mut best = 0;
        for (j, &v) in inc.iter().enumerate() {
            if v < inc[best] {
                best = j;
            }
        }
        best
    }
}

impl<T: Real + Site> AdaptedRule<T> for GreedyAdversaryRule<T> {
    fn choose(&mut self, h: History<'_, T>, _: &mut dyn RngCore) -> usize {
        self.pick(h.current())
    }
    fn clone_box(&self) -> Box<dyn AdaptedRule<T>> {
        Box::new(self.clone())
    }
    fn state(&self) -> Value {
        json!({ "measures": self.mus.len() })
    }
    fn name(&self) -> &'static str {
        "greedy_adversary"
    }
}

/// Fair coin between measures; not usable by the exact enumerators.
#[derive(Clone, Debug)]
pub struct RandomRule {
    pub k: usize,
}

impl<P: Site> AdaptedRule<P> for RandomRule {
    fn choose(&mut self, _: History<'_, P>, rng: &mut dyn RngCore) -> usize {
        (rng.next_u64() % self.k as u64) as usize
    }
    fn clone_box(&self) -> Box<dyn AdaptedRule<P>> {
        Box::new(self.clone())
    }
    fn state(&self) -> Value {
        json!({ "k": self.k })
    }
    fn name(&self) -> &'static str {
        "random"
    }
    fn is_deterministic(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn history<'a>(pos: &'a [Vec<i64>], ch: &'a [usize]) -> History<'a, i64> {
        History { positions: pos, choices: ch }
    }

    #[test]
    fn first_visit_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut rule = FirstVisitRule::lattice();
        let pos = vec![vec![0i64]];
        assert_eq!(AdaptedRule::<i64>::choose(&mut rule, history(&pos, &[]), &mut rng), 0);
        let pos = vec![vec![0i64], vec![1], vec![0]];
        assert_eq!(AdaptedRule::<i64>::choose(&mut rule, history(&pos, &[0, 0]), &mut rng), 1);
        let mut fresh = FirstVisitRule::lattice();
        let path: Vec<Vec<i64>> = (0..6).map(|k| vec![k]).collect();
        for t in 0..6 {
            let ch = vec![0; t];
            assert_eq!(AdaptedRule::<i64>::choose(&mut fresh, history(&path[..=t], &ch), &mut rng), 0);
        }
    }

    #[test]
    fn first_visit_rejects_fractional_atoms() {
        let a = FiniteMeasure::uniform(vec![vec![0.5], vec![-0.5]]).unwrap();
        let b = FiniteMeasure::uniform(vec![vec![1.0], vec![-1.0]]).unwrap();
        assert!(FirstVisitRule::new(&[a, b.clone()]).is_err());
        assert!(FirstVisitRule::new(&[b.clone(), b]).is_ok());
    }

    #[test]
    fn greedy_ties_go_to_first_measure() {
        let srw = FiniteMeasure::<f64>::simple_random_walk(2);
        let pot: Potential<f64> = Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1]);
        let rule = GreedyAdversaryRule::new(vec![srw.clone(), srw], pot).unwrap();
        assert_eq!(rule.pick(&[3.0, 4.0]), 0);
    }

    #[test]
    fn site_keys() {
        assert_eq!(3.0f64.site_key(), Some(3));
        assert_eq!(0.5f64.site_key(), None);
        assert_eq!((-2.0f32).site_key(), Some(-2));
    }
}
