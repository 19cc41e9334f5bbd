//! Path simulation for the adapted-rule walk and its i.i.d.-stream reformulation.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::FiniteMeasure;
use crate::scalar::Real;
use crate::walk::rules::{AdaptedRule, History, Site};

/// `X₀ = 0, X₁, …, X_T` together with `ℓ(0), …, ℓ(T−1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory<P> {
    pub positions: Vec<Vec<P>>,
    pub choices: Vec<usize>,
    pub seed: u64,
}

impl<P: Copy + std::fmt::Display> Trajectory<P> {
    pub fn steps(&self) -> usize {
        self.choices.len()
    }

    /// CSV `t,x0,…,x{d−1},choice`; the last row has an empty choice.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.positions.first().map_or(0, Vec::len);
        let mut header = String::from("t");
        for k in 0..d {
            header.push_str(&format!(",x{k}"));
        }
        writeln!(out, "{header},choice")?;
        for (t, x) in self.positions.iter().enumerate() {
            write!(out, "{t}")?;
            for c in x {
                write!(out, ",{c}")?;
            }
            match self.choices.get(t) {
                Some(c) => writeln!(out, ",{c}")?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}

/// RNG for trial `trial` under `master`: one ChaCha stream per trial.
pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng
}

pub(crate) fn check_dims<T: Real>(mus: &[FiniteMeasure<T>]) -> Result<usize> {
    let d = mus.first().ok_or_else(|| Error::InvalidArgument("no step measures".into()))?.dim();
    for mu in mus {
        if mu.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mu.dim() });
        }
    }
    Ok(d)
}

fn checked_choice(j: usize, k: usize) -> usize {
    assert!(j < k, "rule chose measure {j} but only {k} are available");
    j
}

/// Definition-style walk: consult the rule, then draw one atom of the chosen measure.
pub fn simulate<T: Real + Site, R: Rng>(
    mus: &[FiniteMeasure<T>],
    rule: &dyn AdaptedRule<T>,
    steps: usize,
    rng: &mut R,
) -> Result<Trajectory<T>> {
    let d = check_dims(mus)?;
    let mut rule = rule.clone_box();
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(vec![T::zero(); d]);
    let mut choices = Vec::with_capacity(steps);
    for _ in 0..steps {
        let j = checked_choice(rule.choose(History { positions: &positions, choices: &choices }, rng), mus.len());
        let z = mus[j].sample(rng);
        let next: Vec<T> = positions.last().unwrap().iter().zip(z).map(|(&a, &b)| a + b).collect();
        positions.push(next);
        choices.push(j);
    }
    Ok(Trajectory { positions, choices, seed: 0 })
}

/// Path from the stream engine plus the consumption counters `r(j, i)` for `i = 0..=T`.
#[derive(Clone, Debug, Serialize)]
pub struct StreamTrajectory<P> {
    pub path: Trajectory<P>,
    pub counters: Vec<Vec<usize>>,
}

/// The stream reformulation: measure `j` owns a pre-committed i.i.d. sequence `ζ^j₁, ζ^j₂, …`,
/// and step `i` uses the next unused element of stream `ℓ(i)`.
///
/// Stream `j` is a ChaCha generator seeded from the `j`-th word drawn from `rng`,
/// so its values are fixed before the walk starts.
pub fn simulate_stream_model<T: Real + Site, R: Rng>(
    mus: &[FiniteMeasure<T>],
    rule: &dyn AdaptedRule<T>,
    steps: usize,
    rng: &mut R,
) -> Result<StreamTrajectory<T>> {
    let d = check_dims(mus)?;
    let k = mus.len();
    let mut streams: Vec<ChaCha8Rng> = (0..k).map(|_| ChaCha8Rng::seed_from_u64(rng.next_u64())).collect();
    let mut rule = rule.clone_box();
    let mut counters = vec![vec![0usize; k]];
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(vec![T::zero(); d]);
    let mut choices = Vec::with_capacity(steps);
    for _ in 0..steps {
        let j = checked_choice(rule.choose(History { positions: &positions, choices: &choices }, rng), k);
        let z = mus[j].sample(&mut streams[j]);
        let next: Vec<T> = positions.last().unwrap().iter().zip(z).map(|(&a, &b)| a + b).collect();
        positions.push(next);
        choices.push(j);
        let mut c = counters.last().unwrap().clone();
        c[j] += 1;
        counters.push(c);
    }
    Ok(StreamTrajectory { path: Trajectory { positions, choices, seed: 0 }, counters })
}

/// A walk advanced one step at a time, without keeping the path.
pub trait WalkProcess: Send {
    fn dim(&self) -> usize;
    fn position(&self) -> Vec<f64>;
    fn norm_sq(&self) -> f64;
    /// Advances one step and returns the choice made (measure, coordinate or cap index).
    fn step(&mut self, rng: &mut dyn RngCore) -> usize;
}

/// Adapted-rule walk as a [`WalkProcess`]; keeps the history the rule may inspect.
pub struct RuleWalk<T: Real + Site> {
    mus: Vec<FiniteMeasure<T>>,
    rule: Box<dyn AdaptedRule<T>>,
    positions: Vec<Vec<T>>,
    choices: Vec<usize>,
    streams: Option<Vec<ChaCha8Rng>>,
}

impl<T: Real + Site> RuleWalk<T> {
    pub fn new(mus: Vec<FiniteMeasure<T>>, rule: &dyn AdaptedRule<T>) -> Result<Self> {
        let d = check_dims(&mus)?;
        Ok(Self { mus, rule: rule.clone_box(), positions: vec![vec![T::zero(); d]], choices: vec![], streams: None })
    }

    /// Same walk driven by the stream engine; stream seeds are drawn from `rng` up front.
    pub fn new_stream_model(mus: Vec<FiniteMeasure<T>>, rule: &dyn AdaptedRule<T>, rng: &mut dyn RngCore) -> Result<Self> {
        let mut w = Self::new(mus, rule)?;
        w.streams = Some((0..w.mus.len()).map(|_| ChaCha8Rng::seed_from_u64(rng.next_u64())).collect());
        Ok(w)
    }
}

impl<T: Real + Site> WalkProcess for RuleWalk<T> {
    fn dim(&self) -> usize {
        self.mus[0].dim()
    }

    fn position(&self) -> Vec<f64> {
        self.positions.last().unwrap().iter().map(|v| v.as_f64()).collect()
    }

    fn norm_sq(&self) -> f64 {
        self.positions.last().unwrap().iter().map(|v| v.as_f64() * v.as_f64()).sum()
    }

    fn step(&mut self, rng: &mut dyn RngCore) -> usize {
        let j = checked_choice(
            self.rule.choose(History { positions: &self.positions, choices: &self.choices }, rng),
            self.mus.len(),
        );
        let z = match self.streams.as_mut() {
            Some(s) => self.mus[j].sample(&mut s[j]),
            None => self.mus[j].sample(rng),
        };
        let next: Vec<T> = self.positions.last().unwrap().iter().zip(z).map(|(&a, &b)| a + b).collect();
        self.positions.push(next);
        self.choices.push(j);
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::rules::{AlternatingRule, ConstantRule};

    fn two_measures() -> Vec<FiniteMeasure<f64>> {
        vec![
            FiniteMeasure::uniform(vec![vec![1.0], vec![-1.0]]).unwrap(),
            FiniteMeasure::uniform(vec![vec![2.0], vec![-2.0]]).unwrap(),
        ]
    }

    #[test]
    fn constant_rule_uses_one_measure() {
        let mus = two_measures();
        let t = simulate(&mus, &ConstantRule(1), 50, &mut trial_rng(3, 0)).unwrap();
        assert!(t.choices.iter().all(|&c| c == 1));
        for w in t.positions.windows(2) {
            assert_eq!((w[1][0] - w[0][0]).abs(), 2.0);
        }
        assert_eq!(t.positions[0], vec![0.0]);
    }

    #[test]
    fn same_seed_same_path() {
        let mus = two_measures();
        let rule = AlternatingRule { k: 2 };
        let a = simulate(&mus, &rule, 100, &mut trial_rng(9, 4)).unwrap();
        let b = simulate(&mus, &rule, 100, &mut trial_rng(9, 4)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&mus, &rule, 100, &mut trial_rng(9, 5)).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn stream_counters_partition_time() {
        let mus = two_measures();
        let st = simulate_stream_model(&mus, &AlternatingRule { k: 2 }, 40, &mut trial_rng(1, 0)).unwrap();
        for (i, c) in st.counters.iter().enumerate() {
            assert_eq!(c.iter().sum::<usize>(), i);
        }
    }

    #[test]
    fn stream_process_matches_function() {
        let mus = two_measures();
        let rule = AlternatingRule { k: 2 };
        let st = simulate_stream_model(&mus, &rule, 30, &mut trial_rng(5, 2)).unwrap();
        let mut rng = trial_rng(5, 2);
        let mut w = RuleWalk::new_stream_model(mus, &rule, &mut rng).unwrap();
        for t in 1..=30 {
            w.step(&mut rng);
            assert_eq!(w.position(), st.path.positions[t]);
        }
    }

    #[test]
    fn csv_layout() {
        let mus = two_measures();
        let t = simulate(&mus, &ConstantRule(0), 2, &mut trial_rng(0, 0)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,x0,choice");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].ends_with(','));
    }
}
