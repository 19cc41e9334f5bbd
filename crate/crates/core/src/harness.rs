//! Monte Carlo return experiments, parameter sweeps and their persistence.
//!
//! Each trial runs one walk for `horizon` steps from the origin and records the
//! first time `‖X_n‖ ≥ R`, the number of later times with `‖X_n‖ ≤ r`, and the
//! final norm. These are finite-horizon diagnostics; they do not certify
//! recurrence or transience.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{phi_tilde, PhiParams};
use crate::measure::FiniteMeasure;
use crate::scalar::pairwise_sum;
use crate::walk::cap::{build_cap_system, CapSystem, CapWalk};
use crate::walk::engine::{trial_rng, RuleWalk, WalkProcess};
use crate::walk::gamma::GammaWalk;
use crate::walk::rules::{
    AdaptedRule, AlternatingRule, ConstantRule, FirstVisitRule, GreedyAdversaryRule, Potential, RandomRule,
};

/// Bumped whenever the JSON layout changes.
pub const SCHEMA_VERSION: u32 = 1;
/// Per-trial CSV header.
pub const TRIAL_CSV_HEADER: &str = "trial,exit_time,returned,return_count,final_norm";
/// Sweep CSV header.
pub const SWEEP_CSV_HEADER: &str = "parameter,value,seed,trials,exit_fraction,exit_fraction_se,return_fraction,return_fraction_se,mean_return_count,mean_return_count_se,mean_final_norm,mean_final_norm_se";

fn default_theta() -> f64 {
    std::f64::consts::PI / 5.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Draw from the chosen measure at each step.
    #[default]
    Definition,
    /// Consume pre-committed per-measure streams.
    Stream,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum RuleSpec {
    Constant { index: usize },
    Alternating,
    FirstVisit,
    Random,
    /// Greedy adversary with potential `−φ̃`.
    GreedyPhi { alpha: f64, r0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WalkSpec {
    Generic {
        measures: Vec<FiniteMeasure<f64>>,
        rule: RuleSpec,
        #[serde(default)]
        engine: Engine,
    },
    Gamma {
        d: usize,
        gamma: f64,
    },
    Cap {
        d: usize,
        eps: f64,
        #[serde(default = "default_theta")]
        theta: f64,
    },
}

impl WalkSpec {
    pub fn dim(&self) -> usize {
        match self {
            WalkSpec::Generic { measures, .. } => measures.first().map_or(0, |m| m.dim()),
            WalkSpec::Gamma { d, .. } | WalkSpec::Cap { d, .. } => *d,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub walk: WalkSpec,
    pub trials: usize,
    pub horizon: usize,
    pub return_radius: f64,
    pub escape_radius: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.horizon == 0 {
            return Err(Error::InvalidArgument("trials and horizon must be at least 1".into()));
        }
        if !(self.return_radius >= 0.0 && self.return_radius < self.escape_radius) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= return_radius < escape_radius, got {} and {}",
                self.return_radius, self.escape_radius
            )));
        }
        if self.walk.dim() == 0 {
            return Err(Error::InvalidArgument("walk has dimension 0".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Shared, trial-independent parts of a walk.
pub enum PreparedWalk {
    // rules are Send but not Sync; each trial clones its own copy under the lock
    Rule { measures: Vec<FiniteMeasure<f64>>, rule: Mutex<Box<dyn AdaptedRule<f64>>>, engine: Engine },
    Gamma { d: usize, gamma: f64 },
    Cap { caps: Arc<CapSystem>, eps: f64 },
}

impl PreparedWalk {
    /// Builds rules and cap systems; the cap covering check draws from a stream derived from `seed`.
    pub fn new(spec: &WalkSpec, seed: u64) -> Result<Self> {
        Ok(match spec {
            WalkSpec::Generic { measures, rule, engine } => {
                let k = measures.len();
                let rule: Box<dyn AdaptedRule<f64>> = match rule {
                    RuleSpec::Constant { index } => {
                        if *index >= k {
                            return Err(Error::InvalidArgument(format!("rule index {index} but only {k} measures")));
                        }
                        Box::new(ConstantRule(*index))
                    }
                    RuleSpec::Alternating => Box::new(AlternatingRule { k }),
                    RuleSpec::FirstVisit => Box::new(FirstVisitRule::new(measures)?),
                    RuleSpec::Random => Box::new(RandomRule { k }),
                    RuleSpec::GreedyPhi { alpha, r0 } => {
                        let p = PhiParams::new(*alpha, *r0)?;
                        let pot: Potential<f64> = Arc::new(move |x: &[f64]| -phi_tilde(x, &p));
                        Box::new(GreedyAdversaryRule::new(measures.clone(), pot)?)
                    }
                };
                PreparedWalk::Rule { measures: measures.clone(), rule: Mutex::new(rule), engine: *engine }
            }
            WalkSpec::Gamma { d, gamma } => {
                GammaWalk::new(*d, *gamma)?;
                PreparedWalk::Gamma { d: *d, gamma: *gamma }
            }
            WalkSpec::Cap { d, eps, theta } => {
                let caps = Arc::new(build_cap_system(*d, *theta, &mut trial_rng(seed, u64::MAX))?);
                CapWalk::new(caps.clone(), *eps)?;
                PreparedWalk::Cap { caps, eps: *eps }
            }
        })
    }

    pub fn instantiate(&self, rng: &mut dyn RngCore) -> Result<Box<dyn WalkProcess>> {
        Ok(match self {
            PreparedWalk::Rule { measures, rule, engine } => {
                let rule = rule.lock().expect("rule lock poisoned").clone_box();
                match engine {
                    Engine::Definition => Box::new(RuleWalk::new(measures.clone(), rule.as_ref())?),
                    Engine::Stream => Box::new(RuleWalk::new_stream_model(measures.clone(), rule.as_ref(), rng)?),
                }
            }
            PreparedWalk::Gamma { d, gamma } => Box::new(GammaWalk::new(*d, *gamma)?),
            PreparedWalk::Cap { caps, eps } => Box::new(CapWalk::new(caps.clone(), *eps)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trial: u64,
    /// First `n` with `‖X_n‖ ≥ R`.
    pub exit_time: Option<u64>,
    /// Whether `‖X_n‖ ≤ r` for some `n` after the exit.
    pub returned: bool,
    pub return_count: u64,
    pub final_norm: f64,
}

/// Runs one trial on its own RNG stream.
pub fn run_trial(prepared: &PreparedWalk, cfg: &ExperimentConfig, trial: u64) -> Result<TrialStats> {
    let mut rng = trial_rng(cfg.seed, trial);
    let mut walk = prepared.instantiate(&mut rng)?;
    let (r2, big_r2) = (cfg.return_radius * cfg.return_radius, cfg.escape_radius * cfg.escape_radius);
    let mut exit_time = None;
    let mut return_count = 0u64;
    for n in 1..=cfg.horizon as u64 {
        walk.step(&mut rng);
        let n2 = walk.norm_sq();
        if exit_time.is_some() {
            if n2 <= r2 {
                return_count += 1;
            }
        } else if n2 >= big_r2 {
            exit_time = Some(n);
        }
    }
    Ok(TrialStats { trial, exit_time, returned: return_count > 0, return_count, final_norm: walk.norm_sq().sqrt() })
}

/// A mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Binomial: `√(p̂(1−p̂)/n)`.
    pub fn proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self { mean: p, se: (p * (1.0 - p) / n as f64).sqrt() }
    }

    /// Sample mean with `s/√n` (zero for a single value).
    pub fn sample(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = pairwise_sum(xs) / n;
        if xs.len() < 2 {
            return Self { mean, se: 0.0 };
        }
        let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        Self { mean, se: (pairwise_sum(&sq) / (n - 1.0) / n).sqrt() }
    }
}

/// 10%, 50% and 90% quantiles (linear interpolation between order statistics).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

impl Quantiles {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self { q10: q(0.1), q50: q(0.5), q90: q(0.9) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: usize,
    pub exit_fraction: Estimate,
    pub return_fraction: Estimate,
    pub return_count: Estimate,
    pub final_norm: Estimate,
    /// Over trials that exited.
    pub exit_time: Option<Estimate>,
    pub exit_time_quantiles: Option<Quantiles>,
    pub final_norm_quantiles: Option<Quantiles>,
}

impl Aggregates {
    pub fn from_trials(trials: &[TrialStats]) -> Result<Self> {
        let n = trials.len();
        if n == 0 {
            return Err(Error::InvalidArgument("no trials to aggregate".into()));
        }
        let exits: Vec<f64> = trials.iter().filter_map(|t| t.exit_time.map(|e| e as f64)).collect();
        let counts: Vec<f64> = trials.iter().map(|t| t.return_count as f64).collect();
        let norms: Vec<f64> = trials.iter().map(|t| t.final_norm).collect();
        Ok(Self {
            trials: n,
            exit_fraction: Estimate::proportion(exits.len(), n),
            return_fraction: Estimate::proportion(trials.iter().filter(|t| t.returned).count(), n),
            return_count: Estimate::sample(&counts),
            final_norm: Estimate::sample(&norms),
            exit_time: (!exits.is_empty()).then(|| Estimate::sample(&exits)),
            exit_time_quantiles: Quantiles::of(&exits),
            final_norm_quantiles: Quantiles::of(&norms),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub aggregates: Aggregates,
    pub trials: Vec<TrialStats>,
}

/// Runs every trial (in parallel, one RNG stream per trial) and aggregates.
///
/// If `cfg.out` is set the result is also written there in `cfg.format`.
pub fn run_return_experiment(cfg: &ExperimentConfig) -> Result<ReturnStats> {
    cfg.validate()?;
    let prepared = PreparedWalk::new(&cfg.walk, cfg.seed)?;
    let trials: Vec<TrialStats> =
        (0..cfg.trials as u64).into_par_iter().map(|t| run_trial(&prepared, cfg, t)).collect::<Result<_>>()?;
    let stats = ReturnStats { schema: SCHEMA_VERSION, config: cfg.clone(), aggregates: Aggregates::from_trials(&trials)?, trials };
    if let Some(path) = &cfg.out {
        emit_to_path(&Report::Trials(&stats), cfg.format, path)?;
    }
    Ok(stats)
}

/// Parameters a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Gamma,
    Eps,
    Horizon,
    ReturnRadius,
    EscapeRadius,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Eps => "eps",
            SweepParam::Horizon => "horizon",
            SweepParam::ReturnRadius => "return_radius",
            SweepParam::EscapeRadius => "escape_radius",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "gamma" => SweepParam::Gamma,
            "eps" => SweepParam::Eps,
            "horizon" => SweepParam::Horizon,
            "return_radius" => SweepParam::ReturnRadius,
            "escape_radius" => SweepParam::EscapeRadius,
            other => return Err(Error::InvalidArgument(format!("unknown sweep parameter '{other}'"))),
        })
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        match (self, &mut cfg.walk) {
            (SweepParam::Gamma, WalkSpec::Gamma { gamma, .. }) => *gamma = value,
            (SweepParam::Eps, WalkSpec::Cap { eps, .. }) => *eps = value,
            (SweepParam::Horizon, _) => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidArgument(format!("horizon must be a positive integer, got {value}")));
                }
                cfg.horizon = value as usize;
            }
            (SweepParam::ReturnRadius, _) => cfg.return_radius = value,
            (SweepParam::EscapeRadius, _) => cfg.escape_radius = value,
            (p, _) => {
                return Err(Error::InvalidArgument(format!("parameter '{}' does not apply to this walk", p.name())));
            }
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one grid point: depends only on the master seed, the parameter and its value.
pub fn derive_seed(master: u64, param: SweepParam, value: f64) -> u64 {
    let tag = param.name().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    splitmix64(splitmix64(master ^ tag) ^ value.to_bits())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: SweepParam,
    pub value: f64,
    pub seed: u64,
    pub aggregates: Aggregates,
}

/// One experiment per grid value, each with its own derived seed.
pub fn sweep(base: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    values
        .iter()
        .map(|&value| {
            let mut cfg = base.clone();
            cfg.out = None;
            param.apply(&mut cfg, value)?;
            cfg.seed = derive_seed(base.seed, param, value);
            let stats = run_return_experiment(&cfg)?;
            Ok(SweepRow { parameter: param, value, seed: cfg.seed, aggregates: stats.aggregates })
        })
        .collect()
}

/// Anything [`emit`] can write.
pub enum Report<'a> {
    Trials(&'a ReturnStats),
    Sweep(&'a [SweepRow]),
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct SweepReport {
    pub schema: u32,
    pub rows: Vec<SweepRow>,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a report: CSV with a fixed header, or versioned JSON.
pub fn emit<W: Write>(report: &Report<'_>, format: Format, mut out: W) -> Result<()> {
    match (report, format) {
        (Report::Trials(stats), Format::Csv) => {
            writeln!(out, "{TRIAL_CSV_HEADER}")?;
            for t in &stats.trials {
                let exit = t.exit_time.map(|e| e.to_string()).unwrap_or_default();
                writeln!(out, "{},{},{},{},{}", t.trial, exit, u8::from(t.returned), t.return_count, float(t.final_norm))?;
            }
        }
        (Report::Sweep(rows), Format::Csv) => {
            writeln!(out, "{SWEEP_CSV_HEADER}")?;
            for r in rows.iter() {
                let a = &r.aggregates;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.parameter.name(),
                    float(r.value),
                    r.seed,
                    a.trials,
                    float(a.exit_fraction.mean),
                    float(a.exit_fraction.se),
                    float(a.return_fraction.mean),
                    float(a.return_fraction.se),
                    float(a.return_count.mean),
                    float(a.return_count.se),
                    float(a.final_norm.mean),
                    float(a.final_norm.se)
                )?;
            }
        }
        (Report::Trials(stats), Format::Json) => {
            serde_json::to_writer_pretty(&mut out, stats)?;
            writeln!(out)?;
        }
        (Report::Sweep(rows), Format::Json) => {
            serde_json::to_writer_pretty(&mut out, &SweepReport { schema: SCHEMA_VERSION, rows: rows.to_vec() })?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn emit_to_path(report: &Report<'_>, format: Format, path: &Path) -> Result<()> {
    emit(report, format, BufWriter::new(File::create(path)?))
}
