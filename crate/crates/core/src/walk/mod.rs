//! Walk simulation: adapted-rule walks, the stream reformulation, the γ-walk and the cap walk.

pub mod cap;
pub mod engine;
pub mod enumerate;
pub mod gamma;
pub mod rules;

pub use cap::{build_cap_system, cap_walk_step, find_cap_epsilon, Cap, CapSystem, CapWalk};
pub use engine::{simulate, simulate_stream_model, trial_rng, RuleWalk, StreamTrajectory, Trajectory, WalkProcess};
pub use enumerate::{enumerate_distribution, enumerate_stream_distribution, total_variation, ExactLaw};
pub use gamma::{gamma_walk_step_distribution, gamma_walk_step_measure, simulate_gamma_walk, GammaWalk};
pub use rules::{
    AdaptedRule, AlternatingRule, ConstantRule, FirstVisitRule, GreedyAdversaryRule, History, Potential, RandomRule,
    Site,
};

pub use crate::lyapunov::rho;
