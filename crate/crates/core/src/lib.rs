//! Bandit learning in two-sided matching markets.
//!
//! Players learn their unknown preferences over arms by repeatedly
//! attempting to match; arms have known strict rankings over players and
//! accept their favourite attempter each round. The crate provides market
//! generators, stable-matching tools, conflict-avoiding Thompson sampling
//! and UCB learners, explore-then-commit and centralized baselines, a
//! seeded simulation engine and the regret/unstability metrics used to
//! compare them.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common case.

pub mod agents;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod market;
pub mod metrics;
pub mod num;
pub mod rng;
pub mod stability;
mod tagged;
pub mod validate;

pub use agents::{Agent, Algorithm, Learners, Platform, PublicBoard};
pub use engine::{
    checkpoint_grid, resolve_conflicts, run_batch, run_metrics, run_simulation, BatchResult,
    PreservationMonitor, PreservationTally, RoundRecord, RunResult, Simulation, SimulationConfig,
    Trace,
};
pub use error::{Error, Result};
pub use market::{ArmRanks, Market, MarketSpec, RewardModel};
pub use metrics::{MetricSeries, RegretKind};
pub use num::Real;
pub use stability::{
    enumerate_stable_matchings, gale_shapley, is_stable, pessimal_partners, Gaps, Matching, Side,
};

pub type Market64 = Market<f64>;
pub type Market32 = Market<f32>;
pub type Trace64 = Trace<f64>;
pub type Trace32 = Trace<f32>;
pub type BatchResult64 = BatchResult<f64>;
pub type BatchResult32 = BatchResult<f32>;
pub type Gaps64 = Gaps<f64>;
pub type Gaps32 = Gaps<f32>;
pub type MetricSeries64 = MetricSeries<f64>;
pub type MetricSeries32 = MetricSeries<f32>;
