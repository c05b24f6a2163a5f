//! Learning policies.
//!
//! A decentralized [`Agent`] sees only its own memory, the [`PublicBoard`],
//! the public arm rankings and the round index; it never sees the market
//! means or another agent's state. Centralized algorithms implement
//! [`Platform`] and pick the whole matching each round.

mod centralized;
mod conflict_avoiding;
mod etc;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use centralized::{matching_from_scores, CentralizedPlatform};
pub use conflict_avoiding::ConflictAvoiding;
pub use etc::{
    exploitation_rounds, exploration_rounds, staggered_arm, DecentralizedEtc, PhasedEtc,
    ProposalPointer,
};
pub use stats::{ArmStatistic, BetaPosterior, GaussianPosterior, RunningMean, UcbIndex};

use crate::error::{Error, Result};
use crate::market::{ArmRanks, RewardModel};
use crate::num::Real;
use crate::rng::SimRng;
use crate::stability::Matching;
use crate::tagged::deserialize_tagged;

/// Which player each arm accepted in the previous round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicBoard {
    last_accepted: Vec<Option<usize>>,
    round: u64,
}

impl PublicBoard {
    /// The board before round 1: nobody accepted anywhere.
    pub fn empty(n_arms: usize) -> Self {
        Self {
            last_accepted: vec![None; n_arms],
            round: 0,
        }
    }

    /// Publishes the realized matching of round `round`.
    pub fn from_matching(matching: &Matching, round: u64) -> Self {
        Self {
            last_accepted: matching.holders().to_vec(),
            round,
        }
    }

    /// Round the board describes (0 before the first round).
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn n_arms(&self) -> usize {
        self.last_accepted.len()
    }

    #[inline]
    pub fn accepted(&self, arm: usize) -> Option<usize> {
        self.last_accepted[arm]
    }

    pub fn holders(&self) -> &[Option<usize>] {
        &self.last_accepted
    }
}

/// Fills `mask[j]` with whether arm `j` would not reject `player` if last
/// round's attempts repeat: the arm was free, or its accepted player ranks
/// no better than `player`.
pub fn plausible_mask(board: &PublicBoard, player: usize, ranks: &ArmRanks, mask: &mut Vec<bool>) {
    mask.clear();
    mask.extend((0..board.n_arms()).map(|j| match board.accepted(j) {
        None => true,
        Some(holder) => ranks.rank(j, player) <= ranks.rank(j, holder),
    }));
}

/// Arms in the plausible set of `player`, ascending. Never empty once
/// `N <= K`, since some arm is always free or held by the player itself.
pub fn plausible_set(board: &PublicBoard, player: usize, ranks: &ArmRanks) -> Vec<usize> {
    let mut mask = Vec::with_capacity(board.n_arms());
    plausible_mask(board, player, ranks, &mut mask);
    mask.iter()
        .enumerate()
        .filter_map(|(j, &ok)| ok.then_some(j))
        .collect()
}

/// Everything an agent may read when choosing an arm.
#[derive(Debug, Clone, Copy)]
pub struct View<'a> {
    pub board: &'a PublicBoard,
    pub ranks: &'a ArmRanks,
    pub t: u64,
}

/// The plausible set and per-arm indices behind an index-based decision,
/// exposed for trace instrumentation.
#[derive(Debug, Clone, Copy)]
pub struct Probe<'a, T> {
    pub plausible: &'a [bool],
    pub scores: &'a [T],
}

pub trait Agent<T: Real>: Send {
    /// The arm this agent attempts at round `view.t`.
    fn act(&mut self, view: &View<'_>, rng: &mut SimRng) -> usize;

    /// Outcome of the last attempt: `Some(reward)` if accepted.
    fn observe(&mut self, arm: usize, reward: Option<T>, rng: &mut SimRng) -> Result<()>;

    /// Indices behind the last decision, when the policy is index-based
    /// and the last round was not a scheduled exploration round.
    fn probe(&self) -> Option<Probe<'_, T>> {
        None
    }
}

/// A platform that matches all players centrally each round.
pub trait Platform<T: Real>: Send {
    fn step(&mut self, ranks: &ArmRanks, t: u64, rng: &mut SimRng) -> Matching;

    /// Rewards indexed by player; `None` for unmatched players.
    fn observe(
        &mut self,
        matching: &Matching,
        rewards: &[Option<T>],
        rng: &mut SimRng,
    ) -> Result<()>;
}

pub enum Learners<T: Real> {
    Decentralized(Vec<Box<dyn Agent<T>>>),
    Centralized(Box<dyn Platform<T>>),
}

fn default_lambda() -> f64 {
    0.1
}

fn default_h() -> u64 {
    200
}

fn default_epsilon() -> f64 {
    0.2
}

/// Algorithm choice and hyperparameters as they appear in configs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Algorithm {
    /// Conflict-avoiding Thompson sampling with Beta posteriors.
    CaTs {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    /// Conflict-avoiding Thompson sampling with Gaussian posteriors.
    CaTsGaussian {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    CaUcb {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    DEtc {
        #[serde(default = "default_h")]
        h: u64,
    },
    PEtc {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    CentralizedTs,
    CentralizedUcb,
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
enum AlgorithmFields {
    CaTs {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    CaTsGaussian {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    CaUcb {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    DEtc {
        #[serde(default = "default_h")]
        h: u64,
    },
    PEtc {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    CentralizedTs {},
    CentralizedUcb {},
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match deserialize_tagged::<D, AlgorithmFields>(d, "kind")? {
            AlgorithmFields::CaTs { lambda } => Algorithm::CaTs { lambda },
            AlgorithmFields::CaTsGaussian { lambda } => Algorithm::CaTsGaussian { lambda },
            AlgorithmFields::CaUcb { lambda } => Algorithm::CaUcb { lambda },
            AlgorithmFields::DEtc { h } => Algorithm::DEtc { h },
            AlgorithmFields::PEtc { epsilon } => Algorithm::PEtc { epsilon },
            AlgorithmFields::CentralizedTs {} => Algorithm::CentralizedTs,
            AlgorithmFields::CentralizedUcb {} => Algorithm::CentralizedUcb,
        })
    }
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::CaTs { .. } => "CA-TS",
            Algorithm::CaTsGaussian { .. } => "CA-TS-Gauss",
            Algorithm::CaUcb { .. } => "CA-UCB",
            Algorithm::DEtc { .. } => "D-ETC",
            Algorithm::PEtc { .. } => "P-ETC",
            Algorithm::CentralizedTs => "Centralized-TS",
            Algorithm::CentralizedUcb => "Centralized-UCB",
        }
    }

    pub fn is_centralized(&self) -> bool {
        matches!(self, Algorithm::CentralizedTs | Algorithm::CentralizedUcb)
    }

    /// Checks hyperparameter ranges and the reward-model pairing.
    pub fn validate(&self, reward_model: RewardModel) -> Result<()> {
        match *self {
            Algorithm::CaTs { lambda }
            | Algorithm::CaTsGaussian { lambda }
            | Algorithm::CaUcb { lambda } => {
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "lambda",
                        reason: format!("must lie in (0, 1), got {lambda}"),
                    });
                }
            }
            Algorithm::DEtc { h } => {
                if h == 0 {
                    return Err(Error::InvalidParameter {
                        name: "h",
                        reason: "exploration budget must be at least 1".into(),
                    });
                }
            }
            Algorithm::PEtc { epsilon } => {
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "epsilon",
                        reason: format!("must be positive, got {epsilon}"),
                    });
                }
            }
            Algorithm::CentralizedTs | Algorithm::CentralizedUcb => {}
        }
        let binarizes = matches!(self, Algorithm::CaTs { .. } | Algorithm::CentralizedTs);
        if binarizes && reward_model != RewardModel::Bernoulli {
            return Err(Error::Incompatible {
                algorithm: self.label().into(),
                reward_model: reward_model.name().into(),
            });
        }
        Ok(())
    }

    pub fn build<T: Real>(
        &self,
        n_players: usize,
        n_arms: usize,
        reward_model: RewardModel,
    ) -> Result<Learners<T>> {
        self.validate(reward_model)?;
        let learners = match *self {
            Algorithm::CaTs { lambda } => Learners::Decentralized(agents(n_players, |i| {
                ConflictAvoiding::<T, BetaPosterior>::new(i, n_arms, T::lit(lambda), 0)
            })),
            Algorithm::CaTsGaussian { lambda } => Learners::Decentralized(agents(n_players, |i| {
                ConflictAvoiding::<T, GaussianPosterior<T>>::new(
                    i,
                    n_arms,
                    T::lit(lambda),
                    n_arms as u64,
                )
            })),
            Algorithm::CaUcb { lambda } => Learners::Decentralized(agents(n_players, |i| {
                ConflictAvoiding::<T, UcbIndex<T>>::new(i, n_arms, T::lit(lambda), 0)
            })),
            Algorithm::DEtc { h } => Learners::Decentralized(agents(n_players, |i| {
                DecentralizedEtc::<T>::new(i, n_arms, h)
            })),
            Algorithm::PEtc { epsilon } => Learners::Decentralized(agents(n_players, |i| {
                PhasedEtc::<T>::new(i, n_arms, epsilon)
            })),
            Algorithm::CentralizedTs => {
                Learners::Centralized(Box::new(CentralizedPlatform::<T, BetaPosterior>::new(
                    n_players, n_arms,
                )))
            }
            Algorithm::CentralizedUcb => {
                Learners::Centralized(Box::new(CentralizedPlatform::<T, UcbIndex<T>>::new(
                    n_players, n_arms,
                )))
            }
        };
        Ok(learners)
    }
}

fn agents<T: Real, A: Agent<T> + 'static>(
    n_players: usize,
    make: impl Fn(usize) -> A,
) -> Vec<Box<dyn Agent<T>>> {
    (0..n_players)
        .map(|i| Box::new(make(i)) as Box<dyn Agent<T>>)
        .collect()
}
