//! Explore-then-commit baselines.
//!
//! Both learners explore with a staggered round-robin that is collision-free
//! for distinct players when `N <= K`, then play deferred acceptance through
//! live rounds: propose to the pointer arm of the estimated ranking every
//! round and move the pointer down one arm whenever rejected.
//!
//! Players are assumed to know their own index, which they can read off any
//! arm's public ranking.

use super::stats::RunningMean;
use super::{Agent, View};
use crate::error::Result;
use crate::market::order_by_score;
use crate::num::Real;
use crate::rng::SimRng;

/// Arm of `player` at exploration round `t` (1-based): `(t - 1 + i) mod K`.
#[inline]
pub fn staggered_arm(player: usize, n_arms: usize, t: u64) -> usize {
    ((t - 1 + player as u64) % n_arms as u64) as usize
}

/// Player-side pointer for deferred acceptance through play.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposalPointer {
    order: Vec<usize>,
    pos: usize,
}

impl ProposalPointer {
    pub fn new(order: Vec<usize>) -> Self {
        assert!(!order.is_empty());
        Self { order, pos: 0 }
    }

    pub fn current(&self) -> usize {
        self.order[self.pos]
    }

    /// Advance past the current arm after a rejection; never retreats.
    pub fn rejected(&mut self) {
        if self.pos + 1 < self.order.len() {
            self.pos += 1;
        }
    }

    pub fn position(&self) -> usize {
        self.pos
    }
}

/// Decentralized ETC: `H` observations per arm, then commit.
#[derive(Debug, Clone)]
pub struct DecentralizedEtc<T: Real> {
    player: usize,
    budget: u64,
    means: Vec<RunningMean<T>>,
    pointer: Option<ProposalPointer>,
    exploring: bool,
}

impl<T: Real> DecentralizedEtc<T> {
    pub fn new(player: usize, n_arms: usize, h: u64) -> Self {
        Self {
            player,
            budget: h * n_arms as u64,
            means: vec![RunningMean::default(); n_arms],
            pointer: None,
            exploring: true,
        }
    }

    pub fn means(&self) -> &[RunningMean<T>] {
        &self.means
    }

    /// Starts committing with a given estimated ranking, skipping exploration.
    pub fn commit_to(&mut self, order: Vec<usize>) {
        self.budget = 0;
        self.pointer = Some(ProposalPointer::new(order));
    }

    pub fn pointer(&self) -> Option<&ProposalPointer> {
        self.pointer.as_ref()
    }
}

impl<T: Real> Agent<T> for DecentralizedEtc<T> {
    fn act(&mut self, view: &View<'_>, _rng: &mut SimRng) -> usize {
        let k = self.means.len();
        if view.t <= self.budget {
            self.exploring = true;
            return staggered_arm(self.player, k, view.t);
        }
        self.exploring = false;
        let means = &self.means;
        self.pointer
            .get_or_insert_with(|| {
                let m: Vec<T> = means.iter().map(RunningMean::mean).collect();
                ProposalPointer::new(order_by_score(&m))
            })
            .current()
    }

    fn observe(&mut self, arm: usize, reward: Option<T>, _rng: &mut SimRng) -> Result<()> {
        if self.exploring {
            if let Some(x) = reward {
                self.means[arm].push(x);
            }
        } else if reward.is_none() {
            if let Some(p) = self.pointer.as_mut() {
                p.rejected();
            }
        }
        Ok(())
    }
}

/// Exploration rounds in phase `phase >= 1`:
/// `K * (ceil((phase + 1)^(1 + eps)) - ceil(phase^(1 + eps)))`.
pub fn exploration_rounds(n_arms: usize, phase: u32, epsilon: f64) -> u64 {
    let grow = |p: u32| (p as f64).powf(1.0 + epsilon).ceil() as u64;
    n_arms as u64 * (grow(phase + 1) - grow(phase))
}

/// Exploitation rounds in phase `phase`: `2^phase`.
pub fn exploitation_rounds(phase: u32) -> u64 {
    1u64.checked_shl(phase).unwrap_or(u64::MAX)
}

/// Phased ETC: alternating exploration blocks of polynomially growing
/// length and exploitation blocks of doubling length. Pointers are rebuilt
/// from the current means at the start of every exploitation block.
#[derive(Debug, Clone)]
pub struct PhasedEtc<T: Real> {
    player: usize,
    epsilon: f64,
    means: Vec<RunningMean<T>>,
    phase: u32,
    phase_start: u64,
    explore_len: u64,
    exploit_len: u64,
    pointer: Option<ProposalPointer>,
    exploring: bool,
}

impl<T: Real> PhasedEtc<T> {
    pub fn new(player: usize, n_arms: usize, epsilon: f64) -> Self {
        Self {
            player,
            epsilon,
            means: vec![RunningMean::default(); n_arms],
            phase: 1,
            phase_start: 1,
            explore_len: exploration_rounds(n_arms, 1, epsilon),
            exploit_len: exploitation_rounds(1),
            pointer: None,
            exploring: true,
        }
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    fn advance_to(&mut self, t: u64) {
        while t
            >= self
                .phase_start
                .saturating_add(self.explore_len + self.exploit_len)
        {
            self.phase_start += self.explore_len + self.exploit_len;
            self.phase += 1;
            self.explore_len = exploration_rounds(self.means.len(), self.phase, self.epsilon);
            self.exploit_len = exploitation_rounds(self.phase);
            self.pointer = None;
        }
    }
}

impl<T: Real> Agent<T> for PhasedEtc<T> {
    fn act(&mut self, view: &View<'_>, _rng: &mut SimRng) -> usize {
        self.advance_to(view.t);
        let k = self.means.len();
        let offset = view.t - self.phase_start;
        if offset < self.explore_len {
            self.exploring = true;
            return staggered_arm(self.player, k, offset + 1);
        }
        self.exploring = false;
        let means = &self.means;
        self.pointer
            .get_or_insert_with(|| {
                let m: Vec<T> = means.iter().map(RunningMean::mean).collect();
                ProposalPointer::new(order_by_score(&m))
            })
            .current()
    }

    fn observe(&mut self, arm: usize, reward: Option<T>, _rng: &mut SimRng) -> Result<()> {
        if self.exploring {
            if let Some(x) = reward {
                self.means[arm].push(x);
            }
        } else if reward.is_none() {
            if let Some(p) = self.pointer.as_mut() {
                p.rejected();
            }
        }
        Ok(())
    }
}
