use std::marker::PhantomData;

use super::etc::staggered_arm;
use super::stats::ArmStatistic;
use super::{plausible_mask, Agent, Probe, View};
use crate::error::Result;
use crate::num::Real;
use crate::rng::SimRng;

/// Conflict-avoiding index policy.
///
/// Each round the player draws a delay coin with bias `lambda`; on heads it
/// repeats its previous attempt. Otherwise it attempts the arm with the
/// highest index among arms that accepted nobody, or accepted someone it
/// outranks, in the previous round. The index comes from `S`: a Beta or
/// Gaussian posterior sample (Thompson sampling) or a UCB bound.
///
/// Draw order per round: delay coin (skipped while there is no previous
/// attempt), then one index per arm in arm order; binarization happens in
/// [`Agent::observe`].
#[derive(Debug, Clone)]
pub struct ConflictAvoiding<T: Real, S: ArmStatistic<T>> {
    player: usize,
    lambda: T,
    /// Leading rounds spent on the collision-free schedule that observes
    /// every arm once per round of `K`.
    warmup: u64,
    stats: Vec<S>,
    last_arm: Option<usize>,
    last_delayed: bool,
    scores: Vec<T>,
    plausible: Vec<bool>,
    probed: bool,
    _scalar: PhantomData<T>,
}

impl<T: Real, S: ArmStatistic<T>> ConflictAvoiding<T, S> {
    pub fn new(player: usize, n_arms: usize, lambda: T, warmup: u64) -> Self {
        Self {
            player,
            lambda,
            warmup,
            stats: vec![S::fresh(); n_arms],
            last_arm: None,
            last_delayed: false,
            scores: vec![T::zero(); n_arms],
            plausible: vec![true; n_arms],
            probed: false,
            _scalar: PhantomData,
        }
    }

    pub fn stats(&self) -> &[S] {
        &self.stats
    }

    pub fn stats_mut(&mut self) -> &mut [S] {
        &mut self.stats
    }

    pub fn last_arm(&self) -> Option<usize> {
        self.last_arm
    }

    /// Whether the last decision repeated the previous attempt.
    pub fn delayed(&self) -> bool {
        self.last_delayed
    }

    fn best_plausible(&self) -> usize {
        let mut best: Option<usize> = None;
        for (j, (&ok, &s)) in self.plausible.iter().zip(&self.scores).enumerate() {
            if ok && best.is_none_or(|b| s > self.scores[b]) {
                best = Some(j);
            }
        }
        best.expect("plausible set is never empty")
    }
}

impl<T: Real, S: ArmStatistic<T>> Agent<T> for ConflictAvoiding<T, S> {
    fn act(&mut self, view: &View<'_>, rng: &mut SimRng) -> usize {
        let k = self.stats.len();
        if view.t <= self.warmup {
            let arm = staggered_arm(self.player, k, view.t);
            self.last_arm = Some(arm);
            self.last_delayed = false;
            self.probed = false;
            return arm;
        }

        let delay = match self.last_arm {
            Some(_) => T::uniform(rng) < self.lambda,
            None => false,
        };
        for (score, stat) in self.scores.iter_mut().zip(&self.stats) {
            *score = stat.score(view.t, rng);
        }
        plausible_mask(view.board, self.player, view.ranks, &mut self.plausible);
        self.probed = true;
        self.last_delayed = delay;

        let arm = match (delay, self.last_arm) {
            (true, Some(prev)) => prev,
            _ => self.best_plausible(),
        };
        self.last_arm = Some(arm);
        arm
    }

    fn observe(&mut self, arm: usize, reward: Option<T>, rng: &mut SimRng) -> Result<()> {
        match reward {
            Some(x) => self.stats[arm].record(x, rng),
            None => Ok(()),
        }
    }

    fn probe(&self) -> Option<Probe<'_, T>> {
        self.probed.then_some(Probe {
            plausible: &self.plausible,
            scores: &self.scores,
        })
    }
}
