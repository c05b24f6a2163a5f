use std::marker::PhantomData;

use super::stats::ArmStatistic;
use super::Platform;
use crate::error::Result;
use crate::market::{order_by_score, ArmRanks};
use crate::num::Real;
use crate::rng::SimRng;
use crate::stability::{gale_shapley_by, Matching, Side};

/// Arm-proposing deferred acceptance on rankings estimated from per-player
/// scores (`scores[i][j]`, higher is better).
pub fn matching_from_scores<T: Real>(ranks: &ArmRanks, scores: &[Vec<T>]) -> Matching {
    let orders: Vec<Vec<usize>> = scores.iter().map(|row| order_by_score(row)).collect();
    gale_shapley_by(&orders, ranks, Side::Arms)
}

/// Platform that sees every player's statistics, ranks arms by sampled or
/// optimistic indices and executes the arm-proposing stable matching.
#[derive(Debug, Clone)]
pub struct CentralizedPlatform<T: Real, S: ArmStatistic<T>> {
    stats: Vec<Vec<S>>,
    scores: Vec<Vec<T>>,
    _scalar: PhantomData<T>,
}

impl<T: Real, S: ArmStatistic<T>> CentralizedPlatform<T, S> {
    pub fn new(n_players: usize, n_arms: usize) -> Self {
        Self {
            stats: vec![vec![S::fresh(); n_arms]; n_players],
            scores: vec![vec![T::zero(); n_arms]; n_players],
            _scalar: PhantomData,
        }
    }

    pub fn stats(&self) -> &[Vec<S>] {
        &self.stats
    }

    pub fn stats_mut(&mut self) -> &mut [Vec<S>] {
        &mut self.stats
    }

    /// Scores drawn for the last step.
    pub fn scores(&self) -> &[Vec<T>] {
        &self.scores
    }
}

impl<T: Real, S: ArmStatistic<T>> Platform<T> for CentralizedPlatform<T, S> {
    fn step(&mut self, ranks: &ArmRanks, t: u64, rng: &mut SimRng) -> Matching {
        for (row, stats) in self.scores.iter_mut().zip(&self.stats) {
            for (score, stat) in row.iter_mut().zip(stats) {
                *score = stat.score(t, rng);
            }
        }
        matching_from_scores(ranks, &self.scores)
    }

    fn observe(
        &mut self,
        matching: &Matching,
        rewards: &[Option<T>],
        rng: &mut SimRng,
    ) -> Result<()> {
        for (i, j) in matching.pairs() {
            if let Some(x) = rewards[i] {
                self.stats[i][j].record(x, rng)?;
            }
        }
        Ok(())
    }
}
