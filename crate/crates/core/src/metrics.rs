//! Stable regret and market unstability series.
//!
//! Regret is measured against each player's partner in the player-pessimal
//! stable matching. By default it is pseudo-regret, using true means of the
//! realized arm instead of sampled rewards, and may go negative.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::engine::{RoundObserver, RoundView, Trace};
use crate::error::{Error, Result};
use crate::market::Market;
use crate::num::Real;
use crate::stability::{enumerate_stable_matchings, is_stable_full, Gaps, Matching};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretKind {
    /// `mu[i][m_i] - mu[i][realized arm]`, or `mu[i][m_i]` if unmatched.
    #[default]
    Pseudo,
    /// `mu[i][m_i] - reward actually received`.
    Realized,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct MetricSeries<T: Real> {
    pub checkpoints: Vec<u64>,
    /// `[player][checkpoint]` cumulative regret.
    pub regret: Vec<Vec<T>>,
    /// Cumulative count of rounds whose realized matching was not stable.
    pub unstability: Vec<u64>,
}

impl<T: Real> MetricSeries<T> {
    /// Largest cumulative regret among players at each checkpoint.
    pub fn max_player_regret(&self) -> Vec<T> {
        max_over_players(&self.regret)
    }
}

pub fn max_over_players<T: Real>(regret: &[Vec<T>]) -> Vec<T> {
    let len = regret.first().map_or(0, Vec::len);
    (0..len)
        .map(|c| {
            regret
                .iter()
                .map(|row| row[c])
                .fold(T::neg_infinity(), T::max)
        })
        .collect()
}

#[inline]
pub fn regret_increment<T: Real>(
    market: &Market<T>,
    gaps: &Gaps<T>,
    player: usize,
    realized: Option<usize>,
    reward: T,
    kind: RegretKind,
) -> T {
    let baseline = gaps.baseline(market, player);
    match (kind, realized) {
        (_, None) => baseline,
        (RegretKind::Pseudo, Some(j)) => baseline - market.mu(player, j),
        (RegretKind::Realized, Some(_)) => baseline - reward,
    }
}

/// How membership in the set of stable matchings is decided.
pub enum StableSet<'m, T: Real> {
    /// Explicit list from the brute-force oracle.
    Enumerated(HashSet<Vec<Option<usize>>>),
    /// Full matching with no blocking pair under the market's preferences.
    Predicate(&'m Market<T>),
}

impl<'m, T: Real> StableSet<'m, T> {
    pub fn enumerated(market: &Market<T>) -> Result<Self> {
        let all = enumerate_stable_matchings(market)?;
        Ok(StableSet::Enumerated(
            all.into_iter().map(|m| m.assignment().to_vec()).collect(),
        ))
    }

    pub fn predicate(market: &'m Market<T>) -> Self {
        StableSet::Predicate(market)
    }

    pub fn contains(&self, matching: &Matching) -> bool {
        match self {
            StableSet::Enumerated(set) => set.contains(matching.assignment()),
            StableSet::Predicate(market) => is_stable_full(market, matching),
        }
    }
}

fn check_trace<T: Real>(trace: &Trace<T>, market: &Market<T>) -> Result<()> {
    if trace.market.n_players() != market.n_players() || trace.market.n_arms() != market.n_arms() {
        return Err(Error::TraceMismatch(format!(
            "trace is {}x{}, market is {}x{}",
            trace.market.n_players(),
            trace.market.n_arms(),
            market.n_players(),
            market.n_arms()
        )));
    }
    Ok(())
}

/// Per-player cumulative regret sampled at `grid`.
pub fn regret_series<T: Real>(
    trace: &Trace<T>,
    market: &Market<T>,
    gaps: &Gaps<T>,
    grid: &[u64],
    kind: RegretKind,
) -> Result<Vec<Vec<T>>> {
    check_trace(trace, market)?;
    if gaps.pessimal.len() != market.n_players() {
        return Err(Error::TraceMismatch(
            "gaps computed for another market".into(),
        ));
    }
    let n = market.n_players();
    let mut cum = vec![T::zero(); n];
    let mut out = vec![Vec::with_capacity(grid.len()); n];
    let mut next = grid.iter().peekable();
    for rec in &trace.rounds {
        for (i, c) in cum.iter_mut().enumerate() {
            *c = *c
                + regret_increment(
                    market,
                    gaps,
                    i,
                    rec.realized.arm_of(i),
                    rec.rewards[i],
                    kind,
                );
        }
        while next.peek() == Some(&&rec.t) {
            next.next();
            for (row, &c) in out.iter_mut().zip(&cum) {
                row.push(c);
            }
        }
    }
    Ok(out)
}

/// Cumulative count of rounds whose realized matching is outside `stable`.
pub fn unstability_series<T: Real>(
    trace: &Trace<T>,
    stable: &StableSet<'_, T>,
    grid: &[u64],
) -> Vec<u64> {
    let mut cum = 0u64;
    let mut out = Vec::with_capacity(grid.len());
    let mut next = grid.iter().peekable();
    for rec in &trace.rounds {
        if !stable.contains(&rec.realized) {
            cum += 1;
        }
        while next.peek() == Some(&&rec.t) {
            next.next();
            out.push(cum);
        }
    }
    out
}

/// Pointwise mean and standard error `sd / sqrt(runs)` (sample sd with
/// `runs - 1` in the denominator). A single run has zero standard error.
pub fn aggregate<T: Real>(series: &[&[T]]) -> Result<(Vec<T>, Vec<T>)> {
    let Some(first) = series.first() else {
        return Err(Error::GridMismatch("no series to aggregate".into()));
    };
    let len = first.len();
    if let Some(bad) = series.iter().position(|s| s.len() != len) {
        return Err(Error::GridMismatch(format!(
            "series {bad} has {} points, expected {len}",
            series[bad].len()
        )));
    }
    let runs = T::from_count(series.len() as u64);
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    for c in 0..len {
        let m = series.iter().map(|s| s[c]).fold(T::zero(), |a, b| a + b) / runs;
        let se = if series.len() < 2 {
            T::zero()
        } else {
            let ss = series
                .iter()
                .map(|s| (s[c] - m) * (s[c] - m))
                .fold(T::zero(), |a, b| a + b);
            (ss / (runs - T::one())).sqrt() / runs.sqrt()
        };
        mean.push(m);
        stderr.push(se);
    }
    Ok((mean, stderr))
}

/// Streams regret and unstability at checkpoints while a run plays.
pub struct MetricsRecorder<'m, T: Real> {
    market: &'m Market<T>,
    gaps: &'m Gaps<T>,
    kind: RegretKind,
    grid: Vec<u64>,
    next: usize,
    cum_regret: Vec<T>,
    cum_unstable: u64,
    last_realized: Option<(Vec<Option<usize>>, bool)>,
    regret: Vec<Vec<T>>,
    unstability: Vec<u64>,
}

impl<'m, T: Real> MetricsRecorder<'m, T> {
    pub fn new(market: &'m Market<T>, gaps: &'m Gaps<T>, grid: Vec<u64>, kind: RegretKind) -> Self {
        let n = market.n_players();
        Self {
            market,
            gaps,
            kind,
            next: 0,
            cum_regret: vec![T::zero(); n],
            cum_unstable: 0,
            last_realized: None,
            regret: vec![Vec::with_capacity(grid.len()); n],
            unstability: Vec::with_capacity(grid.len()),
            grid,
        }
    }

    fn stable(&mut self, realized: &Matching) -> bool {
        if let Some((prev, verdict)) = &self.last_realized {
            if prev.as_slice() == realized.assignment() {
                return *verdict;
            }
        }
        let verdict = is_stable_full(self.market, realized);
        match &mut self.last_realized {
            Some((prev, v)) => {
                prev.clear();
                prev.extend_from_slice(realized.assignment());
                *v = verdict;
            }
            None => self.last_realized = Some((realized.assignment().to_vec(), verdict)),
        }
        verdict
    }

    pub fn finish(self) -> MetricSeries<T> {
        MetricSeries {
            checkpoints: self.grid,
            regret: self.regret,
            unstability: self.unstability,
        }
    }
}

impl<T: Real> RoundObserver<T> for MetricsRecorder<'_, T> {
    fn on_round(&mut self, round: &RoundView<'_, T>) {
        for (i, c) in self.cum_regret.iter_mut().enumerate() {
            let reward = round.rewards[i].unwrap_or_else(T::zero);
            *c = *c
                + regret_increment(
                    self.market,
                    self.gaps,
                    i,
                    round.realized.arm_of(i),
                    reward,
                    self.kind,
                );
        }
        if !self.stable(round.realized) {
            self.cum_unstable += 1;
        }
        while self.grid.get(self.next) == Some(&round.t) {
            self.next += 1;
            for (row, &c) in self.regret.iter_mut().zip(&self.cum_regret) {
                row.push(c);
            }
            self.unstability.push(self.cum_unstable);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Algorithm;
    use crate::engine::{RoundRecord, Trace};
    use crate::market::{make_global_market, RewardModel};
    use crate::stability::pessimal_partners;

    fn global() -> Market<f64> {
        make_global_market(5, 5, 0.1, 0.2, RewardModel::Bernoulli).unwrap()
    }

    fn trace_of(market: &Market<f64>, rounds: Vec<Vec<Option<usize>>>) -> Trace<f64> {
        Trace {
            market: market.clone(),
            algorithm: Algorithm::CaTs { lambda: 0.1 },
            seed: 0,
            rounds: rounds
                .into_iter()
                .enumerate()
                .map(|(t, arm_of)| {
                    let realized = Matching::from_assignment(market.n_arms(), arm_of).unwrap();
                    RoundRecord {
                        t: t as u64 + 1,
                        attempts: realized
                            .assignment()
                            .iter()
                            .map(|a| a.unwrap_or(0))
                            .collect(),
                        rewards: vec![0.0; market.n_players()],
                        realized,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn regret_increments() {
        let m = global();
        let gaps = pessimal_partners(&m);
        let inc = regret_increment(&m, &gaps, 2, Some(0), 0.0, RegretKind::Pseudo);
        assert!((inc - (-0.4)).abs() < 1e-12);
        let inc = regret_increment(&m, &gaps, 2, None, 0.0, RegretKind::Pseudo);
        assert!((inc - 0.5).abs() < 1e-12);
        let inc = regret_increment(&m, &gaps, 2, Some(2), 1.0, RegretKind::Realized);
        assert!((inc - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn pessimal_play_has_zero_regret_and_no_unstability() {
        let m = global();
        let gaps = pessimal_partners(&m);
        let diag: Vec<Option<usize>> = (0..5).map(Some).collect();
        let trace = trace_of(&m, vec![diag; 10]);
        let grid = vec![5, 10];
        let regret = regret_series(&trace, &m, &gaps, &grid, RegretKind::Pseudo).unwrap();
        assert!(regret.iter().flatten().all(|&r| r == 0.0));
        let stable = StableSet::enumerated(&m).unwrap();
        assert_eq!(unstability_series(&trace, &stable, &grid), vec![0, 0]);
    }

    #[test]
    fn partial_round_counts_as_unstable() {
        let m = global();
        let diag: Vec<Option<usize>> = (0..5).map(Some).collect();
        let mut partial = diag.clone();
        partial[4] = None;
        let trace = trace_of(&m, vec![diag.clone(), partial, diag]);
        let grid = vec![1, 2, 3];
        for stable in [StableSet::enumerated(&m).unwrap(), StableSet::predicate(&m)] {
            assert_eq!(unstability_series(&trace, &stable, &grid), vec![0, 1, 1]);
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = [0.0f64, 1.0];
        let b = [2.0f64, 1.0];
        let (mean, se) = aggregate(&[&a, &b]).unwrap();
        assert_eq!(mean, vec![1.0, 1.0]);
        assert!((se[0] - 1.0).abs() < 1e-12);
        assert_eq!(se[1], 0.0);

        let (_, se) = aggregate(&[&a[..]]).unwrap();
        assert_eq!(se, vec![0.0, 0.0]);

        let short = [1.0f64];
        assert!(matches!(
            aggregate(&[&a, &short]),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn stderr_divides_by_root_run_count() {
        let runs: Vec<Vec<f64>> = (0..50).map(|s| vec![s as f64]).collect();
        let refs: Vec<&[f64]> = runs.iter().map(Vec::as_slice).collect();
        let (mean, se) = aggregate(&refs).unwrap();
        let m = 24.5;
        let sd = ((0..50).map(|s| (s as f64 - m).powi(2)).sum::<f64>() / 49.0).sqrt();
        assert!((mean[0] - m).abs() < 1e-12);
        assert!((se[0] - sd / 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn max_over_players_is_pointwise() {
        let regret = vec![vec![1.0, 5.0], vec![3.0, 2.0]];
        assert_eq!(max_over_players(&regret), vec![3.0, 5.0]);
    }
}
