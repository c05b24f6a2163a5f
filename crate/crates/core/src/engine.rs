//! Round loop, conflict resolution and seeded batches.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Algorithm, Learners, Probe, PublicBoard, View};
use crate::error::{Error, Result};
use crate::market::{ArmRanks, Market, MarketSpec};
use crate::metrics::{aggregate, MetricSeries, MetricsRecorder, RegretKind};
use crate::num::Real;
use crate::rng::{substream, Role, SimRng};
use crate::stability::{is_stable_full, pessimal_partners, Matching};

/// Each arm accepts its best-ranked attempter; everyone else at that arm
/// goes unmatched.
pub fn resolve_conflicts(attempts: &[usize], ranks: &ArmRanks) -> Matching {
    let n = attempts.len();
    let k = ranks.n_arms();
    let mut player_of: Vec<Option<usize>> = vec![None; k];
    for (i, &j) in attempts.iter().enumerate() {
        match player_of[j] {
            Some(h) if !ranks.prefers(j, i, h) => {}
            _ => player_of[j] = Some(i),
        }
    }
    let mut arm_of = vec![None; n];
    for (j, p) in player_of.iter().enumerate() {
        if let Some(i) = *p {
            arm_of[i] = Some(j);
        }
    }
    Matching::from_parts_unchecked(arm_of, player_of)
}

/// One round as stored in a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct RoundRecord<T: Real> {
    pub t: u64,
    pub attempts: Vec<usize>,
    pub realized: Matching,
    /// Zero for unmatched players.
    pub rewards: Vec<T>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct Trace<T: Real> {
    pub market: Market<T>,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub rounds: Vec<RoundRecord<T>>,
}

impl<T: Real> Trace<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// What observers see after a round has been played.
pub struct RoundView<'a, T: Real> {
    pub t: u64,
    pub attempts: &'a [usize],
    pub realized: &'a Matching,
    /// `None` for unmatched players.
    pub rewards: &'a [Option<T>],
    /// Per-player decision indices; present only if some observer asked.
    pub probes: Option<&'a [Option<Probe<'a, T>>]>,
}

pub trait RoundObserver<T: Real> {
    fn wants_probes(&self) -> bool {
        false
    }

    fn on_round(&mut self, round: &RoundView<'_, T>);
}

/// Collects every round into memory.
#[derive(Debug, Default)]
pub struct TraceRecorder<T: Real> {
    pub rounds: Vec<RoundRecord<T>>,
}

impl<T: Real> RoundObserver<T> for TraceRecorder<T> {
    fn on_round(&mut self, round: &RoundView<'_, T>) {
        self.rounds.push(RoundRecord {
            t: round.t,
            attempts: round.attempts.to_vec(),
            realized: round.realized.clone(),
            rewards: round
                .rewards
                .iter()
                .map(|r| r.unwrap_or_else(T::zero))
                .collect(),
        });
    }
}

/// A single seeded run in progress.
pub struct Simulation<'m, T: Real> {
    market: &'m Market<T>,
    learners: Learners<T>,
    board: PublicBoard,
    t: u64,
    player_rngs: Vec<SimRng>,
    env_rng: SimRng,
    platform_rng: SimRng,
    attempts: Vec<usize>,
    rewards: Vec<Option<T>>,
    realized: Matching,
}

impl<'m, T: Real> Simulation<'m, T> {
    pub fn new(market: &'m Market<T>, algorithm: &Algorithm, seed: u64) -> Result<Self> {
        let learners =
            algorithm.build::<T>(market.n_players(), market.n_arms(), market.reward_model())?;
        Ok(Self::with_learners(market, learners, seed))
    }

    pub fn with_learners(market: &'m Market<T>, learners: Learners<T>, seed: u64) -> Self {
        let n = market.n_players();
        Self {
            market,
            learners,
            board: PublicBoard::empty(market.n_arms()),
            t: 0,
            player_rngs: (0..n as u64)
                .map(|i| substream(seed, Role::Player, i))
                .collect(),
            env_rng: substream(seed, Role::Environment, 0),
            platform_rng: substream(seed, Role::Platform, 0),
            attempts: vec![0; n],
            rewards: vec![None; n],
            realized: Matching::empty(n, market.n_arms()),
        }
    }

    pub fn board(&self) -> &PublicBoard {
        &self.board
    }

    /// Rounds played so far.
    pub fn round(&self) -> u64 {
        self.t
    }

    /// Plays round `t + 1`: act, resolve conflicts, pay matched players,
    /// update learners, publish the board.
    pub fn step(&mut self) -> Result<()> {
        let t = self.t + 1;
        let ranks = self.market.arm_rank();
        match &mut self.learners {
            Learners::Decentralized(agents) => {
                let view = View {
                    board: &self.board,
                    ranks,
                    t,
                };
                for ((attempt, agent), rng) in self
                    .attempts
                    .iter_mut()
                    .zip(agents.iter_mut())
                    .zip(self.player_rngs.iter_mut())
                {
                    *attempt = agent.act(&view, rng);
                }
                self.realized = resolve_conflicts(&self.attempts, ranks);
                sample_rewards(
                    self.market,
                    &self.realized,
                    &mut self.rewards,
                    &mut self.env_rng,
                );
                for (i, agent) in agents.iter_mut().enumerate() {
                    agent.observe(self.attempts[i], self.rewards[i], &mut self.player_rngs[i])?;
                }
            }
            Learners::Centralized(platform) => {
                self.realized = platform.step(ranks, t, &mut self.platform_rng);
                for (attempt, arm) in self.attempts.iter_mut().zip(self.realized.assignment()) {
                    *attempt = arm.expect("centralized matching covers every player");
                }
                sample_rewards(
                    self.market,
                    &self.realized,
                    &mut self.rewards,
                    &mut self.env_rng,
                );
                platform.observe(&self.realized, &self.rewards, &mut self.platform_rng)?;
            }
        }
        self.board = PublicBoard::from_matching(&self.realized, t);
        self.t = t;
        Ok(())
    }

    /// The last played round.
    pub fn record(&self) -> RoundRecord<T> {
        RoundRecord {
            t: self.t,
            attempts: self.attempts.clone(),
            realized: self.realized.clone(),
            rewards: self
                .rewards
                .iter()
                .map(|r| r.unwrap_or_else(T::zero))
                .collect(),
        }
    }

    fn probes(&self) -> Vec<Option<Probe<'_, T>>> {
        match &self.learners {
            Learners::Decentralized(agents) => agents.iter().map(|a| a.probe()).collect(),
            Learners::Centralized(_) => vec![None; self.attempts.len()],
        }
    }

    /// Plays `rounds` more rounds, reporting each to every observer.
    pub fn run(&mut self, rounds: u64, observers: &mut [&mut dyn RoundObserver<T>]) -> Result<()> {
        let want_probes = observers.iter().any(|o| o.wants_probes());
        for _ in 0..rounds {
            self.step()?;
            let probes = want_probes.then(|| self.probes());
            let view = RoundView {
                t: self.t,
                attempts: &self.attempts,
                realized: &self.realized,
                rewards: &self.rewards,
                probes: probes.as_deref(),
            };
            for o in observers.iter_mut() {
                o.on_round(&view);
            }
        }
        Ok(())
    }
}

fn sample_rewards<T: Real>(
    market: &Market<T>,
    realized: &Matching,
    rewards: &mut [Option<T>],
    rng: &mut SimRng,
) {
    for (i, slot) in rewards.iter_mut().enumerate() {
        *slot = realized.arm_of(i).map(|j| market.sample_reward(i, j, rng));
    }
}

/// Counts rounds that contradict the one-step stability preservation
/// property of conflict-avoiding policies: if last round's realized
/// matching is stable and every player's top index inside its plausible
/// set is also its truly best plausible arm, this round's attempts must
/// form the same kind of stable matching.
pub struct PreservationMonitor<'m, T: Real> {
    market: &'m Market<T>,
    previous_stable: bool,
    pub tally: PreservationTally,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PreservationTally {
    /// Rounds where both premises held.
    pub checked: u64,
    pub violations: u64,
}

impl PreservationTally {
    pub fn merge(self, other: PreservationTally) -> PreservationTally {
        PreservationTally {
            checked: self.checked + other.checked,
            violations: self.violations + other.violations,
        }
    }
}

impl<'m, T: Real> PreservationMonitor<'m, T> {
    pub fn new(market: &'m Market<T>) -> Self {
        Self {
            market,
            previous_stable: false,
            tally: PreservationTally::default(),
        }
    }

    fn top<I: Iterator<Item = (usize, T)>>(items: I) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (j, v) in items {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        best.map(|(j, _)| j)
    }

    fn indices_agree(&self, probes: &[Option<Probe<'_, T>>]) -> bool {
        probes.iter().enumerate().all(|(i, probe)| {
            let Some(p) = probe else { return false };
            let by_index = Self::top(
                p.scores
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| p.plausible[*j])
                    .map(|(j, &s)| (j, s)),
            );
            let by_mean = Self::top(
                (0..p.plausible.len())
                    .filter(|&j| p.plausible[j])
                    .map(|j| (j, self.market.mu(i, j))),
            );
            by_index.is_some() && by_index == by_mean
        })
    }
}

impl<T: Real> RoundObserver<T> for PreservationMonitor<'_, T> {
    fn wants_probes(&self) -> bool {
        true
    }

    fn on_round(&mut self, round: &RoundView<'_, T>) {
        if self.previous_stable {
            if let Some(probes) = round.probes {
                if self.indices_agree(probes) {
                    self.tally.checked += 1;
                    let attempts_stable = Matching::from_assignment(
                        self.market.n_arms(),
                        round.attempts.iter().map(|&j| Some(j)).collect(),
                    )
                    .map(|m| is_stable_full(self.market, &m))
                    .unwrap_or(false);
                    if !attempts_stable {
                        self.tally.violations += 1;
                    }
                }
            }
        }
        self.previous_stable = is_stable_full(self.market, round.realized);
    }
}

/// Checkpoints: multiples of the stride (default `max(1, T / 1000)`) plus
/// `T / 2` and `T`.
pub fn checkpoint_grid(horizon: u64, stride: Option<u64>) -> Vec<u64> {
    let stride = stride.unwrap_or((horizon / 1000).max(1)).max(1);
    let mut grid: Vec<u64> = (1..=horizon / stride).map(|c| c * stride).collect();
    if horizon / 2 >= 1 {
        grid.push(horizon / 2);
    }
    grid.push(horizon);
    grid.sort_unstable();
    grid.dedup();
    grid
}

fn default_horizon() -> u64 {
    100_000
}

fn default_seeds() -> Vec<u64> {
    (1..=50).collect()
}

/// One algorithm on one market family over a set of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub market: MarketSpec,
    pub algorithm: Algorithm,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub stride: Option<u64>,
    /// Fixes the market of seed-dependent generators across runs; by
    /// default every run draws its own market from its seed.
    #[serde(default)]
    pub market_seed: Option<u64>,
    #[serde(default)]
    pub regret: RegretKind,
    /// Track the stability preservation property on every run.
    #[serde(default)]
    pub instrument: bool,
}

impl SimulationConfig {
    pub fn new(market: MarketSpec, algorithm: Algorithm, horizon: u64, seeds: Vec<u64>) -> Self {
        Self {
            market,
            algorithm,
            horizon,
            seeds,
            stride: None,
            market_seed: None,
            regret: RegretKind::Pseudo,
            instrument: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.stride == Some(0) {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        self.algorithm.validate(self.market.reward_model())
    }

    pub fn grid(&self) -> Vec<u64> {
        checkpoint_grid(self.horizon, self.stride)
    }

    pub fn build_market<T: Real>(&self, seed: u64) -> Result<Market<T>> {
        let mut rng = substream(self.market_seed.unwrap_or(seed), Role::Market, 0);
        self.market.build(&mut rng)
    }
}

/// Full per-round trace of one seeded run.
pub fn run_simulation<T: Real>(config: &SimulationConfig, seed: u64) -> Result<Trace<T>> {
    config.validate()?;
    let market = config.build_market::<T>(seed)?;
    let mut recorder = TraceRecorder::default();
    {
        let mut sim = Simulation::new(&market, &config.algorithm, seed)?;
        sim.run(config.horizon, &mut [&mut recorder])?;
    }
    Ok(Trace {
        market,
        algorithm: config.algorithm.clone(),
        seed,
        rounds: recorder.rounds,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct RunResult<T: Real> {
    pub seed: u64,
    pub series: MetricSeries<T>,
    pub preservation: PreservationTally,
}

/// Streams one run into metric series without keeping the trace.
pub fn run_metrics<T: Real>(config: &SimulationConfig, seed: u64) -> Result<RunResult<T>> {
    let market = config.build_market::<T>(seed)?;
    let gaps = pessimal_partners(&market);
    let mut recorder = MetricsRecorder::new(&market, &gaps, config.grid(), config.regret);
    let mut monitor = PreservationMonitor::new(&market);
    let mut sim = Simulation::new(&market, &config.algorithm, seed)?;
    if config.instrument {
        sim.run(config.horizon, &mut [&mut recorder, &mut monitor])?;
    } else {
        sim.run(config.horizon, &mut [&mut recorder])?;
    }
    Ok(RunResult {
        seed,
        series: recorder.finish(),
        preservation: monitor.tally,
    })
}

/// Per-seed series plus their pointwise mean and standard error.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct BatchResult<T: Real> {
    pub algorithm: String,
    pub checkpoints: Vec<u64>,
    /// Sorted by seed.
    pub runs: Vec<RunResult<T>>,
    /// `[player][checkpoint]`.
    pub regret_mean: Vec<Vec<T>>,
    pub regret_stderr: Vec<Vec<T>>,
    pub unstability_mean: Vec<T>,
    pub unstability_stderr: Vec<T>,
    pub preservation: PreservationTally,
}

/// Worker count for batches: `MM_THREADS` if set, else all cores.
pub fn batch_threads() -> usize {
    std::env::var("MM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs every seed (in parallel, order-independent) and aggregates.
/// Seeds are sorted and deduplicated first.
pub fn run_batch<T: Real>(config: &SimulationConfig) -> Result<BatchResult<T>> {
    config.validate()?;
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(batch_threads())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunResult<T>>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                run_metrics::<T>(config, seed).map_err(|e| Error::Run {
                    seed,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    summarize(config.algorithm.label(), runs)
}

pub(crate) fn summarize<T: Real>(label: &str, runs: Vec<RunResult<T>>) -> Result<BatchResult<T>> {
    let checkpoints = runs[0].series.checkpoints.clone();
    let n_players = runs[0].series.regret.len();
    for r in &runs {
        if r.series.checkpoints != checkpoints || r.series.regret.len() != n_players {
            return Err(Error::GridMismatch(format!(
                "seed {} disagrees with seed {}",
                r.seed, runs[0].seed
            )));
        }
    }
    let mut regret_mean = Vec::with_capacity(n_players);
    let mut regret_stderr = Vec::with_capacity(n_players);
    for i in 0..n_players {
        let per_seed: Vec<&[T]> = runs.iter().map(|r| r.series.regret[i].as_slice()).collect();
        let (m, s) = aggregate(&per_seed)?;
        regret_mean.push(m);
        regret_stderr.push(s);
    }
    let unstab: Vec<Vec<T>> = runs
        .iter()
        .map(|r| {
            r.series
                .unstability
                .iter()
                .map(|&c| T::from_count(c))
                .collect()
        })
        .collect();
    let unstab_refs: Vec<&[T]> = unstab.iter().map(Vec::as_slice).collect();
    let (unstability_mean, unstability_stderr) = aggregate(&unstab_refs)?;
    let preservation = runs.iter().fold(PreservationTally::default(), |acc, r| {
        acc.merge(r.preservation)
    });
    Ok(BatchResult {
        algorithm: label.to_string(),
        checkpoints,
        runs,
        regret_mean,
        regret_stderr,
        unstability_mean,
        unstability_stderr,
        preservation,
    })
}
