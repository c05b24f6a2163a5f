//! Per-arm statistics: Beta and Gaussian posteriors, UCB indices.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::SimRng;

/// What a player keeps about one arm.
pub trait ArmStatistic<T: Real>: Clone + Send + Sync + 'static {
    /// The index used to rank the arm at round `t`: a posterior sample or
    /// an optimistic bound. May consume randomness.
    fn score(&self, t: u64, rng: &mut SimRng) -> T;

    /// Incorporate one reward observed on the arm.
    fn record(&mut self, reward: T, rng: &mut SimRng) -> Result<()>;

    fn observations(&self) -> u64;

    /// Name of the learner family, used for labels and error messages.
    const FAMILY: &'static str;

    /// Whether the statistic accepts rewards outside `[0, 1]`.
    const UNBOUNDED_REWARDS: bool;

    fn fresh() -> Self;
}

/// Arithmetic mean maintained by the incremental update
/// `mean <- (mean * n + x) / (n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningMean<T: Real> {
    mean: T,
    count: u64,
}

impl<T: Real> RunningMean<T> {
    pub fn new(mean: T, count: u64) -> Self {
        Self { mean, count }
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: T) {
        let n = T::from_count(self.count);
        self.mean = (self.mean * n + x) / (n + T::one());
        self.count += 1;
    }
}

/// `Beta(a, b)` with `a = 1 + successes`, `b = 1 + failures`.
///
/// Rewards in `[0, 1]` are binarized by a Bernoulli trial with success
/// probability equal to the reward, keeping the posterior conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BetaPosterior {
    successes: u64,
    failures: u64,
}

impl BetaPosterior {
    pub fn with_counts(a: u64, b: u64) -> Self {
        assert!(a >= 1 && b >= 1, "beta counts start at 1");
        Self {
            successes: a - 1,
            failures: b - 1,
        }
    }

    pub fn a(&self) -> u64 {
        self.successes + 1
    }

    pub fn b(&self) -> u64 {
        self.failures + 1
    }

    pub fn mean<T: Real>(&self) -> T {
        T::from_count(self.a()) / T::from_count(self.a() + self.b())
    }
}

impl<T: Real> ArmStatistic<T> for BetaPosterior {
    const FAMILY: &'static str = "beta";
    const UNBOUNDED_REWARDS: bool = false;

    fn fresh() -> Self {
        Self::default()
    }

    #[inline]
    fn score(&self, _t: u64, rng: &mut SimRng) -> T {
        T::beta(T::from_count(self.a()), T::from_count(self.b()), rng)
    }

    fn record(&mut self, reward: T, rng: &mut SimRng) -> Result<()> {
        if !(reward >= T::zero() && reward <= T::one()) {
            return Err(Error::RewardOutOfRange {
                reward: reward.to_f64_lossy(),
            });
        }
        if T::uniform(rng) < reward {
            self.successes += 1;
        } else {
            self.failures += 1;
        }
        Ok(())
    }

    fn observations(&self) -> u64 {
        self.successes + self.failures
    }
}

/// `Normal(mean, 1 / count)` posterior for 1-subgaussian rewards.
///
/// An arm that was never observed scores `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianPosterior<T: Real> {
    stats: RunningMean<T>,
    sd: T,
}

impl<T: Real> GaussianPosterior<T> {
    pub fn new(mean: T, count: u64) -> Self {
        let mut p = Self {
            stats: RunningMean::new(mean, count),
            sd: T::zero(),
        };
        p.refresh();
        p
    }

    fn refresh(&mut self) {
        self.sd = if self.stats.count == 0 {
            T::infinity()
        } else {
            T::from_count(self.stats.count).sqrt().recip()
        };
    }

    pub fn mean(&self) -> T {
        self.stats.mean
    }

    pub fn count(&self) -> u64 {
        self.stats.count
    }
}

impl<T: Real> ArmStatistic<T> for GaussianPosterior<T> {
    const FAMILY: &'static str = "gaussian";
    const UNBOUNDED_REWARDS: bool = true;

    fn fresh() -> Self {
        Self::new(T::zero(), 0)
    }

    #[inline]
    fn score(&self, _t: u64, rng: &mut SimRng) -> T {
        if self.stats.count == 0 {
            return T::infinity();
        }
        self.stats.mean + T::standard_normal(rng) * self.sd
    }

    fn record(&mut self, reward: T, _rng: &mut SimRng) -> Result<()> {
        self.stats.push(reward);
        self.refresh();
        Ok(())
    }

    fn observations(&self) -> u64 {
        self.stats.count
    }
}

/// Empirical mean with the UCB1 bonus `sqrt(2 ln t / n)`; `+inf` while
/// unobserved.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UcbIndex<T: Real> {
    stats: RunningMean<T>,
}

impl<T: Real> UcbIndex<T> {
    pub fn new(mean: T, count: u64) -> Self {
        Self {
            stats: RunningMean::new(mean, count),
        }
    }

    pub fn mean(&self) -> T {
        self.stats.mean
    }

    pub fn count(&self) -> u64 {
        self.stats.count
    }

    pub fn index(&self, t: u64) -> T {
        if self.stats.count == 0 {
            return T::infinity();
        }
        let bonus =
            (T::lit(2.0) * T::from_count(t.max(1)).ln() / T::from_count(self.stats.count)).sqrt();
        self.stats.mean + bonus
    }
}

impl<T: Real> ArmStatistic<T> for UcbIndex<T> {
    const FAMILY: &'static str = "ucb";
    const UNBOUNDED_REWARDS: bool = true;

    fn fresh() -> Self {
        Self::default()
    }

    #[inline]
    fn score(&self, t: u64, _rng: &mut SimRng) -> T {
        self.index(t)
    }

    fn record(&mut self, reward: T, _rng: &mut SimRng) -> Result<()> {
        self.stats.push(reward);
        Ok(())
    }

    fn observations(&self) -> u64 {
        self.stats.count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> SimRng {
        SimRng::seed_from_u64(11)
    }

    #[test]
    fn degenerate_binarization() {
        let mut r = rng();
        let mut p = BetaPosterior::default();
        ArmStatistic::<f64>::record(&mut p, 1.0, &mut r).unwrap();
        assert_eq!((p.a(), p.b()), (2, 1));
        let mut p = BetaPosterior::default();
        ArmStatistic::<f64>::record(&mut p, 0.0, &mut r).unwrap();
        assert_eq!((p.a(), p.b()), (1, 2));
    }

    #[test]
    fn binarization_frequency() {
        let mut r = rng();
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| {
                let mut p = BetaPosterior::default();
                ArmStatistic::<f64>::record(&mut p, 0.6, &mut r).unwrap();
                p.a() == 2
            })
            .count();
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.6).abs() < 0.02, "{frac}");
    }

    #[test]
    fn beta_rejects_unbounded_reward() {
        let mut p = BetaPosterior::default();
        let err = ArmStatistic::<f64>::record(&mut p, 1.5, &mut rng()).unwrap_err();
        assert!(matches!(err, Error::RewardOutOfRange { .. }));
        assert!(ArmStatistic::<f64>::record(&mut p, -0.1, &mut rng()).is_err());
        assert_eq!(ArmStatistic::<f64>::observations(&p), 0);
    }

    #[test]
    fn gaussian_update_arithmetic() {
        let mut r = rng();
        let mut p = GaussianPosterior::new(0.5f64, 2);
        p.record(0.8, &mut r).unwrap();
        assert!((p.mean() - 0.6).abs() < 1e-12);
        assert_eq!(p.count(), 3);

        let mut p = GaussianPosterior::<f64>::fresh();
        p.record(0.3, &mut r).unwrap();
        assert!((p.mean() - 0.3).abs() < 1e-15);
        assert_eq!(p.count(), 1);

        let mut p = GaussianPosterior::<f64>::fresh();
        for _ in 0..1000 {
            p.record(0.37, &mut r).unwrap();
            assert!((p.mean() - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_unobserved_scores_infinite() {
        let p = GaussianPosterior::<f64>::fresh();
        assert_eq!(p.score(1, &mut rng()), f64::INFINITY);
    }

    #[test]
    fn ucb_index_value() {
        let u = UcbIndex::new(0.5f64, 4);
        let expected = 0.5 + (2.0 * 100f64.ln() / 4.0).sqrt();
        assert!((u.index(100) - expected).abs() < 1e-12);
        assert!((u.index(100) - 2.0174).abs() < 1e-4);
        assert_eq!(UcbIndex::<f64>::fresh().index(100), f64::INFINITY);
    }
}
