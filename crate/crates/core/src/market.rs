//! Market instances: player means, arm rankings and reward noise.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::tagged::deserialize_tagged;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardModel {
    Bernoulli,
    /// `Normal(mu, 1)` rewards.
    #[serde(alias = "gaussian")]
    GaussianUnitVariance,
}

impl RewardModel {
    pub fn name(self) -> &'static str {
        match self {
            RewardModel::Bernoulli => "bernoulli",
            RewardModel::GaussianUnitVariance => "gaussian_unit_variance",
        }
    }
}

/// Strict, publicly known arm preferences over players.
///
/// Stored as 1-based ranks, row-major by arm: `rank(j, i) == 1` means arm
/// `j` likes player `i` best.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArmRanks {
    n_players: usize,
    n_arms: usize,
    ranks: Vec<u32>,
}

impl ArmRanks {
    pub fn new(n_arms: usize, n_players: usize, ranks: Vec<u32>) -> Result<Self> {
        if ranks.len() != n_arms * n_players {
            return Err(Error::InvalidMarket(format!(
                "arm_rank has {} entries, expected {}",
                ranks.len(),
                n_arms * n_players
            )));
        }
        let mut seen = vec![false; n_players];
        for (j, row) in ranks.chunks(n_players.max(1)).enumerate() {
            seen.iter_mut().for_each(|s| *s = false);
            for &r in row {
                let r = r as usize;
                if r == 0 || r > n_players || seen[r - 1] {
                    return Err(Error::InvalidMarket(format!(
                        "arm {j} ranks are not a permutation of 1..={n_players}"
                    )));
                }
                seen[r - 1] = true;
            }
        }
        Ok(Self {
            n_players,
            n_arms,
            ranks,
        })
    }

    /// Builds ranks from per-arm orderings, most preferred player first.
    pub fn from_orders(orders: &[Vec<usize>], n_players: usize) -> Result<Self> {
        let mut ranks = vec![0u32; orders.len() * n_players];
        for (j, order) in orders.iter().enumerate() {
            if order.len() != n_players {
                return Err(Error::InvalidMarket(format!(
                    "arm {j} ordering lists {} players, expected {n_players}",
                    order.len()
                )));
            }
            for (pos, &i) in order.iter().enumerate() {
                if i >= n_players {
                    return Err(Error::InvalidMarket(format!("arm {j} names player {i}")));
                }
                ranks[j * n_players + i] = pos as u32 + 1;
            }
        }
        Self::new(orders.len(), n_players, ranks)
    }

    /// Every arm ranks players by index: p1 > p2 > ... > pN.
    pub fn identity(n_arms: usize, n_players: usize) -> Self {
        let ranks = (0..n_arms)
            .flat_map(|_| 1..=n_players as u32)
            .collect::<Vec<_>>();
        Self {
            n_players,
            n_arms,
            ranks,
        }
    }

    /// Independent uniform permutation per arm.
    pub fn random<R: Rng + ?Sized>(n_arms: usize, n_players: usize, rng: &mut R) -> Self {
        let mut ranks = Vec::with_capacity(n_arms * n_players);
        let mut row: Vec<u32> = (1..=n_players as u32).collect();
        for _ in 0..n_arms {
            row.shuffle(rng);
            ranks.extend_from_slice(&row);
        }
        Self {
            n_players,
            n_arms,
            ranks,
        }
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    #[inline]
    pub fn rank(&self, arm: usize, player: usize) -> u32 {
        self.ranks[arm * self.n_players + player]
    }

    /// True if `arm` strictly prefers player `a` to player `b`.
    #[inline]
    pub fn prefers(&self, arm: usize, a: usize, b: usize) -> bool {
        self.rank(arm, a) < self.rank(arm, b)
    }

    /// Players in the arm's preference order, best first.
    pub fn order(&self, arm: usize) -> Vec<usize> {
        let mut players: Vec<usize> = (0..self.n_players).collect();
        players.sort_by_key(|&i| self.rank(arm, i));
        players
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.ranks
    }
}

/// Ground truth of a two-sided market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarketDoc<T>", into = "MarketDoc<T>", bound = "T: Real")]
pub struct Market<T: Real> {
    n_players: usize,
    n_arms: usize,
    mu: Vec<T>,
    arm_rank: ArmRanks,
    reward_model: RewardModel,
}

/// Structured-text layout of a market. Matrices are flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct MarketDoc<T: Real> {
    pub n_players: usize,
    pub n_arms: usize,
    pub mu: Vec<T>,
    pub arm_rank: Vec<u32>,
    pub reward_model: RewardModel,
}

impl<T: Real> TryFrom<MarketDoc<T>> for Market<T> {
    type Error = Error;

    fn try_from(doc: MarketDoc<T>) -> Result<Self> {
        let ranks = ArmRanks::new(doc.n_arms, doc.n_players, doc.arm_rank)?;
        Market::new(doc.n_players, doc.n_arms, doc.mu, ranks, doc.reward_model)
    }
}

impl<T: Real> From<Market<T>> for MarketDoc<T> {
    fn from(m: Market<T>) -> Self {
        MarketDoc {
            n_players: m.n_players,
            n_arms: m.n_arms,
            mu: m.mu,
            arm_rank: m.arm_rank.ranks,
            reward_model: m.reward_model,
        }
    }
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if n == 0 || n > k {
        return Err(Error::Dimension {
            n_players: n,
            n_arms: k,
        });
    }
    Ok(())
}

impl<T: Real> Market<T> {
    pub fn new(
        n_players: usize,
        n_arms: usize,
        mu: Vec<T>,
        arm_rank: ArmRanks,
        reward_model: RewardModel,
    ) -> Result<Self> {
        check_dims(n_players, n_arms)?;
        if mu.len() != n_players * n_arms {
            return Err(Error::InvalidMarket(format!(
                "mu has {} entries, expected {}",
                mu.len(),
                n_players * n_arms
            )));
        }
        if arm_rank.n_players != n_players || arm_rank.n_arms != n_arms {
            return Err(Error::InvalidMarket(
                "arm_rank dimensions differ from mu".into(),
            ));
        }
        for (i, row) in mu.chunks(n_arms).enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidMarket(format!("mu[{i}][{j}] is not finite")));
                }
                if reward_model == RewardModel::Bernoulli && (v < T::zero() || v > T::one()) {
                    return Err(Error::BernoulliRange {
                        max: v.to_f64_lossy(),
                    });
                }
                if row[..j].contains(&v) {
                    return Err(Error::InvalidMarket(format!(
                        "player {i} is indifferent between arms (mu = {v})"
                    )));
                }
            }
        }
        Ok(Self {
            n_players,
            n_arms,
            mu,
            arm_rank,
            reward_model,
        })
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    #[inline]
    pub fn mu(&self, player: usize, arm: usize) -> T {
        self.mu[player * self.n_arms + arm]
    }

    pub fn mu_row(&self, player: usize) -> &[T] {
        &self.mu[player * self.n_arms..(player + 1) * self.n_arms]
    }

    pub fn arm_rank(&self) -> &ArmRanks {
        &self.arm_rank
    }

    pub fn reward_model(&self) -> RewardModel {
        self.reward_model
    }

    /// True if `player` strictly prefers arm `a` to arm `b`.
    #[inline]
    pub fn player_prefers(&self, player: usize, a: usize, b: usize) -> bool {
        self.mu(player, a) > self.mu(player, b)
    }

    /// The player's arms ordered by true mean, best first.
    pub fn player_order(&self, player: usize) -> Vec<usize> {
        order_by_score(self.mu_row(player))
    }

    pub fn sample_reward<R: Rng + ?Sized>(&self, player: usize, arm: usize, rng: &mut R) -> T {
        let mean = self.mu(player, arm);
        match self.reward_model {
            RewardModel::Bernoulli => {
                if T::uniform(rng) < mean {
                    T::one()
                } else {
                    T::zero()
                }
            }
            RewardModel::GaussianUnitVariance => mean + T::standard_normal(rng),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("market serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            key: "market".into(),
            message: e.to_string(),
        })
    }
}

/// Indices sorted by descending score; equal scores keep the lower index first.
pub fn order_by_score<T: Real>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

fn ladder<T: Real>(k: usize, mu_min: T, gap: T, model: RewardModel) -> Result<Vec<T>> {
    if gap.is_nan() || gap <= T::zero() {
        return Err(Error::InvalidParameter {
            name: "gap",
            reason: format!("must be positive, got {gap}"),
        });
    }
    // value of the r-th ranked arm, r = 1..k
    let values: Vec<T> = (1..=k)
        .map(|r| mu_min + T::from_count((k - r) as u64) * gap)
        .collect();
    if model == RewardModel::Bernoulli {
        let top = values[0];
        if mu_min < T::zero() || top > T::one() + T::lit(1e-12) {
            return Err(Error::BernoulliRange {
                max: top.to_f64_lossy(),
            });
        }
    }
    Ok(values
        .into_iter()
        .map(|v| match model {
            RewardModel::Bernoulli => v.min(T::one()),
            RewardModel::GaussianUnitVariance => v,
        })
        .collect())
}

/// Every player ranks a1 > a2 > ... and every arm ranks p1 > p2 > ...,
/// with consecutive arms `gap` apart and the worst arm worth `mu_min`.
pub fn make_global_market<T: Real>(
    n: usize,
    k: usize,
    mu_min: T,
    gap: T,
    reward_model: RewardModel,
) -> Result<Market<T>> {
    check_dims(n, k)?;
    let row = ladder(k, mu_min, gap, reward_model)?;
    let mu = (0..n).flat_map(|_| row.iter().copied()).collect();
    Market::new(n, k, mu, ArmRanks::identity(k, n), reward_model)
}

/// Random preference permutations on both sides over the same value ladder
/// as [`make_global_market`].
///
/// Draw order: player rows 1..n, then arm rows 1..k.
pub fn make_random_market<T: Real, R: Rng + ?Sized>(
    n: usize,
    k: usize,
    mu_min: T,
    gap: T,
    reward_model: RewardModel,
    rng: &mut R,
) -> Result<Market<T>> {
    check_dims(n, k)?;
    let values = ladder(k, mu_min, gap, reward_model)?;
    let mut mu = Vec::with_capacity(n * k);
    for _ in 0..n {
        let mut row = values.clone();
        row.shuffle(rng);
        mu.extend(row);
    }
    let ranks = ArmRanks::random(k, n, rng);
    Market::new(n, k, mu, ranks, reward_model)
}

/// Rank-normalized random utilities: `mu[j] = |{j' : u[j'] <= u[j]}| / K`
/// where `u[j] = beta * x[j] + eps[j]`.
pub fn utility_values<T: Real>(beta: T, x: &[T], eps: &[T]) -> Vec<T> {
    let k = x.len();
    let latent: Vec<T> = x.iter().zip(eps).map(|(&xj, &e)| beta * xj + e).collect();
    let denom = T::from_count(k as u64);
    latent
        .iter()
        .map(|&u| T::from_count(latent.iter().filter(|&&v| v <= u).count() as u64) / denom)
        .collect()
}

fn standard_logistic<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    loop {
        let u = T::uniform(rng);
        if u > T::zero() {
            return (u / (T::one() - u)).ln();
        }
    }
}

fn has_ties<T: Real>(values: &[T]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Random-utility market. `beta` controls how strongly players agree.
///
/// Draw order: arm qualities `x` (uniform), then one logistic noise row per
/// player (redrawn whole if it ties), then arm rank permutations.
pub fn make_utility_market<T: Real, R: Rng + ?Sized>(
    n: usize,
    k: usize,
    beta: T,
    reward_model: RewardModel,
    rng: &mut R,
) -> Result<Market<T>> {
    check_dims(n, k)?;
    if beta.is_nan() || beta < T::zero() {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("must be non-negative, got {beta}"),
        });
    }
    let x: Vec<T> = (0..k).map(|_| T::uniform(rng)).collect();
    let mut mu = Vec::with_capacity(n * k);
    for _ in 0..n {
        loop {
            let eps: Vec<T> = (0..k).map(|_| standard_logistic(rng)).collect();
            let latent: Vec<T> = x.iter().zip(&eps).map(|(&xj, &e)| beta * xj + e).collect();
            if !has_ties(&latent) {
                mu.extend(utility_values(beta, &x, &eps));
                break;
            }
        }
    }
    let ranks = ArmRanks::random(k, n, rng);
    Market::new(n, k, mu, ranks, reward_model)
}

/// Builds a market from ordinal preferences on both sides, assigning each
/// player's r-th favourite arm the value `template[r]`.
pub fn market_from_orders<T: Real>(
    player_orders: &[Vec<usize>],
    arm_orders: &[Vec<usize>],
    template: &[T],
    reward_model: RewardModel,
) -> Result<Market<T>> {
    let n = player_orders.len();
    let k = arm_orders.len();
    check_dims(n, k)?;
    if template.len() != k {
        return Err(Error::InvalidMarket(format!(
            "value template has {} entries, expected {k}",
            template.len()
        )));
    }
    let mut mu = vec![T::zero(); n * k];
    for (i, order) in player_orders.iter().enumerate() {
        if order.len() != k {
            return Err(Error::InvalidMarket(format!(
                "player {i} ordering lists {} arms, expected {k}",
                order.len()
            )));
        }
        for (pos, &j) in order.iter().enumerate() {
            if j >= k {
                return Err(Error::InvalidMarket(format!("player {i} names arm {j}")));
            }
            mu[i * k + j] = template[pos];
        }
    }
    let ranks = ArmRanks::from_orders(arm_orders, n)?;
    let market = Market::new(n, k, mu, ranks, reward_model)?;
    for (i, order) in player_orders.iter().enumerate() {
        if &market.player_order(i) != order {
            return Err(Error::InvalidMarket(format!(
                "player {i} ordering repeats an arm or template is not strictly decreasing"
            )));
        }
    }
    Ok(market)
}

/// The 3x3 market on which centralized posterior sampling fails to settle.
///
/// p1: a3 > a2 > a1, p2: a1 > a3 > a2, p3: a2 > a3 > a1;
/// a1, a2: p1 > p2 > p3, a3: p2 > p1 > p3. Player means follow the
/// `(0.9, 0.7, 0.5)` template along each ranking.
pub fn counterexample_market<T: Real>() -> Market<T> {
    let players = [vec![2, 1, 0], vec![0, 2, 1], vec![1, 2, 0]];
    let arms = [vec![0, 1, 2], vec![0, 1, 2], vec![1, 0, 2]];
    let template = [T::lit(0.9), T::lit(0.7), T::lit(0.5)];
    market_from_orders(&players, &arms, &template, RewardModel::Bernoulli)
        .expect("counterexample market is well formed")
}

fn default_mu_min() -> f64 {
    0.1
}

fn default_gap() -> f64 {
    0.2
}

fn default_bernoulli() -> RewardModel {
    RewardModel::Bernoulli
}

/// Declarative market description used by experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum MarketSpec {
    Global {
        n: usize,
        k: usize,
        #[serde(default = "default_mu_min")]
        mu_min: f64,
        #[serde(default = "default_gap")]
        gap: f64,
        #[serde(default = "default_bernoulli")]
        reward_model: RewardModel,
    },
    Random {
        n: usize,
        k: usize,
        #[serde(default = "default_mu_min")]
        mu_min: f64,
        #[serde(default = "default_gap")]
        gap: f64,
        #[serde(default = "default_bernoulli")]
        reward_model: RewardModel,
    },
    Utility {
        n: usize,
        k: usize,
        beta: f64,
        #[serde(default = "default_bernoulli")]
        reward_model: RewardModel,
    },
    Counterexample,
    Pinned {
        market: MarketDoc<f64>,
    },
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum MarketSpecFields {
    Global {
        n: usize,
        k: usize,
        #[serde(default = "default_mu_min")]
        mu_min: f64,
        #[serde(default = "default_gap")]
        gap: f64,
        #[serde(default = "default_bernoulli")]
        reward_model: RewardModel,
    },
    Random {
        n: usize,
        k: usize,
        #[serde(default = "default_mu_min")]
        mu_min: f64,
        #[serde(default = "default_gap")]
        gap: f64,
        #[serde(default = "default_bernoulli")]
        reward_model: RewardModel,
    },
    Utility {
        n: usize,
        k: usize,
        beta: f64,
        #[serde(default = "default_bernoulli")]
        reward_model: RewardModel,
    },
    Counterexample {},
    Pinned {
        market: MarketDoc<f64>,
    },
}

impl<'de> Deserialize<'de> for MarketSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use MarketSpecFields as F;
        Ok(match deserialize_tagged::<D, F>(d, "generator")? {
            F::Global {
                n,
                k,
                mu_min,
                gap,
                reward_model,
            } => MarketSpec::Global {
                n,
                k,
                mu_min,
                gap,
                reward_model,
            },
            F::Random {
                n,
                k,
                mu_min,
                gap,
                reward_model,
            } => MarketSpec::Random {
                n,
                k,
                mu_min,
                gap,
                reward_model,
            },
            F::Utility {
                n,
                k,
                beta,
                reward_model,
            } => MarketSpec::Utility {
                n,
                k,
                beta,
                reward_model,
            },
            F::Counterexample {} => MarketSpec::Counterexample,
            F::Pinned { market } => MarketSpec::Pinned { market },
        })
    }
}

impl MarketSpec {
    /// True when the market does not depend on the run seed.
    pub fn is_fixed(&self) -> bool {
        matches!(
            self,
            MarketSpec::Global { .. } | MarketSpec::Counterexample | MarketSpec::Pinned { .. }
        )
    }

    pub fn reward_model(&self) -> RewardModel {
        match self {
            MarketSpec::Global { reward_model, .. }
            | MarketSpec::Random { reward_model, .. }
            | MarketSpec::Utility { reward_model, .. } => *reward_model,
            MarketSpec::Counterexample => RewardModel::Bernoulli,
            MarketSpec::Pinned { market } => market.reward_model,
        }
    }

    pub fn build<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Market<T>> {
        match self {
            MarketSpec::Global {
                n,
                k,
                mu_min,
                gap,
                reward_model,
            } => make_global_market(*n, *k, T::lit(*mu_min), T::lit(*gap), *reward_model),
            MarketSpec::Random {
                n,
                k,
                mu_min,
                gap,
                reward_model,
            } => make_random_market(*n, *k, T::lit(*mu_min), T::lit(*gap), *reward_model, rng),
            MarketSpec::Utility {
                n,
                k,
                beta,
                reward_model,
            } => make_utility_market(*n, *k, T::lit(*beta), *reward_model, rng),
            MarketSpec::Counterexample => Ok(counterexample_market()),
            MarketSpec::Pinned { market } => {
                let doc = MarketDoc {
                    n_players: market.n_players,
                    n_arms: market.n_arms,
                    mu: market.mu.iter().map(|&v| T::lit(v)).collect(),
                    arm_rank: market.arm_rank.clone(),
                    reward_model: market.reward_model,
                };
                Market::try_from(doc)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sorted(row: &[f64]) -> Vec<f64> {
        let mut v = row.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn global_market_ladder() {
        let m = make_global_market::<f64>(5, 5, 0.1, 0.2, RewardModel::Bernoulli).unwrap();
        for i in 0..5 {
            assert!(close(m.mu_row(i), &[0.9, 0.7, 0.5, 0.3, 0.1]));
        }
        for j in 0..5 {
            let row: Vec<u32> = (0..5).map(|i| m.arm_rank().rank(j, i)).collect();
            assert_eq!(row, vec![1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn global_market_single_pair() {
        let m = make_global_market::<f64>(1, 1, 0.5, 0.2, RewardModel::Bernoulli).unwrap();
        assert_eq!(m.mu_row(0), &[0.5]);
        assert_eq!(m.arm_rank().rank(0, 0), 1);
    }

    #[test]
    fn global_market_rejects_out_of_range() {
        let err = make_global_market::<f64>(5, 5, 0.1, 0.25, RewardModel::Bernoulli).unwrap_err();
        assert!(matches!(err, Error::BernoulliRange { .. }), "{err}");
        // the same ladder is fine under gaussian noise
        make_global_market::<f64>(5, 5, 0.1, 0.25, RewardModel::GaussianUnitVariance).unwrap();
    }

    #[test]
    fn dimension_guards() {
        assert!(matches!(
            make_global_market::<f64>(3, 2, 0.1, 0.2, RewardModel::Bernoulli),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            make_global_market::<f64>(0, 2, 0.1, 0.2, RewardModel::Bernoulli),
            Err(Error::Dimension { .. })
        ));
        assert!(make_global_market::<f64>(2, 2, 0.1, 0.0, RewardModel::Bernoulli).is_err());
    }

    #[test]
    fn random_market_rows_are_permutations_of_ladder() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m =
            make_random_market::<f64, _>(5, 5, 0.1, 0.2, RewardModel::Bernoulli, &mut rng).unwrap();
        for i in 0..5 {
            assert!(close(&sorted(m.mu_row(i)), &[0.1, 0.3, 0.5, 0.7, 0.9]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one =
            make_random_market::<f64, _>(1, 1, 0.5, 0.2, RewardModel::Bernoulli, &mut rng).unwrap();
        assert_eq!(one.mu_row(0), &[0.5]);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = make_random_market::<f64, _>(
            4,
            6,
            0.1,
            0.1,
            RewardModel::Bernoulli,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let b = make_random_market::<f64, _>(
            4,
            6,
            0.1,
            0.1,
            RewardModel::Bernoulli,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn utility_values_from_fixed_draws() {
        let mu = utility_values(10.0f64, &[0.2, 0.9], &[0.1, -0.3]);
        assert!(close(&mu, &[0.5, 1.0]));
    }

    #[test]
    fn utility_with_zero_beta_ignores_quality() {
        let eps = [0.3, -1.0, 2.0];
        assert!(close(
            &utility_values(0.0f64, &[0.9, 0.1, 0.5], &eps),
            &utility_values(0.0f64, &[0.0, 0.0, 0.0], &eps)
        ));
        assert!(close(
            &utility_values(0.0f64, &[0.9, 0.1, 0.5], &eps),
            &[2.0 / 3.0, 1.0 / 3.0, 1.0]
        ));
    }

    #[test]
    fn utility_market_rows_cover_rank_grid() {
        for beta in [0.0, 10.0, 50.0, 100.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            let m = make_utility_market::<f64, _>(5, 5, beta, RewardModel::Bernoulli, &mut rng)
                .unwrap();
            for i in 0..5 {
                assert!(close(&sorted(m.mu_row(i)), &[0.2, 0.4, 0.6, 0.8, 1.0]));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(
            make_utility_market::<f64, _>(2, 2, -1.0, RewardModel::Bernoulli, &mut rng).is_err()
        );
    }

    #[test]
    fn degenerate_bernoulli_rewards() {
        let ranks = ArmRanks::identity(2, 1);
        let m = Market::new(1, 2, vec![1.0f64, 0.0], ranks, RewardModel::Bernoulli).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            assert_eq!(m.sample_reward(0, 0, &mut rng), 1.0);
            assert_eq!(m.sample_reward(0, 1, &mut rng), 0.0);
        }
    }

    #[test]
    fn bernoulli_reward_mean() {
        let ranks = ArmRanks::identity(2, 1);
        let m = Market::new(1, 2, vec![0.7f64, 0.2], ranks, RewardModel::Bernoulli).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000;
        let mean = (0..n).map(|_| m.sample_reward(0, 0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.7).abs() < 0.01, "{mean}");
    }

    #[test]
    fn gaussian_reward_has_unit_variance() {
        let ranks = ArmRanks::identity(1, 1);
        let m = Market::new(1, 1, vec![3.0f64], ranks, RewardModel::GaussianUnitVariance).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| m.sample_reward(0, 0, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 3.0).abs() < 0.02);
        assert!((var - 1.0).abs() < 0.03);
    }

    #[test]
    fn json_layout_is_flat_and_round_trips() {
        let m = counterexample_market::<f64>();
        let text = m.to_json();
        assert!(text.starts_with("{\"n_players\":3,\"n_arms\":3,\"mu\":[0.5,0.7,0.9,"));
        assert!(text.contains("\"arm_rank\":[1,2,3,1,2,3,2,1,3]"));
        assert!(text.ends_with("\"reward_model\":\"bernoulli\"}"));
        assert_eq!(Market::<f64>::from_json(&text).unwrap(), m);
    }

    #[test]
    fn json_rejects_invalid_markets() {
        let bad_rank = r#"{"n_players":2,"n_arms":2,"mu":[0.1,0.2,0.3,0.4],"arm_rank":[1,1,1,2],"reward_model":"bernoulli"}"#;
        assert!(Market::<f64>::from_json(bad_rank).is_err());
        let tie = r#"{"n_players":1,"n_arms":2,"mu":[0.2,0.2],"arm_rank":[1,1],"reward_model":"bernoulli"}"#;
        assert!(Market::<f64>::from_json(tie).is_err());
        let range = r#"{"n_players":1,"n_arms":2,"mu":[1.2,0.2],"arm_rank":[1,1],"reward_model":"bernoulli"}"#;
        assert!(Market::<f64>::from_json(range).is_err());
    }

    #[test]
    fn counterexample_orderings() {
        let m = counterexample_market::<f64>();
        assert_eq!(m.player_order(0), vec![2, 1, 0]);
        assert_eq!(m.player_order(1), vec![0, 2, 1]);
        assert_eq!(m.player_order(2), vec![1, 2, 0]);
        assert_eq!(m.arm_rank().order(0), vec![0, 1, 2]);
        assert_eq!(m.arm_rank().order(1), vec![0, 1, 2]);
        assert_eq!(m.arm_rank().order(2), vec![1, 0, 2]);
    }

    #[test]
    fn single_precision_market() {
        let m = make_global_market::<f32>(2, 3, 0.1, 0.3, RewardModel::Bernoulli).unwrap();
        assert!((m.mu(0, 0) - 0.7).abs() < 1e-6);
    }
}
