//! Stable matching machinery: blocking pairs, deferred acceptance, the
//! brute-force oracle and the gap statistics derived from the pessimal
//! stable matching.

use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::error::{Error, Result};
use crate::market::{ArmRanks, Market};
use crate::num::Real;

/// Largest arm count accepted by [`enumerate_stable_matchings`].
pub const ENUMERATION_LIMIT: usize = 8;

/// A possibly partial one-to-one assignment of players to arms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    arm_of: Vec<Option<usize>>,
    player_of: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n_players: usize, n_arms: usize) -> Self {
        Self {
            arm_of: vec![None; n_players],
            player_of: vec![None; n_arms],
        }
    }

    /// Validates that arms are in range and used at most once.
    pub fn from_assignment(n_arms: usize, arm_of: Vec<Option<usize>>) -> Result<Self> {
        let mut player_of = vec![None; n_arms];
        for (i, arm) in arm_of.iter().enumerate() {
            if let Some(j) = *arm {
                if j >= n_arms {
                    return Err(Error::InvalidParameter {
                        name: "matching",
                        reason: format!("player {i} assigned to arm {j} of {n_arms}"),
                    });
                }
                if let Some(other) = player_of[j] {
                    return Err(Error::InvalidParameter {
                        name: "matching",
                        reason: format!("arm {j} assigned to players {other} and {i}"),
                    });
                }
                player_of[j] = Some(i);
            }
        }
        Ok(Self { arm_of, player_of })
    }

    pub fn from_pairs(n_players: usize, n_arms: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut arm_of = vec![None; n_players];
        for &(i, j) in pairs {
            if i >= n_players || arm_of[i].is_some() {
                return Err(Error::InvalidParameter {
                    name: "matching",
                    reason: format!("player {i} missing or repeated"),
                });
            }
            arm_of[i] = Some(j);
        }
        Self::from_assignment(n_arms, arm_of)
    }

    pub(crate) fn from_parts_unchecked(
        arm_of: Vec<Option<usize>>,
        player_of: Vec<Option<usize>>,
    ) -> Self {
        Self { arm_of, player_of }
    }

    pub fn n_players(&self) -> usize {
        self.arm_of.len()
    }

    pub fn n_arms(&self) -> usize {
        self.player_of.len()
    }

    #[inline]
    pub fn arm_of(&self, player: usize) -> Option<usize> {
        self.arm_of[player]
    }

    #[inline]
    pub fn player_of(&self, arm: usize) -> Option<usize> {
        self.player_of[arm]
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.arm_of
    }

    pub fn holders(&self) -> &[Option<usize>] {
        &self.player_of
    }

    /// Every player has an arm.
    pub fn is_full(&self) -> bool {
        self.arm_of.iter().all(Option::is_some)
    }

    pub fn matched_count(&self) -> usize {
        self.arm_of.iter().filter(|a| a.is_some()).count()
    }

    /// `(player, arm)` pairs in player order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.arm_of
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|j| (i, j)))
            .collect()
    }
}

impl Serialize for Matching {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs = self.pairs();
        let mut seq = serializer.serialize_seq(Some(pairs.len()))?;
        for p in &pairs {
            seq.serialize_element(p)?;
        }
        seq.end()
    }
}

/// Stability under arbitrary player preferences.
///
/// `player_prefers(i, a, b)` must say whether player `i` strictly prefers arm
/// `a` to arm `b`. An unmatched agent prefers any partner to none.
pub fn is_stable_with<F>(ranks: &ArmRanks, matching: &Matching, player_prefers: F) -> bool
where
    F: Fn(usize, usize, usize) -> bool,
{
    for i in 0..matching.n_players() {
        let current = matching.arm_of(i);
        for j in 0..matching.n_arms() {
            if Some(j) == current {
                continue;
            }
            let player_wants = match current {
                None => true,
                Some(c) => player_prefers(i, j, c),
            };
            if !player_wants {
                continue;
            }
            let arm_wants = match matching.player_of(j) {
                None => true,
                Some(h) => ranks.prefers(j, i, h),
            };
            if arm_wants {
                return false;
            }
        }
    }
    true
}

/// True iff no player-arm pair blocks `matching` under the market's true
/// preferences.
pub fn is_stable<T: Real>(market: &Market<T>, matching: &Matching) -> bool {
    is_stable_with(market.arm_rank(), matching, |i, a, b| {
        market.player_prefers(i, a, b)
    })
}

/// Full and stable: membership in the set of stable matchings.
pub fn is_stable_full<T: Real>(market: &Market<T>, matching: &Matching) -> bool {
    matching.is_full() && is_stable(market, matching)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Players,
    Arms,
}

/// Deferred acceptance. `lists[p]` is proposer `p`'s ranked list of
/// receivers; `receiver_prefers(r, a, b)` says whether receiver `r` strictly
/// prefers proposer `a` to `b`. Free proposers propose in index order each
/// pass. Returns each proposer's final receiver.
pub fn deferred_acceptance<F>(
    lists: &[Vec<usize>],
    n_receivers: usize,
    receiver_prefers: F,
) -> Vec<Option<usize>>
where
    F: Fn(usize, usize, usize) -> bool,
{
    let n = lists.len();
    let mut next = vec![0usize; n];
    let mut held_by: Vec<Option<usize>> = vec![None; n_receivers];
    let mut partner: Vec<Option<usize>> = vec![None; n];
    loop {
        let mut proposed = false;
        for p in 0..n {
            if partner[p].is_some() || next[p] >= lists[p].len() {
                continue;
            }
            proposed = true;
            let r = lists[p][next[p]];
            next[p] += 1;
            match held_by[r] {
                None => {
                    held_by[r] = Some(p);
                    partner[p] = Some(r);
                }
                Some(q) if receiver_prefers(r, p, q) => {
                    held_by[r] = Some(p);
                    partner[p] = Some(r);
                    partner[q] = None;
                }
                Some(_) => {}
            }
        }
        if !proposed {
            return partner;
        }
    }
}

/// Deferred acceptance with players ranking arms by `player_orders` (best
/// first) and arms using their public ranks.
pub fn gale_shapley_by(player_orders: &[Vec<usize>], ranks: &ArmRanks, side: Side) -> Matching {
    let n = player_orders.len();
    let k = ranks.n_arms();
    match side {
        Side::Players => {
            let arm_of = deferred_acceptance(player_orders, k, |j, a, b| ranks.prefers(j, a, b));
            Matching::from_assignment(k, arm_of).expect("deferred acceptance is one-to-one")
        }
        Side::Arms => {
            // position of each arm in each player's list
            let mut position = vec![usize::MAX; n * k];
            for (i, order) in player_orders.iter().enumerate() {
                for (pos, &j) in order.iter().enumerate() {
                    position[i * k + j] = pos;
                }
            }
            let arm_lists: Vec<Vec<usize>> = (0..k).map(|j| ranks.order(j)).collect();
            let player_of = deferred_acceptance(&arm_lists, n, |i, a, b| {
                position[i * k + a] < position[i * k + b]
            });
            let mut arm_of = vec![None; n];
            for (j, p) in player_of.iter().enumerate() {
                if let Some(i) = *p {
                    arm_of[i] = Some(j);
                }
            }
            Matching::from_parts_unchecked(arm_of, player_of)
        }
    }
}

/// Arms proposing yields the player-pessimal stable matching, players
/// proposing the player-optimal one.
pub fn gale_shapley<T: Real>(market: &Market<T>, side: Side) -> Matching {
    let orders: Vec<Vec<usize>> = (0..market.n_players())
        .map(|i| market.player_order(i))
        .collect();
    gale_shapley_by(&orders, market.arm_rank(), side)
}

/// Brute-force list of every stable full matching, in lexicographic order
/// of the players' arms.
pub fn enumerate_stable_matchings<T: Real>(market: &Market<T>) -> Result<Vec<Matching>> {
    let k = market.n_arms();
    if k > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            n_arms: k,
            limit: ENUMERATION_LIMIT,
        });
    }
    let n = market.n_players();
    let mut out = Vec::new();
    let mut arm_of = vec![None; n];
    let mut used = vec![false; k];
    enumerate_rec(market, 0, &mut arm_of, &mut used, &mut out);
    Ok(out)
}

fn enumerate_rec<T: Real>(
    market: &Market<T>,
    player: usize,
    arm_of: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    out: &mut Vec<Matching>,
) {
    if player == arm_of.len() {
        let m = Matching::from_assignment(used.len(), arm_of.clone()).expect("injective");
        if is_stable(market, &m) {
            out.push(m);
        }
        return;
    }
    for j in 0..used.len() {
        if used[j] {
            continue;
        }
        used[j] = true;
        arm_of[player] = Some(j);
        enumerate_rec(market, player + 1, arm_of, used, out);
        arm_of[player] = None;
        used[j] = false;
    }
}

/// Gap statistics anchored at the player-pessimal stable matching.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaps<T: Real> {
    /// `m_i`: each player's partner in the player-pessimal stable matching.
    pub pessimal: Vec<usize>,
    /// Smallest nonzero within-player mean difference; `None` for one arm.
    pub delta_min: Option<T>,
    /// `mu[i][m_i]`, the most a player can lose in one round under
    /// `[0, 1]` rewards.
    pub delta_max_bernoulli: Vec<T>,
    /// `max_j max(mu[i][m_i] - mu[i][j], mu[i][m_i])`, the analogue for
    /// unbounded rewards.
    pub delta_max_gaussian: Vec<T>,
}

impl<T: Real> Gaps<T> {
    pub fn baseline(&self, market: &Market<T>, player: usize) -> T {
        market.mu(player, self.pessimal[player])
    }
}

/// `|mu[i][a] - mu[i][b]|`.
pub fn pairwise_gap<T: Real>(market: &Market<T>, player: usize, a: usize, b: usize) -> T {
    (market.mu(player, a) - market.mu(player, b)).abs()
}

pub fn pessimal_partners<T: Real>(market: &Market<T>) -> Gaps<T> {
    let matching = gale_shapley(market, Side::Arms);
    let pessimal: Vec<usize> = (0..market.n_players())
        .map(|i| {
            matching
                .arm_of(i)
                .expect("arm-proposing deferred acceptance matches every player when N <= K")
        })
        .collect();

    let mut delta_min: Option<T> = None;
    for i in 0..market.n_players() {
        let row = market.mu_row(i);
        for a in 0..row.len() {
            for b in (a + 1)..row.len() {
                let d = (row[a] - row[b]).abs();
                if d > T::zero() && delta_min.is_none_or(|m| d < m) {
                    delta_min = Some(d);
                }
            }
        }
    }

    let delta_max_bernoulli: Vec<T> = pessimal
        .iter()
        .enumerate()
        .map(|(i, &m)| market.mu(i, m))
        .collect();
    let delta_max_gaussian = pessimal
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let base = market.mu(i, m);
            market
                .mu_row(i)
                .iter()
                .map(|&v| (base - v).max(base))
                .fold(T::neg_infinity(), T::max)
        })
        .collect();

    Gaps {
        pessimal,
        delta_min,
        delta_max_bernoulli,
        delta_max_gaussian,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{counterexample_market, make_global_market, RewardModel};

    fn m(pairs: &[(usize, usize)]) -> Matching {
        Matching::from_pairs(3, 3, pairs).unwrap()
    }

    #[test]
    fn counterexample_pessimal_matching_is_stable() {
        let market = counterexample_market::<f64>();
        assert!(is_stable(&market, &m(&[(0, 2), (1, 0), (2, 1)])));
    }

    #[test]
    fn counterexample_blocking_pair() {
        let market = counterexample_market::<f64>();
        // (p1, a2) blocks: p1 prefers a2 to a1 and a2 prefers p1 to p3
        let bad = m(&[(0, 0), (1, 2), (2, 1)]);
        assert!(!is_stable(&market, &bad));
        assert!(market.player_prefers(0, 1, 0));
        assert!(market.arm_rank().prefers(1, 0, 2));
    }

    #[test]
    fn empty_matching_is_unstable() {
        let market = make_global_market::<f64>(1, 1, 0.5, 0.2, RewardModel::Bernoulli).unwrap();
        assert!(!is_stable(&market, &Matching::empty(1, 1)));
    }

    #[test]
    fn gale_shapley_examples() {
        let market = counterexample_market::<f64>();
        assert_eq!(
            gale_shapley(&market, Side::Arms).pairs(),
            vec![(0, 2), (1, 0), (2, 1)]
        );
        let one = make_global_market::<f64>(1, 1, 0.5, 0.2, RewardModel::Bernoulli).unwrap();
        assert_eq!(gale_shapley(&one, Side::Players).pairs(), vec![(0, 0)]);
        let global = make_global_market::<f64>(5, 5, 0.1, 0.2, RewardModel::Bernoulli).unwrap();
        let diag: Vec<_> = (0..5).map(|i| (i, i)).collect();
        assert_eq!(gale_shapley(&global, Side::Arms).pairs(), diag);
        assert_eq!(gale_shapley(&global, Side::Players).pairs(), diag);
    }

    #[test]
    fn arms_proposing_with_spare_arms() {
        let global = make_global_market::<f64>(2, 4, 0.1, 0.2, RewardModel::Bernoulli).unwrap();
        let pess = gale_shapley(&global, Side::Arms);
        assert_eq!(pess.pairs(), vec![(0, 0), (1, 1)]);
        assert_eq!(pess.player_of(3), None);
    }

    #[test]
    fn enumeration_examples() {
        let global = make_global_market::<f64>(5, 5, 0.1, 0.2, RewardModel::Bernoulli).unwrap();
        let all = enumerate_stable_matchings(&global).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].pairs(), (0..5).map(|i| (i, i)).collect::<Vec<_>>());

        let market = counterexample_market::<f64>();
        let all = enumerate_stable_matchings(&market).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].pairs(), vec![(0, 2), (1, 0), (2, 1)]);

        let wide = make_global_market::<f64>(1, 2, 0.3, 0.2, RewardModel::Bernoulli).unwrap();
        let all = enumerate_stable_matchings(&wide).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].pairs(), vec![(0, 0)]);
    }

    #[test]
    fn enumeration_guard() {
        let big = make_global_market::<f64>(2, 9, 0.0, 0.1, RewardModel::Bernoulli).unwrap();
        assert!(matches!(
            enumerate_stable_matchings(&big),
            Err(Error::EnumerationTooLarge { n_arms: 9, .. })
        ));
    }

    #[test]
    fn global_gaps() {
        let global = make_global_market::<f64>(5, 5, 0.1, 0.2, RewardModel::Bernoulli).unwrap();
        let gaps = pessimal_partners(&global);
        assert_eq!(gaps.pessimal, vec![0, 1, 2, 3, 4]);
        for (got, want) in gaps
            .delta_max_bernoulli
            .iter()
            .zip([0.9, 0.7, 0.5, 0.3, 0.1])
        {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((gaps.delta_min.unwrap() - 0.2).abs() < 1e-12);
        for (g, b) in gaps
            .delta_max_gaussian
            .iter()
            .zip(&gaps.delta_max_bernoulli)
        {
            assert!(g >= b);
        }
        // p5 sits on the worst arm: every other arm is better, so the max is mu itself
        assert!((gaps.delta_max_gaussian[4] - 0.1).abs() < 1e-12);
        assert!((pairwise_gap(&global, 0, 0, 4) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn gaussian_gap_can_exceed_baseline() {
        let ranks = ArmRanks::identity(2, 1);
        let market = Market::new(
            1,
            2,
            vec![0.5f64, -2.0],
            ranks,
            RewardModel::GaussianUnitVariance,
        )
        .unwrap();
        let gaps = pessimal_partners(&market);
        assert_eq!(gaps.pessimal, vec![0]);
        assert!((gaps.delta_max_bernoulli[0] - 0.5).abs() < 1e-12);
        assert!((gaps.delta_max_gaussian[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn counterexample_and_single_pair_gaps() {
        let gaps = pessimal_partners(&counterexample_market::<f64>());
        assert_eq!(gaps.pessimal, vec![2, 0, 1]);
        let one = make_global_market::<f64>(1, 1, 0.5, 0.2, RewardModel::Bernoulli).unwrap();
        let gaps = pessimal_partners(&one);
        assert_eq!(gaps.pessimal, vec![0]);
        assert_eq!(gaps.delta_max_bernoulli, vec![0.5]);
        assert_eq!(gaps.delta_min, None);
    }

    #[test]
    fn matching_validation_and_serialization() {
        assert!(Matching::from_assignment(2, vec![Some(0), Some(0)]).is_err());
        assert!(Matching::from_assignment(2, vec![Some(2)]).is_err());
        let part = Matching::from_assignment(3, vec![Some(2), None, Some(0)]).unwrap();
        assert!(!part.is_full());
        assert_eq!(part.player_of(2), Some(0));
        assert_eq!(serde_json::to_string(&part).unwrap(), "[[0,2],[2,0]]");
    }
}
