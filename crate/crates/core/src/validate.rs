//! Self-check suites behind `banditmatch validate`.
//!
//! The matching and conflict routines under test are passed in through
//! [`Oracles`] so that deliberately broken versions can be checked to fail.

use rand::SeedableRng;

use crate::agents::Algorithm;
use crate::engine::{resolve_conflicts, run_batch, SimulationConfig};
use crate::experiment::{run_experiment, write_runs_csv, ExperimentSpec};
use crate::market::{make_random_market, ArmRanks, Market, MarketSpec, RewardModel};
use crate::metrics::RegretKind;
use crate::rng::SimRng;
use crate::stability::{enumerate_stable_matchings, gale_shapley, Matching, Side};

pub type GaleShapleyFn = fn(&Market<f64>, Side) -> Matching;
pub type ResolveFn = fn(&[usize], &ArmRanks) -> Matching;

#[derive(Clone, Copy)]
pub struct Oracles {
    pub gale_shapley: GaleShapleyFn,
    pub resolve: ResolveFn,
}

impl Default for Oracles {
    fn default() -> Self {
        Self {
            gale_shapley: gale_shapley::<f64>,
            resolve: resolve_conflicts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:<22} {}", self.name, self.detail)
    }
}

/// Independent blocking-pair scan over full matchings.
fn has_blocking_pair(market: &Market<f64>, m: &Matching) -> bool {
    let ranks = market.arm_rank();
    (0..market.n_players()).any(|i| {
        (0..market.n_arms()).any(|j| {
            let player_wants = match m.arm_of(i) {
                None => true,
                Some(cur) => market.mu(i, j) > market.mu(i, cur),
            };
            let arm_wants = match m.player_of(j) {
                None => true,
                Some(h) => ranks.rank(j, i) < ranks.rank(j, h),
            };
            player_wants && arm_wants
        })
    })
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn check_market(market: &Market<f64>, oracles: &Oracles) -> Result<(), String> {
    let n = market.n_players();
    let stable = enumerate_stable_matchings(market).map_err(|e| e.to_string())?;
    let brute: Vec<Matching> = permutations(n)
        .into_iter()
        .map(|p| Matching::from_assignment(n, p.into_iter().map(Some).collect()).expect("perm"))
        .filter(|m| !has_blocking_pair(market, m))
        .collect();
    if brute.len() != stable.len() || brute.iter().any(|m| !stable.contains(m)) {
        return Err(format!(
            "enumeration found {} stable matchings, brute force {}",
            stable.len(),
            brute.len()
        ));
    }
    let gs_arms = (oracles.gale_shapley)(market, Side::Arms);
    let gs_players = (oracles.gale_shapley)(market, Side::Players);
    for (label, m) in [
        ("arm-proposing", &gs_arms),
        ("player-proposing", &gs_players),
    ] {
        if !stable.contains(m) {
            return Err(format!("{label} result {:?} is not stable", m.pairs()));
        }
    }
    for i in 0..n {
        let value = |m: &Matching| m.arm_of(i).map(|j| market.mu(i, j)).unwrap_or(0.0);
        let worst = stable.iter().map(value).fold(f64::INFINITY, f64::min);
        let best = stable.iter().map(value).fold(f64::NEG_INFINITY, f64::max);
        if value(&gs_arms) != worst {
            return Err(format!(
                "arm-proposing result is not pessimal for player {i}"
            ));
        }
        if value(&gs_players) != best {
            return Err(format!(
                "player-proposing result is not optimal for player {i}"
            ));
        }
    }
    Ok(())
}

/// Gale-Shapley from both sides against exhaustive enumeration on random
/// square markets of size 2 to 4.
pub fn stability_oracle_suite(n_markets: usize, seed: u64, oracles: &Oracles) -> SuiteReport {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for idx in 0..n_markets {
        let n = 2 + idx % 3;
        let market = make_random_market::<f64, _>(n, n, 0.1, 0.2, RewardModel::Bernoulli, &mut rng)
            .expect("valid generator parameters");
        if let Err(e) = check_market(&market, oracles) {
            failures.push(format!("market {idx} ({n}x{n}): {e}"));
        }
    }
    SuiteReport {
        name: "stability-oracle",
        passed: failures.is_empty(),
        detail: match failures.first() {
            None => format!("{n_markets} markets agree"),
            Some(first) => format!("{} of {n_markets} failed; first: {first}", failures.len()),
        },
    }
}

/// Worked conflict-resolution examples.
pub fn conflict_resolution_suite(oracles: &Oracles) -> SuiteReport {
    let identity = ArmRanks::identity(2, 2);
    // arm 0 ranks p3 > p1 > p2
    let three = ArmRanks::from_orders(&[vec![2, 0, 1], vec![0, 1, 2], vec![0, 1, 2]], 3)
        .expect("permutations");
    let reversed = ArmRanks::from_orders(&[vec![1, 0], vec![1, 0]], 2).expect("permutations");
    type Case<'a> = (&'static str, Vec<usize>, &'a ArmRanks, Vec<Option<usize>>);
    let cases: [Case; 4] = [
        (
            "shared arm, first preferred",
            vec![0, 0],
            &identity,
            vec![Some(0), None],
        ),
        (
            "distinct arms",
            vec![1, 0],
            &identity,
            vec![Some(1), Some(0)],
        ),
        (
            "three on one arm",
            vec![0, 0, 0],
            &three,
            vec![None, None, Some(0)],
        ),
        (
            "shared arm, second preferred",
            vec![1, 1],
            &reversed,
            vec![None, Some(1)],
        ),
    ];
    let mut failed = Vec::new();
    for (label, attempts, ranks, expected) in cases {
        let m = (oracles.resolve)(&attempts, ranks);
        if m.assignment() != expected.as_slice() {
            failed.push(label);
        }
    }
    SuiteReport {
        name: "conflict-resolution",
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            "4 examples".into()
        } else {
            format!("failed: {}", failed.join(", "))
        },
    }
}

/// Instrumented conflict-avoiding runs: whenever the premises of one-step
/// stability preservation hold, the next attempts must be stable.
pub fn preservation_suite(horizon: u64, seeds: Vec<u64>) -> SuiteReport {
    let markets = [
        MarketSpec::Global {
            n: 3,
            k: 3,
            mu_min: 0.1,
            gap: 0.2,
            reward_model: RewardModel::Bernoulli,
        },
        MarketSpec::Random {
            n: 4,
            k: 4,
            mu_min: 0.1,
            gap: 0.2,
            reward_model: RewardModel::Bernoulli,
        },
        MarketSpec::Counterexample,
    ];
    let algorithms = [
        Algorithm::CaTs { lambda: 0.1 },
        Algorithm::CaUcb { lambda: 0.1 },
    ];
    let mut checked = 0;
    let mut violations = 0;
    for market in &markets {
        for alg in &algorithms {
            let mut config =
                SimulationConfig::new(market.clone(), alg.clone(), horizon, seeds.clone());
            config.instrument = true;
            match run_batch::<f64>(&config) {
                Ok(batch) => {
                    checked += batch.preservation.checked;
                    violations += batch.preservation.violations;
                }
                Err(e) => {
                    return SuiteReport {
                        name: "stability-preservation",
                        passed: false,
                        detail: e.to_string(),
                    }
                }
            }
        }
    }
    SuiteReport {
        name: "stability-preservation",
        passed: violations == 0 && checked > 0,
        detail: format!("{violations} violations in {checked} checked rounds"),
    }
}

/// Two runs of the same experiment must produce identical CSV bytes.
pub fn determinism_suite(horizon: u64) -> SuiteReport {
    let spec = ExperimentSpec {
        name: "determinism".into(),
        market: MarketSpec::Random {
            n: 3,
            k: 4,
            mu_min: 0.1,
            gap: 0.2,
            reward_model: RewardModel::Bernoulli,
        },
        algorithms: vec![
            Algorithm::CaTs { lambda: 0.1 },
            Algorithm::PEtc { epsilon: 0.2 },
            Algorithm::CentralizedTs,
        ],
        horizon,
        seeds: vec![3, 1, 2],
        stride: None,
        market_seed: None,
        regret: RegretKind::Pseudo,
        instrument: false,
        out: None,
    };
    let render = || -> crate::Result<Vec<u8>> {
        let result = run_experiment::<f64>(&spec)?;
        let mut buf = Vec::new();
        write_runs_csv(&result, &mut buf)?;
        Ok(buf)
    };
    let (passed, detail) = match (render(), render()) {
        (Ok(a), Ok(b)) if a == b => (true, format!("{} identical bytes", a.len())),
        (Ok(_), Ok(_)) => (false, "CSV output differs between runs".into()),
        (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
    };
    SuiteReport {
        name: "determinism",
        passed,
        detail,
    }
}

/// Every suite at its release-gate size.
pub fn run_all(oracles: &Oracles) -> Vec<SuiteReport> {
    vec![
        stability_oracle_suite(200, 2024, oracles),
        conflict_resolution_suite(oracles),
        preservation_suite(5_000, (1..=5).collect()),
        determinism_suite(2_000),
    ]
}
