//! Release gate. Runs every primary criterion in order on one thread of
//! control so the wall-clock limits are measured without interference, and
//! prints one verdict line per criterion.

use std::io::Write;
use std::time::{Duration, Instant};

use banditmatch::agents::{matching_from_scores, ArmStatistic, BetaPosterior, GaussianPosterior};
use banditmatch::experiment::{
    bundled, parse_config, run_experiment, write_runs_csv, ExperimentResult, ExperimentSpec,
};
use banditmatch::market::counterexample_market;
use banditmatch::rng::SimRng;
use banditmatch::stability::{enumerate_stable_matchings, gale_shapley, Side};
use banditmatch::validate::{stability_oracle_suite, Oracles};
use banditmatch::{BatchResult, PreservationTally, Real};
use rand::SeedableRng;

struct Verdict {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn report(v: &Verdict) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "[{}] criterion {}: {} | {}",
        if v.passed { "PASS" } else { "FAIL" },
        v.id,
        v.title,
        v.detail
    );
    let _ = out.flush();
}

fn spec(name: &str) -> Vec<ExperimentSpec> {
    parse_config(bundled(name).expect("bundled config")).expect("bundled config parses")
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed())
}

fn at(batch: &BatchResult<f64>, t: u64) -> usize {
    batch
        .checkpoints
        .iter()
        .position(|&c| c == t)
        .unwrap_or_else(|| panic!("no checkpoint at {t}"))
}

/// Mean over seeds of player `i`'s regret per round in `(from, to]`.
fn regret_rate(batch: &BatchResult<f64>, player: usize, from: u64, to: u64) -> f64 {
    let (a, b) = (at(batch, from), at(batch, to));
    let per_seed: f64 = batch
        .runs
        .iter()
        .map(|r| (r.series.regret[player][b] - r.series.regret[player][a]) / (to - from) as f64)
        .sum();
    per_seed / batch.runs.len() as f64
}

/// Mean over seeds of the unstable rounds in `(from, to]`.
fn unstable_increase(batch: &BatchResult<f64>, from: u64, to: u64) -> f64 {
    let (a, b) = (at(batch, from), at(batch, to));
    let total: u64 = batch
        .runs
        .iter()
        .map(|r| r.series.unstability[b] - r.series.unstability[a])
        .sum();
    total as f64 / batch.runs.len() as f64
}

fn final_unstability(batch: &BatchResult<f64>) -> f64 {
    *batch.unstability_mean.last().unwrap()
}

fn csv_bytes<T: Real>(result: &ExperimentResult<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_runs_csv(result, &mut buf).unwrap();
    buf
}

fn criterion_1() -> Verdict {
    let (report, elapsed) = timed(|| stability_oracle_suite(200, 1, &Oracles::default()));
    Verdict {
        id: 1,
        title: "stability oracle equivalence",
        passed: report.passed && elapsed < Duration::from_secs(10),
        detail: format!(
            "{} in {:.2}s (limit 10s)",
            report.detail,
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_2() -> Verdict {
    let market = counterexample_market::<f64>();
    let pessimal = gale_shapley(&market, Side::Arms);
    let gs_ok = pessimal.pairs() == vec![(0, 2), (1, 0), (2, 1)];
    let stable = enumerate_stable_matchings(&market).unwrap();
    let unique = stable.len() == 1 && stable[0] == pessimal;
    let mut scores: Vec<Vec<f64>> = (0..3).map(|i| market.mu_row(i).to_vec()).collect();
    scores[0].swap(0, 1);
    let flipped = matching_from_scores(market.arm_rank(), &scores);
    let flip_ok = flipped.arm_of(0) == Some(0);
    Verdict {
        id: 2,
        title: "counterexample exactness",
        passed: gs_ok && unique && flip_ok,
        detail: format!(
            "pessimal {:?}, {} stable matching(s), flipped p1 -> a{}",
            pessimal.pairs(),
            stable.len(),
            flipped.arm_of(0).map_or(0, |j| j + 1)
        ),
    }
}

fn criterion_3(result: &ExperimentResult<f64>, elapsed: Duration) -> Verdict {
    let ts = result.batch("Centralized-TS").unwrap();
    let ucb = result.batch("Centralized-UCB").unwrap();
    let horizon = result.spec.horizon;
    let ts_rate = regret_rate(ts, 0, horizon / 2, horizon);
    let ucb_rate = regret_rate(ucb, 0, horizon / 2, horizon);
    let ratio = ts_rate / ucb_rate;
    Verdict {
        id: 3,
        title: "counterexample separation",
        passed: ts.runs.len() == 50
            && horizon == 100_000
            && ratio >= 10.0
            && ts_rate >= 0.005
            && elapsed < Duration::from_secs(120),
        detail: format!(
            "p1 regret/round TS {ts_rate:.5} UCB {ucb_rate:.5} ratio {ratio:.1} (need >= 10, TS >= 0.005) in {:.1}s (limit 120s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_4(result: &ExperimentResult<f64>, elapsed: Duration) -> Verdict {
    let ts = result.batch("CA-TS").unwrap();
    let ucb = result.batch("CA-UCB").unwrap();
    let horizon = result.spec.horizon;
    let tail = unstable_increase(ts, horizon - 10_000, horizon);
    let (ts_final, ucb_final) = (final_unstability(ts), final_unstability(ucb));
    Verdict {
        id: 4,
        title: "CA-TS convergence on global 5x5",
        passed: ts.runs.len() == 50
            && horizon == 100_000
            && tail < 100.0
            && ts_final <= ucb_final
            && elapsed < Duration::from_secs(300),
        detail: format!(
            "unstable rounds in (90k,100k] {tail:.2} (need < 100); final CA-TS {ts_final:.1} vs CA-UCB {ucb_final:.1} in {:.1}s (limit 300s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_5(results: &[&ExperimentResult<f64>]) -> Verdict {
    let mut tally = PreservationTally::default();
    let mut per_algo = Vec::new();
    for r in results {
        for b in &r.batches {
            tally = tally.merge(b.preservation);
            if b.preservation.checked > 0 {
                per_algo.push(format!(
                    "{} {}/{}",
                    b.algorithm, b.preservation.violations, b.preservation.checked
                ));
            }
        }
    }
    Verdict {
        id: 5,
        title: "stability preservation trace invariant",
        passed: tally.violations == 0 && tally.checked > 0,
        detail: format!(
            "{} violations in {} checked rounds ({})",
            tally.violations,
            tally.checked,
            per_algo.join(", ")
        ),
    }
}

fn criterion_6(counterexample: &ExperimentResult<f64>) -> Verdict {
    let first = csv_bytes(counterexample);
    let again = run_experiment::<f64>(&counterexample.spec).unwrap();
    let same_counterexample = first == csv_bytes(&again);

    let mut global = spec("global_5x5").remove(0);
    global.seeds = (1..=5).collect();
    global.horizon = 20_000;
    let a = csv_bytes(&run_experiment::<f64>(&global).unwrap());
    let b = csv_bytes(&run_experiment::<f64>(&global).unwrap());
    let same_global = a == b;
    Verdict {
        id: 6,
        title: "determinism",
        passed: same_counterexample && same_global,
        detail: format!(
            "counterexample CSV {} bytes identical: {same_counterexample}; global_5x5 CSV {} bytes identical: {same_global}",
            first.len(),
            a.len()
        ),
    }
}

fn criterion_7() -> Verdict {
    let mut rng = SimRng::seed_from_u64(7);
    let mut beta = <BetaPosterior as ArmStatistic<f64>>::fresh();
    for _ in 0..10_000 {
        let x = if f64::uniform(&mut rng) < 0.7 {
            1.0
        } else {
            0.0
        };
        beta.record(x, &mut rng).unwrap();
    }
    let mean: f64 = beta.mean();
    let inside = (0..1000)
        .filter(|_| {
            let s: f64 = beta.score(1, &mut rng);
            (0.65..=0.75).contains(&s)
        })
        .count();
    let freq = inside as f64 / 1000.0;

    let mut gauss = <GaussianPosterior<f64> as ArmStatistic<f64>>::fresh();
    let mut sum = 0.0;
    for _ in 0..10_000 {
        let x = 0.7 + f64::standard_normal(&mut rng);
        sum += x;
        gauss.record(x, &mut rng).unwrap();
    }
    let avg = sum / 10_000.0;
    let rel = ((gauss.mean() - avg) / avg).abs();
    Verdict {
        id: 7,
        title: "posterior correctness",
        passed: (mean - 0.7).abs() <= 0.02 && freq >= 0.99 && rel <= 1e-12,
        detail: format!(
            "Beta mean {mean:.4}, samples in [0.65,0.75] {freq:.3}, Gaussian relative error {rel:.1e}"
        ),
    }
}

fn criterion_8() -> Verdict {
    let sizes = spec("size_sweep");
    let pick = |n: &str| -> ExperimentSpec {
        let mut s = sizes
            .iter()
            .find(|s| s.name.ends_with(n))
            .unwrap_or_else(|| panic!("size_sweep has no {n}"))
            .clone();
        s.algorithms.retain(|a| a.label() == "CA-TS-Gauss");
        s
    };
    let large = pick("size=40");
    let (large_result, elapsed) = timed(|| run_experiment::<f64>(&large).unwrap());
    let small = run_experiment::<f64>(&pick("size=5")).unwrap();
    let batch = &small.batches[0];
    let horizon = small.spec.horizon;
    let share = unstable_increase(batch, horizon - 10_000, horizon) / 10_000.0;
    Verdict {
        id: 8,
        title: "Gaussian CA-TS scale",
        passed: large_result.batches[0].runs.len() == 50
            && large.horizon == 100_000
            && elapsed < Duration::from_secs(600)
            && share < 0.05,
        detail: format!(
            "K=N=40 x 50 seeds in {:.1}s (limit 600s); K=N=5 unstable share of last 10k rounds {:.4} (need < 0.05)",
            elapsed.as_secs_f64(),
            share
        ),
    }
}

#[test]
fn acceptance() {
    let _ = writeln!(std::io::stdout().lock());
    let mut verdicts = Vec::new();
    let mut record = |v: Verdict| {
        report(&v);
        verdicts.push((v.id, v.passed));
    };

    record(criterion_1());
    record(criterion_2());

    let mut counterexample = spec("counterexample").remove(0);
    counterexample.instrument = true;
    let (counter_result, counter_time) = timed(|| run_experiment::<f64>(&counterexample).unwrap());
    record(criterion_3(&counter_result, counter_time));

    let mut global = spec("global_5x5").remove(0);
    global
        .algorithms
        .retain(|a| matches!(a.label(), "CA-TS" | "CA-UCB"));
    global.instrument = true;
    let (global_result, global_time) = timed(|| run_experiment::<f64>(&global).unwrap());
    record(criterion_4(&global_result, global_time));

    record(criterion_5(&[&counter_result, &global_result]));
    record(criterion_6(&counter_result));
    record(criterion_7());
    record(criterion_8());

    let failed: Vec<u32> = verdicts
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(id, _)| *id)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
