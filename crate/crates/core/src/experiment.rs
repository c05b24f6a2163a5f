//! Declarative experiments and their CSV output.
//!
//! Per-seed CSV (`<name>.csv`), after one `#` metadata line:
//!
//! ```text
//! experiment,algo,seed,t,player,cum_regret,cum_unstab
//! ```
//!
//! Players are 0-based. Each checkpoint has one row per player with an
//! empty `cum_unstab`, then a `player=-1` row carrying the run's cumulative
//! unstability with an empty `cum_regret`. The summary CSV
//! (`<name>_summary.csv`) has the same layout without `seed`, with mean and
//! standard error columns for both quantities. Floats use 17 significant
//! digits.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::Algorithm;
use crate::engine::{run_batch, BatchResult, SimulationConfig};
use crate::error::{Error, Result};
use crate::market::MarketSpec;
use crate::metrics::RegretKind;
use crate::num::Real;
use crate::tagged::FIELD_MARKER;

pub const CSV_HEADER: &str = "experiment,algo,seed,t,player,cum_regret,cum_unstab";
pub const SUMMARY_HEADER: &str =
    "experiment,algo,t,player,mean_cum_regret,stderr_cum_regret,mean_cum_unstab,stderr_cum_unstab";

fn default_horizon() -> u64 {
    100_000
}

fn default_seeds() -> Vec<u64> {
    (1..=50).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub market: MarketSpec,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub stride: Option<u64>,
    #[serde(default)]
    pub market_seed: Option<u64>,
    #[serde(default)]
    pub regret: RegretKind,
    #[serde(default)]
    pub instrument: bool,
    /// Output directory used when none is given on the command line.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn simulation(&self, algorithm: &Algorithm) -> SimulationConfig {
        SimulationConfig {
            market: self.market.clone(),
            algorithm: algorithm.clone(),
            horizon: self.horizon,
            seeds: self.seeds.clone(),
            stride: self.stride,
            market_seed: self.market_seed,
            regret: self.regret,
            instrument: self.instrument,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\', ',', '\n']) {
            return Err(Error::Parse {
                key: "name".into(),
                message: format!("`{}` is not usable as a file name", self.name),
            });
        }
        if self.algorithms.is_empty() {
            return Err(Error::Parse {
                key: "algorithms".into(),
                message: "at least one algorithm is required".into(),
            });
        }
        if self.seeds.is_empty() {
            return Err(Error::Parse {
                key: "seeds".into(),
                message: "at least one seed is required".into(),
            });
        }
        for alg in &self.algorithms {
            self.simulation(alg).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    /// Value gap between consecutively ranked arms.
    Gap,
    /// Market size with `N = K`.
    Size,
    /// Preference correlation of the utility generator.
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub key: SweepKey,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ExperimentSpec,
    pub sweep: SweepAxis,
}

fn apply_axis(market: &MarketSpec, key: SweepKey, value: f64) -> Result<MarketSpec> {
    let mut out = market.clone();
    let bad = |why: &str| Error::Parse {
        key: "sweep.key".into(),
        message: why.to_string(),
    };
    match (key, &mut out) {
        (SweepKey::Gap, MarketSpec::Global { gap, .. } | MarketSpec::Random { gap, .. }) => {
            *gap = value;
        }
        (
            SweepKey::Size,
            MarketSpec::Global { n, k, .. }
            | MarketSpec::Random { n, k, .. }
            | MarketSpec::Utility { n, k, .. },
        ) => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Parse {
                    key: "sweep.values".into(),
                    message: format!("size {value} is not a positive integer"),
                });
            }
            *n = value as usize;
            *k = value as usize;
        }
        (SweepKey::Beta, MarketSpec::Utility { beta, .. }) => *beta = value,
        (SweepKey::Beta, _) => return Err(bad("beta sweeps need the utility generator")),
        _ => return Err(bad("sweep key does not apply to this market generator")),
    }
    Ok(out)
}

impl SweepSpec {
    /// One experiment per value, named `<base>_<key>=<value>`.
    pub fn expand(&self) -> Result<Vec<ExperimentSpec>> {
        if self.sweep.values.is_empty() {
            return Err(Error::Parse {
                key: "sweep.values".into(),
                message: "empty sweep".into(),
            });
        }
        let key = serde_json::to_value(self.sweep.key)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        self.sweep
            .values
            .iter()
            .map(|&v| {
                let mut spec = self.base.clone();
                spec.name = format!("{}_{key}={v}", self.base.name);
                spec.market = apply_axis(&self.base.market, self.sweep.key, v)?;
                Ok(spec)
            })
            .collect()
    }
}

/// Any accepted config document, expanded to a list of experiments.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentSpec>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        key: "<document>".into(),
        message: e.to_string(),
    })?;
    let specs = if value.get("sweep").is_some() {
        decode::<SweepSpec>(value)?.expand()?
    } else if value.get("experiments").is_some() {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Suite {
            experiments: Vec<ExperimentSpec>,
        }
        decode::<Suite>(value)?.experiments
    } else {
        vec![decode::<ExperimentSpec>(value)?]
    };
    let mut names = std::collections::HashSet::new();
    for spec in &specs {
        spec.validate()?;
        if !names.insert(spec.name.clone()) {
            return Err(Error::Parse {
                key: "name".into(),
                message: format!("duplicate experiment name `{}`", spec.name),
            });
        }
    }
    Ok(specs)
}

/// Sweep expansion for `text`, which is either a sweep document or a single
/// experiment combined with `axis`. An explicit `axis` replaces the one in
/// the document.
pub fn parse_sweep(text: &str, axis: Option<SweepAxis>) -> Result<Vec<ExperimentSpec>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        key: "<document>".into(),
        message: e.to_string(),
    })?;
    let mut sweep = if value.get("sweep").is_some() {
        decode::<SweepSpec>(value)?
    } else {
        let base = decode::<ExperimentSpec>(value)?;
        let sweep = axis.clone().ok_or_else(|| Error::Parse {
            key: "sweep".into(),
            message: "document has no sweep axis and none was given".into(),
        })?;
        SweepSpec { base, sweep }
    };
    if let Some(axis) = axis {
        sweep.sweep = axis;
    }
    let specs = sweep.expand()?;
    for spec in &specs {
        spec.validate()?;
    }
    Ok(specs)
}

fn decode<D: serde::de::DeserializeOwned>(value: Value) -> Result<D> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let mut key = e.path().to_string();
        let mut message = e.inner().to_string();
        // errors from tagged enums carry the rest of the path in the message
        if let Some(rest) = message.strip_prefix(FIELD_MARKER) {
            if let Some((field, inner)) = rest.split_once("`: ") {
                key = format!("{key}.{field}");
                message = inner.to_string();
            }
        }
        Error::Parse { key, message }
    })
}

/// Bundled configs by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "global_5x5" => Some(include_str!("../configs/global_5x5.json")),
        "delta_sweep" => Some(include_str!("../configs/delta_sweep.json")),
        "size_sweep" => Some(include_str!("../configs/size_sweep.json")),
        "beta_sweep" => Some(include_str!("../configs/beta_sweep.json")),
        "counterexample" => Some(include_str!("../configs/counterexample.json")),
        _ => None,
    }
}

pub const BUNDLED: [&str; 5] = [
    "global_5x5",
    "delta_sweep",
    "size_sweep",
    "beta_sweep",
    "counterexample",
];

/// Overrides applied on top of every experiment in a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub horizon: Option<u64>,
    pub stride: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(s) = &self.seeds {
            spec.seeds = s.clone();
        }
        if let Some(h) = self.horizon {
            spec.horizon = h;
        }
        if let Some(s) = self.stride {
            spec.stride = Some(s);
        }
    }
}

/// Parses `1..50`, `3` or `1,4,9` (ranges inclusive, combinable).
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = |part: &str| Error::Parse {
        key: "seeds".into(),
        message: format!("cannot read `{part}`"),
    };
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo.trim().parse().map_err(|_| bad(part))?;
            let hi: u64 = hi
                .trim()
                .trim_start_matches('=')
                .parse()
                .map_err(|_| bad(part))?;
            if lo > hi {
                return Err(bad(part));
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    if out.is_empty() {
        return Err(bad(text));
    }
    Ok(out)
}

pub struct ExperimentResult<T: Real> {
    pub spec: ExperimentSpec,
    pub batches: Vec<BatchResult<T>>,
}

impl<T: Real> ExperimentResult<T> {
    pub fn batch(&self, label: &str) -> Option<&BatchResult<T>> {
        self.batches.iter().find(|b| b.algorithm == label)
    }
}

pub fn run_experiment<T: Real>(spec: &ExperimentSpec) -> Result<ExperimentResult<T>> {
    spec.validate()?;
    let batches = spec
        .algorithms
        .iter()
        .map(|alg| run_batch::<T>(&spec.simulation(alg)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        batches,
    })
}

fn float<T: Real>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

fn metadata<T: Real>(spec: &ExperimentSpec) -> String {
    let market = serde_json::to_string(&spec.market).unwrap_or_default();
    let mut line = format!(
        "# experiment={} horizon={} seeds={} market_spec={}",
        spec.name,
        spec.horizon,
        spec.seeds.len(),
        market
    );
    if spec.market.is_fixed() || spec.market_seed.is_some() {
        let seed = spec.seeds.first().copied().unwrap_or(0);
        if let Ok(m) = spec.simulation(&spec.algorithms[0]).build_market::<T>(seed) {
            let _ = write!(line, " market={}", m.to_json());
        }
    }
    line
}

pub fn write_runs_csv<T: Real, W: Write>(result: &ExperimentResult<T>, mut out: W) -> Result<()> {
    let name = &result.spec.name;
    writeln!(out, "{}", metadata::<T>(&result.spec))?;
    writeln!(out, "{CSV_HEADER}")?;
    for batch in &result.batches {
        let algo = &batch.algorithm;
        for run in &batch.runs {
            let s = &run.series;
            for (c, t) in s.checkpoints.iter().enumerate() {
                for (i, row) in s.regret.iter().enumerate() {
                    writeln!(out, "{name},{algo},{},{t},{i},{},", run.seed, float(row[c]))?;
                }
                writeln!(
                    out,
                    "{name},{algo},{},{t},-1,,{}",
                    run.seed, s.unstability[c]
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_summary_csv<T: Real, W: Write>(
    result: &ExperimentResult<T>,
    mut out: W,
) -> Result<()> {
    let name = &result.spec.name;
    writeln!(out, "{}", metadata::<T>(&result.spec))?;
    writeln!(out, "{SUMMARY_HEADER}")?;
    for batch in &result.batches {
        let algo = &batch.algorithm;
        for (c, t) in batch.checkpoints.iter().enumerate() {
            for (i, (mean, se)) in batch
                .regret_mean
                .iter()
                .zip(&batch.regret_stderr)
                .enumerate()
            {
                writeln!(
                    out,
                    "{name},{algo},{t},{i},{},{},,",
                    float(mean[c]),
                    float(se[c])
                )?;
            }
            writeln!(
                out,
                "{name},{algo},{t},-1,,,{},{}",
                float(batch.unstability_mean[c]),
                float(batch.unstability_stderr[c])
            )?;
        }
    }
    Ok(())
}

/// Writes both CSVs into `dir`, returning their paths.
pub fn write_outputs<T: Real>(result: &ExperimentResult<T>, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let runs = dir.join(format!("{}.csv", result.spec.name));
    let summary = dir.join(format!("{}_summary.csv", result.spec.name));
    let mut buf = Vec::new();
    write_runs_csv(result, &mut buf)?;
    fs::write(&runs, &buf)?;
    buf.clear();
    write_summary_csv(result, &mut buf)?;
    fs::write(&summary, &buf)?;
    Ok(vec![runs, summary])
}

/// The centralized counterexample experiment with overrides applied.
pub fn counterexample_spec(overrides: &Overrides) -> ExperimentSpec {
    let mut spec: ExperimentSpec =
        serde_json::from_str(bundled("counterexample").expect("bundled")).expect("valid bundle");
    overrides.apply(&mut spec);
    spec
}
