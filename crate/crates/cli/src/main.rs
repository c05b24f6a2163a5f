use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use banditmatch::experiment::{
    bundled, counterexample_spec, parse_config, parse_seeds, parse_sweep, run_experiment,
    write_outputs, ExperimentSpec, Overrides, SweepAxis, SweepKey, BUNDLED,
};
use banditmatch::validate::{run_all, Oracles};

#[derive(Parser)]
#[command(
    name = "banditmatch",
    version,
    about = "Bandit learning in matching markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config and write CSVs.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Centralized TS vs UCB on the pinned 3x3 market.
    DemoCounterexample {
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in oracle suites.
    Validate,
    /// Expand a parameter grid and run each point.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis to sweep, replacing any axis in the config.
        #[arg(long, value_enum, requires = "values")]
        key: Option<Key>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', requires = "key")]
        values: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct Common {
    /// Config file, or the name of a bundled config.
    #[arg(long)]
    config: Option<String>,
    /// Output directory [default: results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed list such as `1..50` or `1,2,3`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Checkpoint spacing in rounds.
    #[arg(long)]
    stride: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Key {
    Gap,
    Size,
    Beta,
}

impl From<Key> for SweepKey {
    fn from(k: Key) -> Self {
        match k {
            Key::Gap => SweepKey::Gap,
            Key::Size => SweepKey::Size,
            Key::Beta => SweepKey::Beta,
        }
    }
}

impl Common {
    fn overrides(&self) -> anyhow::Result<Overrides> {
        Ok(Overrides {
            seeds: self.seeds.as_deref().map(parse_seeds).transpose()?,
            horizon: self.horizon,
            stride: self.stride,
        })
    }

    fn config_text(&self) -> anyhow::Result<String> {
        let Some(name) = &self.config else {
            bail!(
                "--config is required (a file or one of: {})",
                BUNDLED.join(", ")
            );
        };
        if Path::new(name).exists() {
            return fs::read_to_string(name).with_context(|| format!("reading {name}"));
        }
        match bundled(name) {
            Some(text) => Ok(text.to_string()),
            None => bail!(
                "config `{name}` is neither a file nor a bundled config ({})",
                BUNDLED.join(", ")
            ),
        }
    }
}

fn execute(specs: Vec<ExperimentSpec>, common: &Common) -> anyhow::Result<()> {
    let overrides = common.overrides()?;
    for mut spec in specs {
        overrides.apply(&mut spec);
        let out = common
            .out
            .clone()
            .or_else(|| spec.out.clone())
            .unwrap_or_else(|| PathBuf::from("results"));
        let started = Instant::now();
        let result =
            run_experiment::<f64>(&spec).with_context(|| format!("experiment `{}`", spec.name))?;
        for batch in &result.batches {
            if spec.instrument {
                eprintln!(
                    "{}/{}: preservation checks {} violations {}",
                    spec.name,
                    batch.algorithm,
                    batch.preservation.checked,
                    batch.preservation.violations
                );
            }
        }
        for path in write_outputs(&result, &out)? {
            println!("{}", path.display());
        }
        eprintln!("{}: {:.1}s", spec.name, started.elapsed().as_secs_f64());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { common } => common
            .config_text()
            .and_then(|text| Ok(parse_config(&text)?))
            .and_then(|specs| execute(specs, &common)),
        Command::DemoCounterexample { common } => {
            let spec = counterexample_spec(&Overrides::default());
            execute(vec![spec], &common)
        }
        Command::Sweep {
            common,
            key,
            values,
        } => {
            let axis = key.zip(values).map(|(k, values)| SweepAxis {
                key: k.into(),
                values,
            });
            common
                .config_text()
                .and_then(|text| Ok(parse_sweep(&text, axis)?))
                .and_then(|specs| execute(specs, &common))
        }
        Command::Validate => {
            let reports = run_all(&Oracles::default());
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(anyhow::anyhow!("validation failed"))
            }
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
