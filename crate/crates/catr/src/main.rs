use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use catr::run::{self, EvalRequest, Snapshots, TrainRequest};
use catr::{checkpoint, Method, RunConfig, Scenario, Timing};
use catr_core::eval::MetricsRow;
use catr_core::nn::Layout;

#[derive(Parser)]
#[command(name = "catr", version, about = "Grid-based airport taxi routing: planners, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a classical planner on a scenario file and write its metrics.
    Plan {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// `wall` fills the RT column with measured time (not reproducible).
        #[arg(long, default_value = "off")]
        timing: Timing,
    },
    /// Train a policy on generated traffic.
    Train {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        map: PathBuf,
        /// Traffic generator, `density:<multiplier>`.
        #[arg(long, default_value = "density:1.0")]
        scenario_gen: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Print every log line to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Evaluate a method on generated episodes.
    Eval {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        method: Method,
        /// Required for catr, ppo and dqn.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write a pixmap every K steps into `<out>.snapshots/`; 0 disables.
        #[arg(long, default_value_t = 0)]
        snapshot_every: u32,
        #[arg(long, default_value = "off")]
        timing: Timing,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn write_csv(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Plan { method, map, scenario, config, seed, out, timing } => {
            let config = load_config(config.as_deref())?;
            let map = run::load_map(&map)?;
            let parsed = Scenario::load(&scenario).with_context(|| format!("scenario {}", scenario.display()))?;
            let name = scenario.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
            let (row, _) = run::plan_scenario(&map, &config, &parsed, &name, method, seed, timing)?;
            write_csv(&out, &format!("{}\n{}\n", MetricsRow::HEADER, row.to_csv()))?;
            println!("{}", row.to_csv());
        }
        Command::Train { method, map, scenario_gen, config, seed, out_dir, verbose } => {
            let config = load_config(config.as_deref())?;
            let density = run::parse_scenario_gen(&scenario_gen)?;
            let map = run::load_map(&map)?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            std::fs::write(out_dir.join("config.txt"), config.to_text())?;
            let req = TrainRequest { map: &map, config: &config, method, density, seed, out_dir: Some(&out_dir) };
            run::train(&req, &mut |line| {
                if verbose {
                    eprintln!("{line}");
                }
            })?;
            println!("wrote {}", out_dir.join("final.catr").display());
        }
        Command::Eval { map, method, checkpoint, density, episodes, seed, config, out, snapshot_every, timing } => {
            let config = load_config(config.as_deref())?;
            let map = run::load_map(&map)?;
            let params = match (&checkpoint, method.is_learned()) {
                (Some(path), true) => Some(
                    checkpoint::load_matching(path, &Layout::new(config.net)?)
                        .with_context(|| format!("checkpoint {}", path.display()))?,
                ),
                (None, true) => bail!("method {method} needs --checkpoint"),
                (Some(_), false) => bail!("method {method} does not take a checkpoint"),
                (None, false) => None,
            };
            let snapshots = if snapshot_every > 0 {
                let dir = out.with_extension("snapshots");
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                Some(Snapshots { dir, every: snapshot_every })
            } else {
                None
            };
            let req = EvalRequest {
                map: &map,
                config: &config,
                method,
                params: params.as_ref(),
                density,
                episodes,
                seed,
                timing,
                snapshots,
            };
            let report = run::evaluate(&req)?;
            write_csv(&out, &report.csv())?;
            println!("{}", report.pooled.to_csv());
        }
    }
    Ok(())
}
