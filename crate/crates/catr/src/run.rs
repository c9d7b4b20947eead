//! The operations behind the `plan`, `train` and `eval` commands, usable
//! without going through files.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use catr_core::env::{generate_runway_schedule, generate_traffic, World};
use catr_core::eval::{
    compute_metrics, render_ppm, run_episode, AstarController, Clock, Controller, DijkstraController, EpisodeLog,
    GaController, GreedyPolicy, GreedyQ, MetricsRow, NullClock, RandomPolicy,
};
use catr_core::map::GridMap;
use catr_core::nn::{Layout, ModelParams};
use catr_core::train::{train_dqn, train_ppo, DqnProgress, PolicyInput, Rollout, UpdateStats};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// PPO with the foresight tree and the decomposed critic.
    Catr,
    /// PPO with the foresight tree zeroed and a scalar critic loss.
    Ppo,
    Dqn,
    Dijkstra,
    Astar,
    Ga,
    /// Uniform choice among valid actions.
    Random,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Catr, Method::Ppo, Method::Dqn, Method::Dijkstra, Method::Astar, Method::Ga, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Catr => "catr",
            Method::Ppo => "ppo",
            Method::Dqn => "dqn",
            Method::Dijkstra => "dijkstra",
            Method::Astar => "astar",
            Method::Ga => "ga",
            Method::Random => "random",
        }
    }

    /// Methods whose decisions come from a trained network.
    pub fn is_learned(self) -> bool {
        matches!(self, Method::Catr | Method::Ppo | Method::Dqn)
    }

    pub fn is_planner(self) -> bool {
        matches!(self, Method::Dijkstra | Method::Astar | Method::Ga)
    }

    pub fn policy_input(self, config: &RunConfig) -> PolicyInput {
        PolicyInput { obs: config.obs, hide_tree: self == Method::Ppo }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Method, String> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            format!("unknown method `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Whether the RT column measures wall-clock time. Measured times differ
/// between runs, so only `Off` gives byte-identical CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Timing {
    #[default]
    Off,
    Wall,
}

impl FromStr for Timing {
    type Err = String;

    fn from_str(s: &str) -> Result<Timing, String> {
        match s {
            "off" => Ok(Timing::Off),
            "wall" => Ok(Timing::Wall),
            _ => Err(format!("unknown timing `{s}` (expected off or wall)")),
        }
    }
}

/// Seconds since construction from the monotonic system clock.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

fn clock(timing: Timing) -> Box<dyn Clock> {
    match timing {
        Timing::Off => Box::new(NullClock),
        Timing::Wall => Box::new(WallClock::default()),
    }
}

pub fn load_map(path: &Path) -> Result<Arc<GridMap>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading map {}", path.display()))?;
    let map = GridMap::parse(&text).with_context(|| format!("parsing map {}", path.display()))?;
    Ok(Arc::new(map))
}

/// Parses `density:<multiplier>`.
pub fn parse_scenario_gen(spec: &str) -> Result<f64> {
    let value = spec.strip_prefix("density:").with_context(|| format!("scenario generator `{spec}` is not density:<x>"))?;
    let density: f64 = value.parse().with_context(|| format!("density `{value}` is not a number"))?;
    if !(density.is_finite() && density >= 0.0) {
        bail!("density must be a non-negative number, got {density}");
    }
    Ok(density)
}

/// A generated scenario: traffic and runway events drawn from `seed`.
pub fn generated_world(map: &Arc<GridMap>, config: &RunConfig, density: f64, seed: u64) -> Result<World> {
    let mut traffic = config.traffic;
    traffic.multiplier = density;
    let flights = generate_traffic(map, &traffic, seed)?;
    let runway = generate_runway_schedule(map, &traffic, seed)?;
    Ok(World::new(map.clone(), config.env, flights, runway)?)
}

pub fn scenario_world(map: &Arc<GridMap>, config: &RunConfig, scenario: &Scenario) -> Result<World> {
    Ok(World::new(map.clone(), config.env, scenario.flights.clone(), scenario.runway.clone())?)
}

/// Scenario seeds used while training; disjoint from the small seeds
/// evaluation uses.
pub fn training_scenario_seed(run_seed: u64, episode: u64) -> u64 {
    (run_seed << 32) | (1 << 31) | (episode & 0x7fff_ffff)
}

/// Scenario seeds for the evaluation episodes run during training.
pub fn monitor_scenario_seed(run_seed: u64, episode: u64) -> u64 {
    (run_seed << 32) | (1 << 30) | (episode & 0x3fff_ffff)
}

/// Builds the decision source for `method`. Learned methods need `params`.
pub fn controller(method: Method, params: Option<&ModelParams>, config: &RunConfig, seed: u64) -> Result<Box<dyn Controller>> {
    let need = || params.cloned().with_context(|| format!("method {method} needs a checkpoint"));
    Ok(match method {
        Method::Catr | Method::Ppo => Box::new(GreedyPolicy { params: need()?, input: method.policy_input(config) }),
        Method::Dqn => Box::new(GreedyQ { params: need()?, input: method.policy_input(config) }),
        Method::Dijkstra => Box::new(DijkstraController::default()),
        Method::Astar => Box::new(AstarController::new(config.astar)),
        Method::Ga => {
            let mut ga = config.ga;
            ga.seed = seed;
            Box::new(GaController::new(ga))
        }
        Method::Random => Box::new(RandomPolicy::new(seed)),
    })
}

/// Where and how often to write pixmap snapshots during evaluation.
#[derive(Debug, Clone)]
pub struct Snapshots {
    pub dir: PathBuf,
    pub every: u32,
}

/// Runs one episode, writing snapshots `<dir>/<label>_step<NNNN>.ppm`
/// every `snapshots.every` steps (and of the final state).
pub fn run_one(
    world: World,
    controller: &mut dyn Controller,
    timing: Timing,
    snapshots: Option<&Snapshots>,
    label: &str,
    scale: usize,
) -> Result<EpisodeLog> {
    let clock = clock(timing);
    let mut write_err = None;
    let mut on_step = |w: &World| -> catr_core::Result<()> {
        if let Some(s) = snapshots {
            let step = w.step_index();
            if s.every > 0 && (step % s.every == 0 || w.is_finished()) {
                let path = s.dir.join(format!("{label}_step{step:04}.ppm"));
                if let Err(e) = std::fs::write(&path, render_ppm(w, scale)) {
                    write_err = Some(anyhow::Error::new(e).context(format!("writing snapshot {}", path.display())));
                    return Err(catr_core::Error::Metrics("snapshot could not be written".into()));
                }
            }
        }
        Ok(())
    };
    let result = run_episode(world, controller, clock.as_ref(), &mut on_step);
    if let Some(e) = write_err {
        return Err(e);
    }
    Ok(result?)
}

/// Evaluation of one method over generated episodes.
#[derive(Debug, Clone)]
pub struct EvalRequest<'a> {
    pub map: &'a Arc<GridMap>,
    pub config: &'a RunConfig,
    pub method: Method,
    pub params: Option<&'a ModelParams>,
    pub density: f64,
    pub episodes: usize,
    pub seed: u64,
    pub timing: Timing,
    pub snapshots: Option<Snapshots>,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    /// One row per episode, in episode order.
    pub episodes: Vec<MetricsRow>,
    /// Metrics pooled over all episodes.
    pub pooled: MetricsRow,
    pub logs: Vec<EpisodeLog>,
}

impl EvalReport {
    pub fn csv(&self) -> String {
        let mut out = String::from(MetricsRow::HEADER);
        out.push('\n');
        for row in self.episodes.iter().chain(std::iter::once(&self.pooled)) {
            out.push_str(&row.to_csv());
            out.push('\n');
        }
        out
    }
}

/// Episode `e` uses scenario seed `seed + e`.
pub fn evaluate(req: &EvalRequest<'_>) -> Result<EvalReport> {
    if req.episodes == 0 {
        bail!("need at least one evaluation episode");
    }
    if let Some(p) = req.params {
        let expected = Layout::new(req.config.net)?;
        if p.layout().shapes() != expected.shapes() {
            bail!("checkpoint layout does not match the configured network");
        }
    }
    let mut rows = Vec::with_capacity(req.episodes);
    let mut logs = Vec::with_capacity(req.episodes);
    for e in 0..req.episodes as u64 {
        let scenario_seed = req.seed.wrapping_add(e);
        let world = generated_world(req.map, req.config, req.density, scenario_seed)?;
        let mut ctl = controller(req.method, req.params, req.config, scenario_seed)?;
        let label = format!("ep{e:03}");
        let log = run_one(world, ctl.as_mut(), req.timing, req.snapshots.as_ref(), &label, req.config.snapshot_scale)
            .with_context(|| format!("episode {e} (scenario seed {scenario_seed})"))?;
        rows.push(MetricsRow {
            scenario: format!("gen{scenario_seed}"),
            method: req.method.name().into(),
            density: req.density,
            seed: scenario_seed,
            metrics: compute_metrics(std::slice::from_ref(&log))?,
        });
        logs.push(log);
    }
    let pooled = MetricsRow {
        scenario: "pooled".into(),
        method: req.method.name().into(),
        density: req.density,
        seed: req.seed,
        metrics: compute_metrics(&logs)?,
    };
    Ok(EvalReport { episodes: rows, pooled, logs })
}

/// Runs a planner on a fixed scenario and returns its metrics row.
pub fn plan_scenario(
    map: &Arc<GridMap>,
    config: &RunConfig,
    scenario: &Scenario,
    scenario_name: &str,
    method: Method,
    seed: u64,
    timing: Timing,
) -> Result<(MetricsRow, EpisodeLog)> {
    if !method.is_planner() {
        bail!("plan accepts dijkstra, astar or ga, not {method}");
    }
    let world = scenario_world(map, config, scenario)?;
    let mut ctl = controller(method, None, config, seed)?;
    let log = run_one(world, ctl.as_mut(), timing, None, "plan", config.snapshot_scale)?;
    let row = MetricsRow {
        scenario: scenario_name.into(),
        method: method.name().into(),
        density: config.traffic.multiplier,
        seed,
        metrics: compute_metrics(std::slice::from_ref(&log))?,
    };
    Ok((row, log))
}

pub const PPO_LOG_HEADER: &str = "update,mean_return,train_SR,L_dist,L_move,L_arrive,L_prox,L_conf,\
w_dist,w_move,w_arrive,w_prox,w_conf,g_dist,g_move,g_arrive,g_prox,g_conf,\
entropy,policy_loss,clip_fraction,eval_HCR,eval_PCR,eval_SR";

pub const DQN_LOG_HEADER: &str =
    "episode,env_steps,updates,epsilon,mean_loss,mean_return,train_HCR,train_PCR,eval_HCR,eval_PCR,eval_SR";

fn ppo_log_line(update: usize, rollout: &Rollout, stats: &UpdateStats, eval: Option<&MetricsRow>) -> String {
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",");
    let sr = if rollout.spawned == 0 { 0.0 } else { 100.0 * rollout.arrived as f64 / rollout.spawned as f64 };
    let eval = eval.map_or(",,".to_string(), |r| {
        format!("{:.3},{:.3},{:.3}", r.metrics.hcr, r.metrics.pcr, r.metrics.sr)
    });
    format!(
        "{update},{:.6},{sr:.3},{},{},{},{:.6},{:.6},{:.6},{eval}",
        rollout.mean_return(),
        list(&stats.value_losses),
        list(&stats.weights),
        list(&stats.grad_norms),
        stats.entropy,
        stats.policy_loss,
        stats.clip_fraction
    )
}

/// Training options beyond the config file.
#[derive(Debug, Clone)]
pub struct TrainRequest<'a> {
    pub map: &'a Arc<GridMap>,
    pub config: &'a RunConfig,
    pub method: Method,
    pub density: f64,
    pub seed: u64,
    /// Receives `train.csv`, periodic checkpoints and `final.catr`.
    pub out_dir: Option<&'a Path>,
}

fn monitor(req: &TrainRequest<'_>, params: &ModelParams) -> Result<MetricsRow> {
    let mut logs = Vec::new();
    for e in 0..req.config.eval_episodes as u64 {
        let world = generated_world(req.map, req.config, req.density, monitor_scenario_seed(req.seed, e))?;
        let mut ctl = controller(req.method, Some(params), req.config, e)?;
        logs.push(run_one(world, ctl.as_mut(), Timing::Off, None, "monitor", 1)?);
    }
    Ok(MetricsRow {
        scenario: "monitor".into(),
        method: req.method.name().into(),
        density: req.density,
        seed: req.seed,
        metrics: compute_metrics(&logs)?,
    })
}

/// Trains `req.method` from a fresh initialization and returns the final
/// parameters. With an output directory, writes the per-update log, a
/// checkpoint every `checkpoint_every` updates (episodes for DQN), and
/// `final.catr`; if training aborts, the parameters from before the failing
/// step are saved as `last_good.catr`.
pub fn train(req: &TrainRequest<'_>, progress: &mut dyn FnMut(&str)) -> Result<ModelParams> {
    if !req.method.is_learned() {
        bail!("train accepts catr, ppo or dqn, not {}", req.method);
    }
    let config = req.config;
    let layout = Layout::new(config.net)?;
    let mut params = ModelParams::init(layout, req.seed);
    let input = req.method.policy_input(config);
    let mut log: Option<BufWriter<File>> = match req.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("train.csv");
            Some(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
        }
        None => None,
    };
    let mut scenario = |episode: u64| -> catr_core::Result<World> {
        let seed = training_scenario_seed(req.seed, episode);
        generated_world(req.map, config, req.density, seed).map_err(|e| catr_core::Error::Training(format!("{e:#}")))
    };
    let mut side_error: Option<anyhow::Error> = None;
    let write = |log: &mut Option<BufWriter<File>>, line: &str| -> std::io::Result<()> {
        if let Some(w) = log {
            writeln!(w, "{line}")?;
        }
        Ok(())
    };
    let save = |params: &ModelParams, name: &str| -> Result<()> {
        if let Some(dir) = req.out_dir {
            let path = dir.join(name);
            checkpoint::save(params, &path).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    };

    let outcome = match req.method {
        Method::Catr | Method::Ppo => {
            let mut tc = config.train;
            tc.seed = req.seed;
            let decompose = req.method == Method::Catr;
            write(&mut log, PPO_LOG_HEADER)?;
            train_ppo(&mut params, &tc, &input, decompose, &mut scenario, &mut |update, p, rollout, stats| {
                let n = update + 1;
                let mut step = || -> Result<()> {
                    let eval = if n % config.eval_every == 0 || n == tc.updates { Some(monitor(req, p)?) } else { None };
                    let line = ppo_log_line(update, rollout, stats, eval.as_ref());
                    write(&mut log, &line)?;
                    progress(&line);
                    if n % config.checkpoint_every == 0 {
                        save(p, &format!("checkpoint_{n:05}.catr"))?;
                    }
                    Ok(())
                };
                step().map_err(|e| {
                    let msg = format!("{e:#}");
                    side_error = Some(e);
                    catr_core::Error::Training(msg)
                })
            })
        }
        Method::Dqn => {
            let mut dc = config.dqn;
            dc.seed = req.seed;
            write(&mut log, DQN_LOG_HEADER)?;
            train_dqn(&mut params, &dc, &input, &mut scenario, &mut |prog: &DqnProgress, p: &ModelParams| {
                let n = prog.episode;
                let (sum_h, sum_p, spawned) = (prog.headon_events, prog.proximity_events, prog.spawned);
                let mut step = || -> Result<()> {
                    let eval = if n % config.eval_every == 0 { Some(monitor(req, p)?) } else { None };
                    let rate = |x: usize| if spawned == 0 { 0.0 } else { 100.0 * x as f64 / spawned as f64 };
                    let eval = eval.map_or(",,".to_string(), |r| {
                        format!("{:.3},{:.3},{:.3}", r.metrics.hcr, r.metrics.pcr, r.metrics.sr)
                    });
                    let line = format!(
                        "{},{},{},{:.6},{:.6},{:.6},{:.3},{:.3},{eval}",
                        prog.episode - 1,
                        prog.env_steps,
                        prog.updates,
                        prog.epsilon,
                        prog.mean_loss,
                        prog.mean_return,
                        rate(sum_h),
                        rate(sum_p)
                    );
                    write(&mut log, &line)?;
                    progress(&line);
                    if n % config.checkpoint_every == 0 {
                        save(p, &format!("checkpoint_{n:05}.catr"))?;
                    }
                    Ok(())
                };
                step().map_err(|e| {
                    let msg = format!("{e:#}");
                    side_error = Some(e);
                    catr_core::Error::Training(msg)
                })
            })
        }
        _ => unreachable!("checked above"),
    };
    if let Some(w) = log.as_mut() {
        w.flush()?;
    }
    if let Err(e) = outcome {
        // the optimizer rejects non-finite steps before touching the
        // parameters, so what we hold now is the last good state
        save(&params, "last_good.catr")?;
        return Err(side_error.unwrap_or_else(|| anyhow::Error::new(e).context("training aborted")));
    }
    save(&params, "final.catr")?;
    Ok(params)
}
