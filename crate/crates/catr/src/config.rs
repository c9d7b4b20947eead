//! Line-oriented `key = value` run configuration.
//!
//! Every tunable of the environment, observation, network, trainers and
//! planners has one key. Blank lines and `#` comments are ignored; unknown
//! keys, repeated keys and malformed values are errors naming the line.

use std::path::Path;
use std::str::FromStr;

use catr_core::env::{EnvConfig, TrafficConfig};
use catr_core::nn::NetConfig;
use catr_core::obs::ObsConfig;
use catr_core::planner::{AstarConfig, GaConfig};
use catr_core::train::{DqnConfig, OptimizerKind, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` is set twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    Value { line: usize, key: String, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything a `plan`, `train` or `eval` run needs besides the map and
/// the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub traffic: TrafficConfig,
    pub obs: ObsConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub dqn: DqnConfig,
    pub astar: AstarConfig,
    pub ga: GaConfig,
    /// Evaluation episodes run during training for the HCR/PCR columns.
    pub eval_episodes: usize,
    /// Updates (PPO) or episodes (DQN) between training evaluations.
    pub eval_every: usize,
    /// Updates (PPO) or episodes (DQN) between checkpoints.
    pub checkpoint_every: usize,
    /// Pixels per cell in snapshots.
    pub snapshot_scale: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvConfig::default(),
            traffic: TrafficConfig::default(),
            obs: ObsConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
            dqn: DqnConfig::default(),
            astar: AstarConfig::default(),
            ga: GaConfig::default(),
            eval_episodes: 5,
            eval_every: 10,
            checkpoint_every: 50,
            snapshot_scale: 8,
        }
    }
}

/// All recognised keys, in the order they are written by [`RunConfig::to_text`].
pub const KEYS: &[&str] = &[
    "d_prox",
    "max_steps",
    "r_dist_scale",
    "r_move",
    "r_arrive",
    "r_prox",
    "r_conf",
    "unreachable_steps",
    "base_density",
    "density",
    "horizon_steps",
    "step_seconds",
    "min_route_steps",
    "runway_events",
    "runway_event_min",
    "runway_event_max",
    "hftr_levels",
    "n_cap",
    "tau_max",
    "route_hidden",
    "node_embed",
    "fusion",
    "trunk",
    "gamma",
    "lambda",
    "clip",
    "entropy_coef",
    "value_coef",
    "learning_rate",
    "epochs",
    "minibatch_size",
    "rollout_steps",
    "updates",
    "weight_temperature",
    "max_grad_norm",
    "optimizer",
    "dqn_learning_rate",
    "buffer_capacity",
    "batch_size",
    "target_sync",
    "epsilon_start",
    "epsilon_end",
    "epsilon_fraction",
    "total_steps",
    "huber_delta",
    "occupancy_cost",
    "replan_period",
    "population_size",
    "generations",
    "crossover_rate",
    "mutation_rate",
    "conflict_weight",
    "tournament_k",
    "ga_retries",
    "eval_episodes",
    "eval_every",
    "checkpoint_every",
    "snapshot_scale",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut config = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate { line, key: key.to_string() });
            }
            config.set(key, value).ok_or_else(|| ConfigError::Value {
                line,
                key: key.to_string(),
                value: value.to_string(),
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one key; `None` when the value does not parse.
    fn set(&mut self, key: &str, value: &str) -> Option<()> {
        fn p<T: FromStr>(v: &str) -> Option<T> {
            v.parse().ok()
        }
        let r = &mut self.env.rewards;
        match key {
            "d_prox" => self.env.d_prox = p(value)?,
            "max_steps" => self.env.max_steps = p(value)?,
            "r_dist_scale" => r.dist_scale = p(value)?,
            "r_move" => r.move_penalty = p(value)?,
            "r_arrive" => r.arrive_bonus = p(value)?,
            "r_prox" => r.proximity_penalty = p(value)?,
            "r_conf" => r.conflict_penalty = p(value)?,
            "unreachable_steps" => r.unreachable_steps = Some(p(value)?),
            "base_density" => self.traffic.base_density = p(value)?,
            "density" => self.traffic.multiplier = p(value)?,
            "horizon_steps" => self.traffic.horizon_steps = p(value)?,
            "step_seconds" => self.traffic.step_seconds = p(value)?,
            "min_route_steps" => self.traffic.min_route_steps = p(value)?,
            "runway_events" => self.traffic.runway_events = p(value)?,
            "runway_event_min" => self.traffic.runway_event_min = p(value)?,
            "runway_event_max" => self.traffic.runway_event_max = p(value)?,
            "hftr_levels" => {
                let levels = p(value)?;
                self.obs.hftr_levels = levels;
                self.net.hftr_levels = levels;
            }
            "n_cap" => self.obs.n_cap = p(value)?,
            "tau_max" => self.obs.tau_max = p(value)?,
            "route_hidden" => self.net.route_hidden = p(value)?,
            "node_embed" => self.net.node_embed = p(value)?,
            "fusion" => self.net.fusion = p(value)?,
            "trunk" => self.net.trunk = p(value)?,
            "gamma" => {
                self.train.gamma = p(value)?;
                self.dqn.gamma = self.train.gamma;
            }
            "lambda" => self.train.lambda = p(value)?,
            "clip" => self.train.clip = p(value)?,
            "entropy_coef" => self.train.entropy_coef = p(value)?,
            "value_coef" => self.train.value_coef = p(value)?,
            "learning_rate" => self.train.learning_rate = p(value)?,
            "epochs" => self.train.epochs = p(value)?,
            "minibatch_size" => self.train.minibatch_size = p(value)?,
            "rollout_steps" => self.train.rollout_steps = p(value)?,
            "updates" => self.train.updates = p(value)?,
            "weight_temperature" => self.train.weight_temperature = p(value)?,
            "max_grad_norm" => {
                self.train.max_grad_norm = p(value)?;
                self.dqn.max_grad_norm = self.train.max_grad_norm;
            }
            "optimizer" => {
                self.train.optimizer = OptimizerKind::from_name(value)?;
                self.dqn.optimizer = self.train.optimizer;
            }
            "dqn_learning_rate" => self.dqn.learning_rate = p(value)?,
            "buffer_capacity" => self.dqn.buffer_capacity = p(value)?,
            "batch_size" => self.dqn.batch_size = p(value)?,
            "target_sync" => self.dqn.target_sync = p(value)?,
            "epsilon_start" => self.dqn.epsilon_start = p(value)?,
            "epsilon_end" => self.dqn.epsilon_end = p(value)?,
            "epsilon_fraction" => self.dqn.epsilon_fraction = p(value)?,
            "total_steps" => self.dqn.total_steps = p(value)?,
            "huber_delta" => self.dqn.huber_delta = p(value)?,
            "occupancy_cost" => self.astar.occupancy_cost = p(value)?,
            "replan_period" => self.astar.replan_period = p(value)?,
            "population_size" => self.ga.population_size = p(value)?,
            "generations" => self.ga.generations = p(value)?,
            "crossover_rate" => self.ga.crossover_rate = p(value)?,
            "mutation_rate" => self.ga.mutation_rate = p(value)?,
            "conflict_weight" => self.ga.conflict_weight = p(value)?,
            "tournament_k" => self.ga.tournament_k = p(value)?,
            "ga_retries" => self.ga.retries = p(value)?,
            "eval_episodes" => self.eval_episodes = p(value)?,
            "eval_every" => self.eval_every = p(value)?,
            "checkpoint_every" => self.checkpoint_every = p(value)?,
            "snapshot_scale" => self.snapshot_scale = p(value)?,
            _ => return None,
        }
        Some(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: catr_core::Error| ConfigError::Invalid(e.to_string());
        self.train.validate().map_err(invalid)?;
        self.dqn.validate().map_err(invalid)?;
        self.ga.validate().map_err(invalid)?;
        catr_core::nn::Layout::new(self.net).map_err(invalid)?;
        if self.obs.hftr_levels == 0 || self.obs.n_cap == 0 || self.obs.tau_max == 0 {
            return Err(ConfigError::Invalid("hftr_levels, n_cap and tau_max must be positive".into()));
        }
        if self.traffic.multiplier < 0.0 || !self.traffic.multiplier.is_finite() {
            return Err(ConfigError::Invalid("density must be a non-negative number".into()));
        }
        if self.traffic.runway_event_min == 0 || self.traffic.runway_event_min > self.traffic.runway_event_max {
            return Err(ConfigError::Invalid("need 1 <= runway_event_min <= runway_event_max".into()));
        }
        if self.eval_every == 0 || self.checkpoint_every == 0 || self.snapshot_scale == 0 {
            return Err(ConfigError::Invalid("eval_every, checkpoint_every and snapshot_scale must be positive".into()));
        }
        Ok(())
    }

    /// Renders every key; parsing the result gives back an equal config.
    pub fn to_text(&self) -> String {
        let r = &self.env.rewards;
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "d_prox" => self.env.d_prox.to_string(),
                "max_steps" => self.env.max_steps.to_string(),
                "r_dist_scale" => r.dist_scale.to_string(),
                "r_move" => r.move_penalty.to_string(),
                "r_arrive" => r.arrive_bonus.to_string(),
                "r_prox" => r.proximity_penalty.to_string(),
                "r_conf" => r.conflict_penalty.to_string(),
                "unreachable_steps" => match r.unreachable_steps {
                    Some(v) => v.to_string(),
                    None => continue,
                },
                "base_density" => self.traffic.base_density.to_string(),
                "density" => self.traffic.multiplier.to_string(),
                "horizon_steps" => self.traffic.horizon_steps.to_string(),
                "step_seconds" => self.traffic.step_seconds.to_string(),
                "min_route_steps" => self.traffic.min_route_steps.to_string(),
                "runway_events" => self.traffic.runway_events.to_string(),
                "runway_event_min" => self.traffic.runway_event_min.to_string(),
                "runway_event_max" => self.traffic.runway_event_max.to_string(),
                "hftr_levels" => self.obs.hftr_levels.to_string(),
                "n_cap" => self.obs.n_cap.to_string(),
                "tau_max" => self.obs.tau_max.to_string(),
                "route_hidden" => self.net.route_hidden.to_string(),
                "node_embed" => self.net.node_embed.to_string(),
                "fusion" => self.net.fusion.to_string(),
                "trunk" => self.net.trunk.to_string(),
                "gamma" => self.train.gamma.to_string(),
                "lambda" => self.train.lambda.to_string(),
                "clip" => self.train.clip.to_string(),
                "entropy_coef" => self.train.entropy_coef.to_string(),
                "value_coef" => self.train.value_coef.to_string(),
                "learning_rate" => self.train.learning_rate.to_string(),
                "epochs" => self.train.epochs.to_string(),
                "minibatch_size" => self.train.minibatch_size.to_string(),
                "rollout_steps" => self.train.rollout_steps.to_string(),
                "updates" => self.train.updates.to_string(),
                "weight_temperature" => self.train.weight_temperature.to_string(),
                "max_grad_norm" => self.train.max_grad_norm.to_string(),
                "optimizer" => self.train.optimizer.name().to_string(),
                "dqn_learning_rate" => self.dqn.learning_rate.to_string(),
                "buffer_capacity" => self.dqn.buffer_capacity.to_string(),
                "batch_size" => self.dqn.batch_size.to_string(),
                "target_sync" => self.dqn.target_sync.to_string(),
                "epsilon_start" => self.dqn.epsilon_start.to_string(),
                "epsilon_end" => self.dqn.epsilon_end.to_string(),
                "epsilon_fraction" => self.dqn.epsilon_fraction.to_string(),
                "total_steps" => self.dqn.total_steps.to_string(),
                "huber_delta" => self.dqn.huber_delta.to_string(),
                "occupancy_cost" => self.astar.occupancy_cost.to_string(),
                "replan_period" => self.astar.replan_period.to_string(),
                "population_size" => self.ga.population_size.to_string(),
                "generations" => self.ga.generations.to_string(),
                "crossover_rate" => self.ga.crossover_rate.to_string(),
                "mutation_rate" => self.ga.mutation_rate.to_string(),
                "conflict_weight" => self.ga.conflict_weight.to_string(),
                "tournament_k" => self.ga.tournament_k.to_string(),
                "ga_retries" => self.ga.retries.to_string(),
                "eval_episodes" => self.eval_episodes.to_string(),
                "eval_every" => self.eval_every.to_string(),
                "checkpoint_every" => self.checkpoint_every.to_string(),
                "snapshot_scale" => self.snapshot_scale.to_string(),
                _ => unreachable!("key list and renderer disagree"),
            };
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }
}
