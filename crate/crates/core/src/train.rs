//! Masked PPO with per-component value decomposition, plus a masked DQN
//! baseline.
//!
//! The policy advantage is computed from the total reward against the summed
//! critic output. Each critic head is regressed onto its own component
//! return; the per-component losses are weighted by a softmax over the L1
//! norms of their critic-parameter gradients.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionMask, AircraftId, RewardVector, Status, World, REWARD_COMPONENTS};
use crate::error::{Error, Result};
use crate::map::Action;
use crate::nn::{self, HeadGrads, ModelParams, ParamScope, ACTIONS};
use crate::obs::{observe, ObsConfig, ROUTE_DIM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Transitions collected per update (whole episodes are kept).
    pub rollout_steps: usize,
    pub updates: usize,
    /// Softmax temperature for the component weights.
    pub weight_temperature: f64,
    pub max_grad_norm: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            entropy_coef: 0.01,
            value_coef: 0.5,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch_size: 256,
            rollout_steps: 4096,
            updates: 500,
            weight_temperature: 1.0,
            max_grad_norm: 0.5,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.gamma) || !unit(self.lambda) {
            return Err(Error::Config(format!("gamma and lambda must lie in (0, 1], got {} and {}", self.gamma, self.lambda)));
        }
        if !(self.clip > 0.0) {
            return Err(Error::Config(format!("clip must be positive, got {}", self.clip)));
        }
        if !(self.weight_temperature > 0.0) {
            return Err(Error::Config("weight_temperature must be positive".into()));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.rollout_steps == 0 {
            return Err(Error::Config("epochs, minibatch_size and rollout_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Generalized advantage estimation over one sequence. `dones[t]` marks a
/// terminal transition: nothing is bootstrapped across it. `bootstrap` is
/// the value of the state after the last transition.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if n == 0 {
        return Err(Error::Training("advantage estimation needs at least one step".into()));
    }
    if values.len() != n || dones.len() != n {
        return Err(Error::Training(format!(
            "sequence lengths differ: {n} rewards, {} values, {} done flags",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value * cont - values[t];
        next_adv = delta + gamma * lambda * cont * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Softmax weights over per-component gradient norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentWeights {
    pub w: Vec<f64>,
    pub g: Vec<f64>,
}

impl ComponentWeights {
    /// `w = softmax(g / temperature)` computed with max subtraction.
    pub fn from_norms(g: Vec<f64>, temperature: f64) -> Result<ComponentWeights> {
        if g.is_empty() {
            return Err(Error::Training("component weights need at least one component".into()));
        }
        if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Training(format!("gradient norm of value component {i} is not finite ({v})")));
        }
        let scaled: Vec<f64> = g.iter().map(|v| v / temperature).collect();
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scaled.iter().map(|v| libm::exp(v - max)).collect();
        let sum: f64 = e.iter().sum();
        Ok(ComponentWeights { w: e.iter().map(|v| v / sum).collect(), g })
    }

    pub fn uniform(k: usize) -> ComponentWeights {
        ComponentWeights { w: vec![1.0 / k as f64; k], g: vec![0.0; k] }
    }
}

/// Per-component mean-squared errors over a minibatch (`predictions[b][i]`
/// against `returns[b][i]`) and the combined loss `K * sum_i w_i L_i`.
pub fn decomposed_value_loss(predictions: &[Vec<f64>], returns: &[Vec<f64>], w: &[f64]) -> (f64, Vec<f64>) {
    let k = w.len();
    let mut per = vec![0.0; k];
    for (p, r) in predictions.iter().zip(returns) {
        for i in 0..k {
            let e = p[i] - r[i];
            per[i] += e * e;
        }
    }
    let b = predictions.len().max(1) as f64;
    for l in &mut per {
        *l /= b;
    }
    let total = k as f64 * w.iter().zip(&per).map(|(w, l)| w * l).sum::<f64>();
    (total, per)
}

/// Reward vector folded to the critic's head count: the five components
/// as-is, or their total for a single head.
pub fn fold_rewards(r: &RewardVector, heads: usize) -> Result<Vec<f64>> {
    match heads {
        REWARD_COMPONENTS => Ok(r.to_array().to_vec()),
        1 => Ok(vec![r.total()]),
        k => Err(Error::Training(format!("critic has {k} heads; expected {REWARD_COMPONENTS} or 1"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub mask: ActionMask,
    pub action: usize,
    pub log_prob_old: f64,
    /// Component rewards in the fixed order dist, move, arrive, prox, conf
    /// (or their total for a single-head critic).
    pub reward_vec: Vec<f64>,
    pub value_vec_old: Vec<f64>,
    pub done: bool,
    pub aircraft: AircraftId,
    pub step: u32,
}

/// Consecutive transitions of one aircraft in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Critic output after the last transition (zeros when terminal).
    pub bootstrap: Vec<f64>,
}

/// How the policy sees the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyInput {
    pub obs: ObsConfig,
    /// Zero the foresight-tree part of the observation (plain-PPO baseline).
    pub hide_tree: bool,
}

impl PolicyInput {
    pub fn observe(&self, world: &World, id: AircraftId) -> Result<Vec<f64>> {
        let mut v = observe(world, id, &self.obs)?;
        if self.hide_tree {
            v[ROUTE_DIM..].iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(v)
    }
}

/// Transitions gathered with the current policy plus episode statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rollout {
    pub trajectories: Vec<Trajectory>,
    pub episodes: usize,
    /// Undiscounted total return of every aircraft that entered the surface.
    pub aircraft_returns: Vec<f64>,
    pub spawned: usize,
    pub arrived: usize,
    pub headon_events: usize,
    pub proximity_events: usize,
}

impl Rollout {
    pub fn transitions(&self) -> usize {
        self.trajectories.iter().map(|t| t.transitions.len()).sum()
    }

    pub fn mean_return(&self) -> f64 {
        if self.aircraft_returns.is_empty() {
            0.0
        } else {
            self.aircraft_returns.iter().sum::<f64>() / self.aircraft_returns.len() as f64
        }
    }
}

/// Runs whole episodes with actions sampled from `params` until at least
/// `min_transitions` transitions are stored. `scenario(i)` builds the
/// `i`-th episode; `next_episode` is advanced past the episodes used.
pub fn collect_rollout(
    params: &ModelParams,
    input: &PolicyInput,
    scenario: &mut dyn FnMut(u64) -> Result<World>,
    next_episode: &mut u64,
    min_transitions: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Rollout> {
    let heads = params.layout().config().value_heads;
    let mut rollout = Rollout::default();
    let mut stored = 0;
    while stored < min_transitions {
        let mut world = scenario(*next_episode)?;
        *next_episode += 1;
        rollout.episodes += 1;
        let mut open: BTreeMap<AircraftId, (Vec<Transition>, f64)> = BTreeMap::new();
        while !world.is_finished() {
            let mut pending = Vec::new();
            let mut joint = world.joint_action();
            while let Some((id, mask)) = joint.next(&world) {
                let obs = input.observe(&world, id)?;
                let out = params.forward(&obs, &mask)?;
                let a = nn::sample_action(&out.action_probs, rng);
                joint.commit(&world, Action::from_index(a).expect("action index"))?;
                pending.push(Transition {
                    log_prob_old: nn::log_prob(&out.action_probs, a),
                    obs,
                    mask,
                    action: a,
                    reward_vec: Vec::new(),
                    value_vec_old: out.value_vec,
                    done: false,
                    aircraft: id,
                    step: world.step_index(),
                });
            }
            let outcome = world.step(joint.actions())?;
            rollout.headon_events += outcome.events.headon_pairs.len();
            rollout.proximity_events += outcome.events.proximity_pairs.len();
            for mut t in pending {
                let r = outcome.reward_of(t.aircraft).expect("reward for every active aircraft");
                t.reward_vec = fold_rewards(&r, heads)?;
                let status = world.get(t.aircraft)?.status;
                t.done = matches!(status, Status::Arrived | Status::Failed);
                let entry = open.entry(t.aircraft).or_insert_with(|| (Vec::new(), 0.0));
                entry.1 += r.total();
                entry.0.push(t);
            }
            let finished: Vec<AircraftId> = open
                .iter()
                .filter(|(_, (ts, _))| ts.last().is_some_and(|t| t.done))
                .map(|(id, _)| *id)
                .collect();
            for id in finished {
                let (transitions, ret) = open.remove(&id).unwrap();
                stored += transitions.len();
                rollout.aircraft_returns.push(ret);
                rollout.trajectories.push(Trajectory { transitions, bootstrap: vec![0.0; heads] });
            }
        }
        // truncated by the step limit: bootstrap from the critic
        for (id, (transitions, ret)) in core::mem::take(&mut open) {
            let obs = input.observe(&world, id)?;
            let mask = world.valid_actions(id)?;
            let bootstrap = params.forward(&obs, &mask)?.value_vec;
            stored += transitions.len();
            rollout.aircraft_returns.push(ret);
            rollout.trajectories.push(Trajectory { transitions, bootstrap });
        }
        rollout.spawned += world.aircraft().len();
        rollout.arrived += world.aircraft().iter().filter(|a| a.status == Status::Arrived).count();
    }
    Ok(rollout)
}

/// A transition with its policy advantage and value targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub transition: Transition,
    /// Normalized advantage of the total reward.
    pub advantage: f64,
    /// Per-component return targets `R_i`.
    pub returns: Vec<f64>,
    /// Return target of the total reward.
    pub total_return: f64,
}

/// Advantages from total rewards against summed values, per-component
/// returns from each component against its own head, then advantage
/// normalization over the whole batch.
pub fn prepare_samples(trajectories: &[Trajectory], config: &TrainConfig) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for traj in trajectories {
        let ts = &traj.transitions;
        if ts.is_empty() {
            continue;
        }
        let k = traj.bootstrap.len();
        let dones: Vec<bool> = ts.iter().map(|t| t.done).collect();
        let rewards: Vec<f64> = ts.iter().map(|t| t.reward_vec.iter().sum()).collect();
        let values: Vec<f64> = ts.iter().map(|t| t.value_vec_old.iter().sum()).collect();
        let bootstrap: f64 = traj.bootstrap.iter().sum();
        let (adv, total) = compute_gae(&rewards, &values, &dones, bootstrap, config.gamma, config.lambda)?;
        let mut per = vec![vec![0.0; k]; ts.len()];
        for i in 0..k {
            let r: Vec<f64> = ts.iter().map(|t| t.reward_vec[i]).collect();
            let v: Vec<f64> = ts.iter().map(|t| t.value_vec_old[i]).collect();
            let (_, ret) = compute_gae(&r, &v, &dones, traj.bootstrap[i], config.gamma, config.lambda)?;
            for (row, x) in per.iter_mut().zip(ret) {
                row[i] = x;
            }
        }
        for (((t, a), r), returns) in ts.iter().zip(adv).zip(total).zip(per) {
            samples.push(Sample { transition: t.clone(), advantage: a, returns, total_return: r });
        }
    }
    if samples.is_empty() {
        return Err(Error::Training("rollout holds no transitions".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean) * (s.advantage - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var) + 1e-8;
    for s in &mut samples {
        s.advantage = (s.advantage - mean) / std;
    }
    Ok(samples)
}

/// Averages over the minibatches of one update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub entropy: f64,
    /// Per-component value losses `L_i`.
    pub value_losses: Vec<f64>,
    /// Component weights `w_i` (uniform when not decomposing).
    pub weights: Vec<f64>,
    /// Gradient L1 norms `g_i` (zero when not decomposing).
    pub grad_norms: Vec<f64>,
    /// Fraction of samples whose clipped surrogate was active.
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Gradient of the per-component loss `L_i` restricted to the critic scope.
fn component_grad_norms(
    params: &ModelParams,
    outs: &[nn::ForwardOutput],
    batch: &[&Sample],
) -> Result<Vec<f64>> {
    let k = params.layout().config().value_heads;
    let b = batch.len() as f64;
    let mut norms = Vec::with_capacity(k);
    let mut grad = vec![0.0; params.layout().param_count()];
    for i in 0..k {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (out, s) in outs.iter().zip(batch) {
            let mut hg = HeadGrads::zeros(k);
            hg.values[i] = 2.0 * (out.value_vec[i] - s.returns[i]) / b;
            params.backward_into(out, &hg, ParamScope::Critic, &mut grad)?;
        }
        norms.push(grad.iter().map(|g| g.abs()).sum());
    }
    Ok(norms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Plain gradient descent with a fixed learning rate.
    Sgd,
    /// Adam with the usual moment decay rates (0.9, 0.999).
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn from_name(name: &str) -> Option<OptimizerKind> {
        match name {
            "sgd" => Some(OptimizerKind::Sgd),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

/// Gradient-norm clipping followed by an SGD or Adam step.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    max_grad_norm: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, max_grad_norm: f64, params: usize) -> Optimizer {
        let moments = if kind == OptimizerKind::Adam { params } else { 0 };
        Optimizer { kind, learning_rate, max_grad_norm, m: vec![0.0; moments], v: vec![0.0; moments], t: 0 }
    }

    pub fn for_training(config: &TrainConfig, params: &ModelParams) -> Optimizer {
        Optimizer::new(config.optimizer, config.learning_rate, config.max_grad_norm, params.layout().param_count())
    }

    /// Clips the global gradient norm and updates `params`. Non-finite
    /// gradients are rejected without touching the parameters.
    pub fn step(&mut self, params: &mut ModelParams, grad: &mut [f64]) -> Result<()> {
        let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
        if !norm.is_finite() {
            return Err(Error::Training(format!("gradient norm is not finite ({norm}); parameters left unchanged")));
        }
        if self.max_grad_norm > 0.0 && norm > self.max_grad_norm {
            let scale = self.max_grad_norm / norm;
            grad.iter_mut().for_each(|g| *g *= scale);
        }
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (v, g) in params.values_mut().iter_mut().zip(grad.iter()) {
                    *v -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                self.t += 1;
                let c1 = 1.0 - libm::pow(B1, self.t as f64);
                let c2 = 1.0 - libm::pow(B2, self.t as f64);
                for (i, (v, g)) in params.values_mut().iter_mut().zip(grad.iter()).enumerate() {
                    self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
                    self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
                    *v -= lr * (self.m[i] / c1) / (libm::sqrt(self.v[i] / c2) + EPS);
                }
            }
        }
        Ok(())
    }
}

/// One PPO update: `epochs` passes over shuffled minibatches of the clipped
/// surrogate, entropy bonus, and value loss. With `decompose` the value loss
/// is `K * sum_i w_i L_i` with `w` measured per minibatch; otherwise it is the
/// squared error of the summed value against the total return.
pub fn ppo_update(
    params: &mut ModelParams,
    optimizer: &mut Optimizer,
    samples: &[Sample],
    config: &TrainConfig,
    decompose: bool,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let k = params.layout().config().value_heads;
    let mut stats = UpdateStats { value_losses: vec![0.0; k], weights: vec![0.0; k], grad_norms: vec![0.0; k], ..Default::default() };
    let mut clipped_count = 0usize;
    let mut seen = 0usize;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grad = vec![0.0; params.layout().param_count()];
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let outs = batch
                .iter()
                .map(|s| params.forward(&s.transition.obs, &s.transition.mask))
                .collect::<Result<Vec<_>>>()?;
            let b = batch.len() as f64;

            let preds: Vec<Vec<f64>> = outs.iter().map(|o| o.value_vec.clone()).collect();
            let targets: Vec<Vec<f64>> = batch.iter().map(|s| s.returns.clone()).collect();
            let weights = if decompose {
                ComponentWeights::from_norms(component_grad_norms(params, &outs, &batch)?, config.weight_temperature)?
            } else {
                ComponentWeights::uniform(k)
            };
            let (_, per) = decomposed_value_loss(&preds, &targets, &weights.w);
            if per.iter().any(|l| !l.is_finite()) {
                return Err(Error::Training(format!("value loss is not finite: {per:?}")));
            }

            grad.iter_mut().for_each(|g| *g = 0.0);
            let ratio_scale: Vec<f64> = (0..k).map(|i| config.value_coef * (k as f64 * weights.w[i])).collect();
            for (out, s) in outs.iter().zip(&batch) {
                let t = &s.transition;
                let mut hg = HeadGrads::zeros(k);
                let p = out.action_probs[t.action];
                let ratio = if p > 0.0 { libm::exp(libm::log(p) - t.log_prob_old) } else { 0.0 };
                let unclipped = ratio * s.advantage;
                let clipped = ratio.clamp(1.0 - config.clip, 1.0 + config.clip) * s.advantage;
                if unclipped <= clipped {
                    hg.probs[t.action] -= s.advantage * libm::exp(-t.log_prob_old) / b;
                } else {
                    clipped_count += 1;
                }
                stats.policy_loss -= unclipped.min(clipped);
                for j in 0..ACTIONS {
                    let pj = out.action_probs[j];
                    if t.mask.valid[j] && pj > 0.0 {
                        hg.probs[j] += config.entropy_coef * (libm::log(pj) + 1.0) / b;
                    }
                }
                stats.entropy += nn::entropy(&out.action_probs);
                if decompose {
                    for i in 0..k {
                        hg.values[i] = ratio_scale[i] * 2.0 * (out.value_vec[i] - s.returns[i]) / b;
                    }
                } else {
                    let e = out.value_vec.iter().sum::<f64>() - s.total_return;
                    let scale = config.value_coef * 1.0;
                    for v in hg.values.iter_mut() {
                        *v = scale * 2.0 * e / b;
                    }
                }
                params.backward_into(out, &hg, ParamScope::All, &mut grad)?;
            }
            optimizer.step(params, &mut grad)?;

            seen += batch.len();
            stats.minibatches += 1;
            for i in 0..k {
                stats.value_losses[i] += per[i];
                stats.weights[i] += weights.w[i];
                stats.grad_norms[i] += weights.g[i];
            }
        }
    }
    let m = stats.minibatches as f64;
    for i in 0..k {
        stats.value_losses[i] /= m;
        stats.weights[i] /= m;
        stats.grad_norms[i] /= m;
    }
    stats.policy_loss /= seen as f64;
    stats.entropy /= seen as f64;
    stats.clip_fraction = clipped_count as f64 / seen as f64;
    Ok(stats)
}

/// Collects a rollout and applies one PPO update, `config.updates` times.
/// `on_update` sees the update index, the updated parameters, the rollout
/// the update was computed from, and the update statistics; returning an error stops training.
pub fn train_ppo(
    params: &mut ModelParams,
    config: &TrainConfig,
    input: &PolicyInput,
    decompose: bool,
    scenario: &mut dyn FnMut(u64) -> Result<World>,
    on_update: &mut dyn FnMut(usize, &ModelParams, &Rollout, &UpdateStats) -> Result<()>,
) -> Result<()> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut episode = 0u64;
    let mut optimizer = Optimizer::for_training(config, params);
    for update in 0..config.updates {
        let rollout = collect_rollout(params, input, scenario, &mut episode, config.rollout_steps, &mut rng)?;
        let samples = prepare_samples(&rollout.trajectories, config)?;
        let stats = ppo_update(params, &mut optimizer, &samples, config, decompose, &mut rng)?;
        on_update(update, params, &rollout, &stats)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqnConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Gradient updates between target-network syncs.
    pub target_sync: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `total_steps` over which epsilon decays linearly.
    pub epsilon_fraction: f64,
    /// Environment steps of training.
    pub total_steps: usize,
    pub huber_delta: f64,
    pub max_grad_norm: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.99,
            learning_rate: 3e-4,
            buffer_capacity: 100_000,
            batch_size: 256,
            target_sync: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.2,
            total_steps: 100_000,
            huber_delta: 1.0,
            max_grad_norm: 0.5,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.epsilon_start) || !unit(self.epsilon_end) || !unit(self.epsilon_fraction) {
            return Err(Error::Config("epsilon_start, epsilon_end and epsilon_fraction must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::Config("need 0 < batch_size <= buffer_capacity".into()));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::Config("huber_delta must be positive".into()));
        }
        Ok(())
    }

    /// Exploration rate after `step` environment steps.
    pub fn epsilon_at(&self, step: usize) -> f64 {
        let span = self.epsilon_fraction * self.total_steps as f64;
        if span <= 0.0 || step as f64 >= span {
            return self.epsilon_end;
        }
        let f = step as f64 / span;
        self.epsilon_start + f * (self.epsilon_end - self.epsilon_start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnTransition {
    pub obs: Vec<f64>,
    pub mask: ActionMask,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub next_mask: ActionMask,
    pub done: bool,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<DqnTransition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        ReplayBuffer { capacity: capacity.max(1), items: Vec::new(), next: 0 }
    }

    pub fn push(&mut self, t: DqnTransition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&DqnTransition> {
        (0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }
}

/// Uniform over valid actions with probability `epsilon`, otherwise the
/// valid action with the highest Q-value.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64; ACTIONS], mask: &ActionMask, epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        let valid: Vec<usize> = (0..ACTIONS).filter(|&i| mask.valid[i]).collect();
        valid[rng.gen_range(0..valid.len())]
    } else {
        nn::argmax_valid(q, mask)
    }
}

/// `r` for terminal transitions, else `r + gamma * max_{a' valid} Q_target(s', a')`.
pub fn dqn_target(t: &DqnTransition, target: &ModelParams, gamma: f64) -> Result<f64> {
    if t.done {
        return Ok(t.reward);
    }
    let out = target.forward(&t.next_obs, &t.next_mask)?;
    Ok(t.reward + gamma * out.logits[nn::argmax_valid(&out.logits, &t.next_mask)])
}

/// One gradient step on the mean Huber loss; returns that loss.
pub fn dqn_update(
    q: &mut ModelParams,
    optimizer: &mut Optimizer,
    target: &ModelParams,
    batch: &[&DqnTransition],
    config: &DqnConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let k = q.layout().config().value_heads;
    let b = batch.len() as f64;
    let delta = config.huber_delta;
    let mut grad = vec![0.0; q.layout().param_count()];
    let mut loss = 0.0;
    for t in batch {
        let y = dqn_target(t, target, config.gamma)?;
        let out = q.forward(&t.obs, &t.mask)?;
        let e = out.logits[t.action] - y;
        loss += if e.abs() <= delta { 0.5 * e * e } else { delta * (e.abs() - 0.5 * delta) };
        let mut hg = HeadGrads::zeros(k);
        hg.logits[t.action] = e.clamp(-delta, delta) / b;
        q.backward_into(&out, &hg, ParamScope::All, &mut grad)?;
    }
    optimizer.step(q, &mut grad)?;
    Ok(loss / b)
}

/// Progress of a DQN run after each episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DqnProgress {
    pub episode: usize,
    pub env_steps: usize,
    pub updates: usize,
    pub epsilon: f64,
    pub mean_loss: f64,
    pub mean_return: f64,
    pub spawned: usize,
    pub headon_events: usize,
    pub proximity_events: usize,
}

/// Epsilon-greedy DQN over shared-policy aircraft transitions, one gradient
/// update per environment step once the buffer holds a batch. Event and
/// spawn counts in the progress report are cumulative.
pub fn train_dqn(
    q: &mut ModelParams,
    config: &DqnConfig,
    input: &PolicyInput,
    scenario: &mut dyn FnMut(u64) -> Result<World>,
    on_episode: &mut dyn FnMut(&DqnProgress, &ModelParams) -> Result<()>,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut target = q.clone();
    let mut optimizer =
        Optimizer::new(config.optimizer, config.learning_rate, config.max_grad_norm, q.layout().param_count());
    let mut progress = DqnProgress::default();
    let zeros = vec![0.0; q.layout().input_len()];
    while progress.env_steps < config.total_steps {
        let mut world = scenario(progress.episode as u64)?;
        let mut returns: BTreeMap<AircraftId, f64> = BTreeMap::new();
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        while !world.is_finished() && progress.env_steps < config.total_steps {
            let epsilon = config.epsilon_at(progress.env_steps);
            let mut pending = Vec::new();
            let mut joint = world.joint_action();
            while let Some((id, mask)) = joint.next(&world) {
                let obs = input.observe(&world, id)?;
                let out = q.forward(&obs, &mask)?;
                let a = epsilon_greedy(&out.logits, &mask, epsilon, &mut rng);
                joint.commit(&world, Action::from_index(a).expect("action index"))?;
                pending.push((id, obs, mask, a));
            }
            let outcome = world.step(joint.actions())?;
            progress.env_steps += 1;
            progress.headon_events += outcome.events.headon_pairs.len();
            progress.proximity_events += outcome.events.proximity_pairs.len();
            for (id, obs, mask, action) in pending {
                let reward = outcome.reward_of(id).expect("reward for every active aircraft").total();
                *returns.entry(id).or_insert(0.0) += reward;
                let state = world.get(id)?;
                let (next_obs, next_mask, done) = if state.is_active() {
                    (input.observe(&world, id)?, world.valid_actions(id)?, false)
                } else {
                    (zeros.clone(), ActionMask::STOP_ONLY, true)
                };
                buffer.push(DqnTransition { obs, mask, action, reward, next_obs, next_mask, done });
            }
            if buffer.len() >= config.batch_size {
                let batch = buffer.sample(config.batch_size, &mut rng);
                loss_sum += dqn_update(q, &mut optimizer, &target, &batch, config)?;
                loss_n += 1;
                progress.updates += 1;
                if progress.updates % config.target_sync.max(1) == 0 {
                    target = q.clone();
                }
            }
            progress.epsilon = epsilon;
        }
        progress.episode += 1;
        progress.spawned += world.aircraft().len();
        progress.mean_loss = if loss_n > 0 { loss_sum / loss_n as f64 } else { 0.0 };
        progress.mean_return =
            if returns.is_empty() { 0.0 } else { returns.values().sum::<f64>() / returns.len() as f64 };
        on_episode(&progress, q)?;
    }
    Ok(())
}
