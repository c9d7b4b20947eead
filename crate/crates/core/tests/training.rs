//! Training algebra: advantage estimation, component weights, the value
//! loss, decomposition with a single head, DQN fixed points, and a small
//! end-to-end learning check.

use std::sync::Arc;

use catr_core::env::{
    generate_traffic, ActionMask, AircraftId, EnvConfig, RunwaySchedule, TrafficConfig, World, REWARD_COMPONENTS,
};
use catr_core::map::GridMap;
use catr_core::nn::{Layout, ModelParams, NetConfig};
use catr_core::obs::ObsConfig;
use catr_core::train::{
    compute_gae, decomposed_value_loss, dqn_update, prepare_samples, train_ppo, ComponentWeights, DqnConfig,
    DqnTransition, Optimizer, OptimizerKind, PolicyInput, TrainConfig, Trajectory, Transition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PLUS: &str = "5 5\n..g..\n..t..\ngtttg\n..t..\n..g..\n";

/// Advantages by the defining double sum: A_t = sum_l (gamma lambda)^l delta_{t+l},
/// stopping after the first terminal transition.
fn gae_by_double_sum(r: &[f64], v: &[f64], done: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let value_after = |t: usize| if done[t] { 0.0 } else if t + 1 < n { v[t + 1] } else { bootstrap };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut discount = 1.0;
            for l in t..n {
                sum += discount * (r[l] + gamma * value_after(l) - v[l]);
                if done[l] {
                    break;
                }
                discount *= gamma * lambda;
            }
            sum
        })
        .collect()
}

#[test]
fn gae_matches_the_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r: Vec<f64> = (0..20).map(|_| rng.gen_range(-5.0..10.0)).collect();
        let v: Vec<f64> = (0..20).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let done: Vec<bool> = (0..20).map(|_| rng.gen_bool(0.1)).collect();
        let bootstrap = rng.gen_range(-3.0..3.0);
        let gamma = rng.gen_range(0.8..1.0);
        let lambda = rng.gen_range(0.0..=1.0);
        let (adv, ret) = compute_gae(&r, &v, &done, bootstrap, gamma, lambda).unwrap();
        let oracle = gae_by_double_sum(&r, &v, &done, bootstrap, gamma, lambda);
        for t in 0..20 {
            worst = worst.max((adv[t] - oracle[t]).abs());
            assert_eq!(ret[t], adv[t] + v[t]);
        }
    }
    assert!(worst < 1e-10, "max deviation {worst:e}");
}

#[test]
fn component_returns_sum_to_the_total_return() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let trajectories: Vec<Trajectory> = (0..50)
        .map(|_| {
            let n = rng.gen_range(1..30);
            let transitions = (0..n)
                .map(|t| Transition {
                    obs: Vec::new(),
                    mask: ActionMask::ALL,
                    action: 0,
                    log_prob_old: 0.0,
                    reward_vec: (0..REWARD_COMPONENTS).map(|_| rng.gen_range(-5.0..10.0)).collect(),
                    value_vec_old: (0..REWARD_COMPONENTS).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                    done: t + 1 == n && rng.gen_bool(0.5),
                    aircraft: AircraftId(0),
                    step: t as u32,
                })
                .collect();
            Trajectory { transitions, bootstrap: (0..REWARD_COMPONENTS).map(|_| rng.gen_range(-2.0..2.0)).collect() }
        })
        .collect();
    let samples = prepare_samples(&trajectories, &TrainConfig::default()).unwrap();
    for s in &samples {
        let sum: f64 = s.returns.iter().sum();
        assert!((sum - s.total_return).abs() < 1e-9, "{sum} vs {}", s.total_return);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 1e-9);
    assert!((var - 1.0).abs() < 1e-6);
}

#[test]
fn component_weights_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let k = rng.gen_range(1..8);
        let g: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..200.0)).collect();
        let t = rng.gen_range(0.5..100.0);
        let w = ComponentWeights::from_norms(g.clone(), t).unwrap();
        assert!((w.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // adding a constant to every norm leaves the weights unchanged
        let shifted = ComponentWeights::from_norms(g.iter().map(|x| x + 37.0).collect(), t).unwrap();
        for (a, b) in w.w.iter().zip(&shifted.w) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    for k in 1..=REWARD_COMPONENTS {
        let w = ComponentWeights::from_norms(vec![42.5; k], 1.0).unwrap();
        assert!(w.w.iter().all(|&x| x == 1.0 / k as f64), "{:?}", w.w);
    }
    let w = ComponentWeights::from_norms(vec![2f64.ln(), 0.0], 1.0).unwrap();
    assert!((w.w[0] - 2.0 / 3.0).abs() < 1e-15 && (w.w[1] - 1.0 / 3.0).abs() < 1e-15);
    assert!(ComponentWeights::from_norms(vec![1.0, f64::NAN], 1.0).is_err());
}

#[test]
fn uniform_weights_reduce_to_the_plain_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let k = REWARD_COMPONENTS;
        let b = rng.gen_range(1..64);
        let preds: Vec<Vec<f64>> = (0..b).map(|_| (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let rets: Vec<Vec<f64>> = (0..b).map(|_| (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let (total, per) = decomposed_value_loss(&preds, &rets, &ComponentWeights::uniform(k).w);
        let plain: f64 = per.iter().sum();
        assert!((total - plain).abs() <= 1e-12 * plain.max(1.0), "{total} vs {plain}");
    }
    let (total, _) = decomposed_value_loss(&[vec![1.0, 0.0]], &[vec![0.0, 3f64.sqrt()]], &[0.75, 0.25]);
    assert!((total - 3.0).abs() < 1e-12);
}

fn plus_world(seed: u64) -> catr_core::Result<World> {
    let map = Arc::new(GridMap::parse(PLUS).unwrap());
    let traffic = TrafficConfig { horizon_steps: 1, base_density: 360.0, min_route_steps: 1, ..TrafficConfig::default() };
    let flights = generate_traffic(&map, &traffic, seed)?;
    World::new(map, EnvConfig { max_steps: 20, ..EnvConfig::default() }, flights, RunwaySchedule::default())
}

fn small_net(heads: usize) -> NetConfig {
    NetConfig { route_hidden: 8, node_embed: 4, fusion: 8, trunk: 8, hftr_levels: 2, value_heads: heads }
}

fn trace_training(decompose: bool) -> (Vec<f64>, Vec<String>) {
    let net = small_net(1);
    let mut params = ModelParams::init(Layout::new(net).unwrap(), 5);
    let config = TrainConfig {
        updates: 3,
        rollout_steps: 64,
        minibatch_size: 16,
        learning_rate: 1e-2,
        seed: 5,
        ..TrainConfig::default()
    };
    let input = PolicyInput { obs: ObsConfig { hftr_levels: 2, ..ObsConfig::default() }, hide_tree: false };
    let mut stats = Vec::new();
    train_ppo(&mut params, &config, &input, decompose, &mut |i| plus_world(i), &mut |_, _, r, s| {
        stats.push(format!("{:?} {:?} {:?}", r.mean_return(), s.value_losses, s.policy_loss));
        Ok(())
    })
    .unwrap();
    (params.values().to_vec(), stats)
}

#[test]
fn single_head_decomposition_is_bit_identical_to_scalar_ppo() {
    let (decomposed, a) = trace_training(true);
    let (scalar, b) = trace_training(false);
    assert_eq!(a, b);
    assert!(decomposed.iter().zip(&scalar).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn dqn_single_transition_converges_to_its_reward() {
    let net = small_net(1);
    let mut q = ModelParams::init(Layout::new(net).unwrap(), 2);
    let target = q.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let obs: Vec<f64> = (0..q.layout().input_len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let t = DqnTransition {
        obs: obs.clone(),
        mask: ActionMask::ALL,
        action: 2,
        reward: 1.7,
        next_obs: obs.clone(),
        next_mask: ActionMask::ALL,
        done: true,
    };
    let config = DqnConfig { learning_rate: 1e-2, ..DqnConfig::default() };
    let mut opt = Optimizer::new(OptimizerKind::Sgd, config.learning_rate, config.max_grad_norm, q.layout().param_count());
    for _ in 0..5000 {
        dqn_update(&mut q, &mut opt, &target, &[&t], &config).unwrap();
    }
    let value = q.forward(&obs, &ActionMask::ALL).unwrap().logits[2];
    assert!((value - 1.7).abs() < 1e-3, "Q = {value}");
}

/// Mean return of the first and last ten updates of a short run on the
/// '+' map with a single aircraft per episode.
fn plus_learning_curve(seed: u64) -> (f64, f64) {
    let mut params = ModelParams::init(Layout::new(small_net(REWARD_COMPONENTS)).unwrap(), seed);
    let config = TrainConfig {
        updates: 50,
        rollout_steps: 256,
        minibatch_size: 64,
        // plain gradient steps; the 0.5 norm clip bounds each one
        learning_rate: 0.1,
        seed,
        ..TrainConfig::default()
    };
    let input = PolicyInput { obs: ObsConfig { hftr_levels: 2, ..ObsConfig::default() }, hide_tree: false };
    let mut returns = Vec::new();
    let mut scenario = |i: u64| plus_world(seed * 100_000 + i);
    train_ppo(&mut params, &config, &input, true, &mut scenario, &mut |_, _, r, _| {
        returns.push(r.mean_return());
        Ok(())
    })
    .unwrap();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&returns[..10]), mean(&returns[40..]))
}

#[test]
fn plus_map_return_rises_over_fifty_updates() {
    let curves: Vec<(f64, f64)> = (0..5).map(plus_learning_curve).collect();
    let improved = curves.iter().filter(|(first, last)| last > first).count();
    assert!(improved >= 4, "first/last ten-update mean returns: {curves:?}");
}
