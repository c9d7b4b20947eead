//! Analytic backprop against central finite differences.

use catr_core::env::ActionMask;
use catr_core::nn::{HeadGrads, Layout, ModelParams, NetConfig, ParamScope};
use catr_core::obs::{NODE_DIM, ROUTE_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn random_obs(layout: &Layout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..layout.input_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut i = ROUTE_DIM;
    while i < v.len() {
        // keep the root present and most deeper nodes present so pooling averages several
        let present = i == ROUTE_DIM || rng.gen_bool(0.75);
        v[i + NODE_DIM - 1] = if present { 1.0 } else { 0.0 };
        if !present {
            v[i..i + NODE_DIM - 1].iter_mut().for_each(|x| *x = 0.0);
        }
        i += NODE_DIM;
    }
    v
}

/// Scalar test loss: fixed linear functional of probs, logits and values.
fn loss(out_probs: &[f64; 4], logits: &[f64; 4], values: &[f64], g: &HeadGrads) -> f64 {
    let mut l = 0.0;
    for i in 0..4 {
        l += g.probs[i] * out_probs[i] + g.logits[i] * logits[i];
    }
    l + values.iter().zip(&g.values).map(|(v, c)| v * c).sum::<f64>()
}

fn max_relative_error(config: NetConfig, mask: ActionMask, seed: u64, scope: ParamScope) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = Layout::new(config).unwrap();
    let mut params = ModelParams::init(layout.clone(), seed);
    // non-zero biases exercise every term
    for v in params.values_mut().iter_mut() {
        *v += rng.gen_range(-0.1..0.1);
    }
    let obs = random_obs(&layout, &mut rng);
    let heads = HeadGrads {
        probs: [0; 4].map(|_| rng.gen_range(-1.0..1.0)),
        logits: [0; 4].map(|_| rng.gen_range(-1.0..1.0)),
        values: (0..config.value_heads).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let heads = match scope {
        ParamScope::All => heads,
        ParamScope::Critic => HeadGrads { probs: [0.0; 4], logits: [0.0; 4], ..heads },
    };
    let out = params.forward(&obs, &mask).unwrap();
    let analytic = params.backward(&out, &heads, scope).unwrap();

    let mut worst: f64 = 0.0;
    for i in 0..layout.param_count() {
        let orig = params.values()[i];
        params.values_mut()[i] = orig + STEP;
        let o = params.forward(&obs, &mask).unwrap();
        let plus = loss(&o.action_probs, &o.logits, &o.value_vec, &heads);
        params.values_mut()[i] = orig - STEP;
        let o = params.forward(&obs, &mask).unwrap();
        let minus = loss(&o.action_probs, &o.logits, &o.value_vec, &heads);
        params.values_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * STEP);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        let e = (analytic[i] - numeric).abs() / denom;
        worst = worst.max(e);
    }
    worst
}

#[test]
fn finite_differences_agree_through_every_layer() {
    let config = NetConfig { route_hidden: 8, node_embed: 5, fusion: 9, trunk: 7, hftr_levels: 3, value_heads: 5 };
    for seed in 0..4 {
        let err = max_relative_error(config, ActionMask { valid: [true, true, false, true] }, seed, ParamScope::All);
        assert!(err < 1e-4, "seed {seed}: max relative error {err:e}");
    }
    let err = max_relative_error(config, ActionMask::ALL, 9, ParamScope::Critic);
    assert!(err < 1e-4, "critic scope: {err:e}");
}

#[test]
fn minimal_net_matches_finite_differences() {
    let config = NetConfig { route_hidden: 8, node_embed: 2, fusion: 8, trunk: 8, hftr_levels: 1, value_heads: 1 };
    let err = max_relative_error(config, ActionMask::ALL, 42, ParamScope::All);
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn masked_probability_has_zero_gradient() {
    let config = NetConfig { route_hidden: 8, node_embed: 4, fusion: 8, trunk: 8, hftr_levels: 2, value_heads: 2 };
    let layout = Layout::new(config).unwrap();
    let params = ModelParams::init(layout.clone(), 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let obs = random_obs(&layout, &mut rng);
    let mask = ActionMask { valid: [true, false, true, true] };
    let out = params.forward(&obs, &mask).unwrap();
    let mut heads = HeadGrads::zeros(2);
    heads.probs[1] = 1.0;
    let g = params.backward(&out, &heads, ParamScope::All).unwrap();
    assert!(g.iter().all(|&x| x == 0.0));
}

