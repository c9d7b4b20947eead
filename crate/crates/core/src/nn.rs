//! Dual-branch actor-critic with hand-written backpropagation.
//!
//! ```text
//! route (9) ──► tanh ──► tanh ─────────────────────────┐
//! tree nodes (6 each) ──► shared tanh embed ──► mean    │
//!      per level over present nodes ──► tanh proj ──────┤
//!                                                       ▼
//!                                      fusion tanh ──► trunk tanh
//!                                                       ├──► actor head (4 logits, masked softmax)
//!                                                       └──► critic head (K values)
//! ```
//!
//! Weights are stored out-major (`w[j * fan_in + i]`), each layer's weights
//! followed by its biases, layers in the order listed by [`Layout`].

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::ActionMask;
use crate::error::{Error, Result};
use crate::obs::{level_width, observation_len, NODE_DIM, ROUTE_DIM};

pub const ACTIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    pub route_hidden: usize,
    pub node_embed: usize,
    pub fusion: usize,
    pub trunk: usize,
    pub hftr_levels: usize,
    /// Critic outputs, one per value component.
    pub value_heads: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { route_hidden: 64, node_embed: 16, fusion: 128, trunk: 128, hftr_levels: 3, value_heads: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
}

impl LayerShape {
    pub fn params(&self) -> usize {
        self.fan_in * self.fan_out + self.fan_out
    }
}

/// Parameter subset a gradient is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamScope {
    All,
    /// Everything the value loss reaches: shared body plus critic head.
    Critic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    config: NetConfig,
    shapes: Vec<LayerShape>,
    offsets: Vec<usize>,
    total: usize,
}

impl Layout {
    pub fn new(config: NetConfig) -> Result<Layout> {
        let c = config;
        if c.route_hidden == 0 || c.node_embed == 0 || c.fusion == 0 || c.trunk == 0 || c.value_heads == 0 {
            return Err(Error::Model(format!("layer widths must be positive: {c:?}")));
        }
        if c.hftr_levels == 0 {
            return Err(Error::Model("hftr_levels must be at least 1".into()));
        }
        let mut shapes = vec![
            LayerShape { fan_in: ROUTE_DIM, fan_out: c.route_hidden },
            LayerShape { fan_in: c.route_hidden, fan_out: c.route_hidden },
            LayerShape { fan_in: NODE_DIM, fan_out: c.node_embed },
        ];
        shapes.extend((0..c.hftr_levels).map(|_| LayerShape { fan_in: c.node_embed, fan_out: c.node_embed }));
        shapes.push(LayerShape { fan_in: c.route_hidden + c.node_embed * c.hftr_levels, fan_out: c.fusion });
        shapes.push(LayerShape { fan_in: c.fusion, fan_out: c.trunk });
        shapes.push(LayerShape { fan_in: c.trunk, fan_out: ACTIONS });
        shapes.push(LayerShape { fan_in: c.trunk, fan_out: c.value_heads });
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut total = 0;
        for s in &shapes {
            offsets.push(total);
            total += s.params();
        }
        Ok(Layout { config, shapes, offsets, total })
    }

    /// Rebuilds a layout from its layer shapes (as stored in checkpoints).
    pub fn from_shapes(shapes: &[LayerShape]) -> Result<Layout> {
        let bad = |why: &str| Error::Model(format!("layer shapes do not describe this network: {why}"));
        if shapes.len() < 8 {
            return Err(bad("too few layers"));
        }
        let levels = shapes.len() - 7;
        let config = NetConfig {
            route_hidden: shapes[0].fan_out,
            node_embed: shapes[2].fan_out,
            fusion: shapes[3 + levels].fan_out,
            trunk: shapes[4 + levels].fan_out,
            hftr_levels: levels,
            value_heads: shapes[6 + levels].fan_out,
        };
        let layout = Layout::new(config)?;
        if layout.shapes != shapes {
            return Err(bad("shapes are inconsistent"));
        }
        Ok(layout)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn param_count(&self) -> usize {
        self.total
    }

    pub fn input_len(&self) -> usize {
        observation_len(self.config.hftr_levels)
    }

    fn levels(&self) -> usize {
        self.config.hftr_levels
    }

    fn proj_layer(&self, level: usize) -> usize {
        3 + level
    }

    fn fusion_layer(&self) -> usize {
        3 + self.levels()
    }

    fn trunk_layer(&self) -> usize {
        4 + self.levels()
    }

    pub fn actor_layer(&self) -> usize {
        5 + self.levels()
    }

    pub fn critic_layer(&self) -> usize {
        6 + self.levels()
    }

    /// Flat index range of one layer (weights then biases).
    pub fn layer_range(&self, layer: usize) -> core::ops::Range<usize> {
        self.offsets[layer]..self.offsets[layer] + self.shapes[layer].params()
    }

    /// Flat index ranges covered by `scope`.
    pub fn scope_ranges(&self, scope: ParamScope) -> Vec<core::ops::Range<usize>> {
        let actor = self.layer_range(self.actor_layer());
        match scope {
            ParamScope::All => vec![0..self.total],
            ParamScope::Critic => vec![0..actor.start, actor.end..self.total],
        }
    }
}

/// All weights and biases of the network in flat order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layout: Arc<Layout>,
    values: Vec<f64>,
    version: u64,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layout: Layout, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; layout.total];
        for (l, s) in layout.shapes.iter().enumerate() {
            let bound = libm::sqrt(6.0 / (s.fan_in + s.fan_out) as f64);
            let start = layout.offsets[l];
            for w in &mut values[start..start + s.fan_in * s.fan_out] {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        ModelParams { layout: Arc::new(layout), values, version: 0 }
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<ModelParams> {
        if values.len() != layout.total {
            return Err(Error::Model(format!(
                "expected {} parameters for this layout, got {}",
                layout.total,
                values.len()
            )));
        }
        Ok(ModelParams { layout: Arc::new(layout), values, version: 0 })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access; invalidates outstanding forward caches.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.values
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn weights(&self, layer: usize) -> (&[f64], &[f64]) {
        let s = self.layout.shapes[layer];
        let start = self.layout.offsets[layer];
        let (w, rest) = self.values[start..].split_at(s.fan_in * s.fan_out);
        (w, &rest[..s.fan_out])
    }

    /// Forward pass with masked softmax over the actor logits.
    pub fn forward(&self, obs: &[f64], mask: &ActionMask) -> Result<ForwardOutput> {
        let layout = &*self.layout;
        if obs.len() != layout.input_len() {
            return Err(Error::Model(format!(
                "observation has {} entries, network expects {}",
                obs.len(),
                layout.input_len()
            )));
        }
        if mask.count() == 0 {
            return Err(Error::Model("action mask has no valid action".into()));
        }
        let route_in = obs[..ROUTE_DIM].to_vec();
        let h1 = self.dense_tanh(0, &route_in);
        let h2 = self.dense_tanh(1, &h1);

        let embed = layout.config.node_embed;
        let mut fused_in = h2.clone();
        let mut levels = Vec::with_capacity(layout.levels());
        let mut offset = ROUTE_DIM;
        for level in 0..layout.levels() {
            let mut nodes = Vec::new();
            let mut embeddings = Vec::new();
            for _ in 0..level_width(level) {
                let node = &obs[offset..offset + NODE_DIM];
                offset += NODE_DIM;
                if node[NODE_DIM - 1] > 0.5 {
                    embeddings.push(self.dense_tanh(2, node));
                    nodes.push(node.to_vec());
                }
            }
            let mut pooled = vec![0.0; embed];
            if !embeddings.is_empty() {
                let scale = 1.0 / embeddings.len() as f64;
                for e in &embeddings {
                    for (p, v) in pooled.iter_mut().zip(e) {
                        *p += v * scale;
                    }
                }
            }
            let projected = self.dense_tanh(layout.proj_layer(level), &pooled);
            fused_in.extend_from_slice(&projected);
            levels.push(LevelCache { nodes, embeddings, pooled, projected });
        }
        let fused = self.dense_tanh(layout.fusion_layer(), &fused_in);
        let trunk = self.dense_tanh(layout.trunk_layer(), &fused);
        let logits_v = self.dense(layout.actor_layer(), &trunk);
        let values = self.dense(layout.critic_layer(), &trunk);
        let mut logits = [0.0; ACTIONS];
        logits.copy_from_slice(&logits_v);
        let action_probs = masked_softmax(&logits, mask);
        Ok(ForwardOutput {
            action_probs,
            logits,
            value_vec: values,
            mask: *mask,
            cache: Cache { version: self.version, route_in, h1, h2, levels, fused_in, fused, trunk },
        })
    }

    fn dense(&self, layer: usize, x: &[f64]) -> Vec<f64> {
        let s = self.layout.shapes[layer];
        let (w, b) = self.weights(layer);
        (0..s.fan_out)
            .map(|j| {
                let row = &w[j * s.fan_in..(j + 1) * s.fan_in];
                b[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    fn dense_tanh(&self, layer: usize, x: &[f64]) -> Vec<f64> {
        let mut y = self.dense(layer, x);
        for v in &mut y {
            *v = libm::tanh(*v);
        }
        y
    }

    /// Backward pass from head-level loss gradients; returns a fresh
    /// gradient vector over all parameters (zero outside `scope`).
    pub fn backward(&self, out: &ForwardOutput, grads: &HeadGrads, scope: ParamScope) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.layout.total];
        self.backward_into(out, grads, scope, &mut g)?;
        Ok(g)
    }

    /// Like [`ModelParams::backward`] but accumulates into `grad`.
    pub fn backward_into(
        &self,
        out: &ForwardOutput,
        grads: &HeadGrads,
        scope: ParamScope,
        grad: &mut [f64],
    ) -> Result<()> {
        let layout = &*self.layout;
        let c = &out.cache;
        if c.version != self.version {
            return Err(Error::Model("forward cache is stale: parameters changed since forward".into()));
        }
        if grad.len() != layout.total {
            return Err(Error::Model("gradient buffer has the wrong length".into()));
        }
        if grads.values.len() != layout.config.value_heads {
            return Err(Error::Model(format!(
                "expected {} value gradients, got {}",
                layout.config.value_heads,
                grads.values.len()
            )));
        }

        let mut d_trunk = vec![0.0; layout.config.trunk];
        if scope == ParamScope::All {
            let d_logits = softmax_backward(&out.action_probs, &out.mask, &grads.probs, &grads.logits);
            self.dense_backward(layout.actor_layer(), &c.trunk, &d_logits, grad, Some(&mut d_trunk));
        }
        self.dense_backward(layout.critic_layer(), &c.trunk, &grads.values, grad, Some(&mut d_trunk));

        let d_pre = tanh_backward(&c.trunk, &d_trunk);
        let mut d_fused = vec![0.0; layout.config.fusion];
        self.dense_backward(layout.trunk_layer(), &c.fused, &d_pre, grad, Some(&mut d_fused));
        let d_pre = tanh_backward(&c.fused, &d_fused);
        let mut d_fused_in = vec![0.0; c.fused_in.len()];
        self.dense_backward(layout.fusion_layer(), &c.fused_in, &d_pre, grad, Some(&mut d_fused_in));

        let hidden = layout.config.route_hidden;
        let embed = layout.config.node_embed;
        for (level, lc) in c.levels.iter().enumerate() {
            let start = hidden + level * embed;
            let d_pre = tanh_backward(&lc.projected, &d_fused_in[start..start + embed]);
            if lc.embeddings.is_empty() {
                self.dense_backward(layout.proj_layer(level), &lc.pooled, &d_pre, grad, None);
                continue;
            }
            let mut d_pooled = vec![0.0; embed];
            self.dense_backward(layout.proj_layer(level), &lc.pooled, &d_pre, grad, Some(&mut d_pooled));
            let scale = 1.0 / lc.embeddings.len() as f64;
            for v in &mut d_pooled {
                *v *= scale;
            }
            for (node, e) in lc.nodes.iter().zip(&lc.embeddings) {
                let d_pre = tanh_backward(e, &d_pooled);
                self.dense_backward(2, node, &d_pre, grad, None);
            }
        }

        let d_pre = tanh_backward(&c.h2, &d_fused_in[..hidden]);
        let mut d_h1 = vec![0.0; hidden];
        self.dense_backward(1, &c.h1, &d_pre, grad, Some(&mut d_h1));
        let d_pre = tanh_backward(&c.h1, &d_h1);
        self.dense_backward(0, &c.route_in, &d_pre, grad, None);
        Ok(())
    }

    /// Accumulates weight / bias gradients of `layer` for output gradient
    /// `dy` at input `x`, and optionally the input gradient.
    fn dense_backward(&self, layer: usize, x: &[f64], dy: &[f64], grad: &mut [f64], dx: Option<&mut [f64]>) {
        let s = self.layout.shapes[layer];
        let start = self.layout.offsets[layer];
        let (gw, gb) = grad[start..start + s.params()].split_at_mut(s.fan_in * s.fan_out);
        for j in 0..s.fan_out {
            let d = dy[j];
            if d == 0.0 {
                continue;
            }
            gb[j] += d;
            for (g, xi) in gw[j * s.fan_in..(j + 1) * s.fan_in].iter_mut().zip(x) {
                *g += d * xi;
            }
        }
        if let Some(dx) = dx {
            let (w, _) = self.weights(layer);
            for j in 0..s.fan_out {
                let d = dy[j];
                if d == 0.0 {
                    continue;
                }
                for (g, wi) in dx.iter_mut().zip(&w[j * s.fan_in..(j + 1) * s.fan_in]) {
                    *g += d * wi;
                }
            }
        }
    }
}

fn tanh_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    y.iter().zip(dy).map(|(y, d)| d * (1.0 - y * y)).collect()
}

/// Softmax over valid logits with max subtraction; masked entries are 0.
pub fn masked_softmax(logits: &[f64; ACTIONS], mask: &ActionMask) -> [f64; ACTIONS] {
    let max = (0..ACTIONS).filter(|&i| mask.valid[i]).map(|i| logits[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; ACTIONS];
    let mut sum = 0.0;
    for i in 0..ACTIONS {
        if mask.valid[i] {
            p[i] = libm::exp(logits[i] - max);
            sum += p[i];
        }
    }
    for v in &mut p {
        *v /= sum;
    }
    p
}

fn softmax_backward(
    probs: &[f64; ACTIONS],
    mask: &ActionMask,
    d_probs: &[f64; ACTIONS],
    d_logits: &[f64; ACTIONS],
) -> [f64; ACTIONS] {
    let dot: f64 = (0..ACTIONS).filter(|&i| mask.valid[i]).map(|i| probs[i] * d_probs[i]).sum();
    // raw logits of masked actions still depend on the parameters, so their
    // direct gradients pass through; only the softmax path is cut
    let mut d = *d_logits;
    for i in 0..ACTIONS {
        if mask.valid[i] {
            d[i] += probs[i] * (d_probs[i] - dot);
        }
    }
    d
}

/// Loss gradients at the network outputs. Gradients on `probs` flow through
/// the masked softmax; gradients on `logits` enter directly (Q-learning).
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub probs: [f64; ACTIONS],
    pub logits: [f64; ACTIONS],
    pub values: Vec<f64>,
}

impl HeadGrads {
    pub fn zeros(value_heads: usize) -> HeadGrads {
        HeadGrads { probs: [0.0; ACTIONS], logits: [0.0; ACTIONS], values: vec![0.0; value_heads] }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LevelCache {
    nodes: Vec<Vec<f64>>,
    embeddings: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    projected: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    version: u64,
    route_in: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    levels: Vec<LevelCache>,
    fused_in: Vec<f64>,
    fused: Vec<f64>,
    trunk: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub action_probs: [f64; ACTIONS],
    pub logits: [f64; ACTIONS],
    pub value_vec: Vec<f64>,
    pub mask: ActionMask,
    cache: Cache,
}

impl ForwardOutput {
    /// Sum of the value components.
    pub fn total_value(&self) -> f64 {
        self.value_vec.iter().sum()
    }

    /// Valid action with the highest probability (lowest index on ties).
    pub fn greedy_action(&self) -> usize {
        argmax_valid(&self.action_probs, &self.mask)
    }
}

/// Highest-scoring valid entry (lowest index on ties).
pub fn argmax_valid(scores: &[f64; ACTIONS], mask: &ActionMask) -> usize {
    let mut best = None;
    for i in 0..ACTIONS {
        if mask.valid[i] && best.is_none_or(|b: usize| scores[i] > scores[b]) {
            best = Some(i);
        }
    }
    best.expect("mask has a valid action")
}

/// Inverse-CDF sample over the support of `probs`.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64; ACTIONS], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub fn log_prob(probs: &[f64; ACTIONS], action: usize) -> f64 {
    libm::log(probs[action])
}

/// Entropy over the support, with `0 log 0 = 0`.
pub fn entropy(probs: &[f64; ACTIONS]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * libm::log(p)).sum::<f64>()
}
