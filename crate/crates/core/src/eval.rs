//! Episode execution under any decision source, the six evaluation metrics,
//! and pixmap snapshots.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionMask, AircraftId, RunwayMode, Status, StepEvents, World};
use crate::error::{Error, Result};
use crate::map::{Action, CellKind, Pose};
use crate::nn::{self, ModelParams};
use crate::planner::{
    plan_astar_congestion, plan_dijkstra, plan_ga, AstarConfig, GaConfig, GaRequest, RouteFollower, TimedRoute,
};
use crate::train::PolicyInput;

/// Source of elapsed seconds for decision timing.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// A clock that never advances; runtime columns read zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Chooses one action per active aircraft each step.
pub trait Controller {
    /// Called once per step before any decision.
    fn prepare(&mut self, _world: &World) -> Result<()> {
        Ok(())
    }

    /// Action for `id` given its mask (which accounts for aircraft that
    /// already decided this step).
    fn act(&mut self, world: &World, id: AircraftId, mask: &ActionMask) -> Result<Action>;
}

/// Greedy (argmax) actions from a trained network.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    pub params: ModelParams,
    pub input: PolicyInput,
}

impl Controller for GreedyPolicy {
    fn act(&mut self, world: &World, id: AircraftId, mask: &ActionMask) -> Result<Action> {
        let obs = self.input.observe(world, id)?;
        let out = self.params.forward(&obs, mask)?;
        Ok(Action::from_index(nn::argmax_valid(&out.action_probs, mask)).expect("action index"))
    }
}

/// Greedy over Q-values (the DQN baseline's logits).
#[derive(Debug, Clone)]
pub struct GreedyQ {
    pub params: ModelParams,
    pub input: PolicyInput,
}

impl Controller for GreedyQ {
    fn act(&mut self, world: &World, id: AircraftId, mask: &ActionMask) -> Result<Action> {
        let obs = self.input.observe(world, id)?;
        let out = self.params.forward(&obs, mask)?;
        Ok(Action::from_index(nn::argmax_valid(&out.logits, mask)).expect("action index"))
    }
}

/// Uniformly random valid actions.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> RandomPolicy {
        RandomPolicy { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Controller for RandomPolicy {
    fn act(&mut self, _world: &World, _id: AircraftId, mask: &ActionMask) -> Result<Action> {
        let valid: Vec<Action> = mask.actions().collect();
        Ok(valid[self.rng.gen_range(0..valid.len())])
    }
}

fn follow(followers: &mut BTreeMap<AircraftId, RouteFollower>, id: AircraftId, mask: &ActionMask) -> Action {
    followers.get_mut(&id).map_or(Action::Stop, |f| f.act(mask))
}

/// Traffic-blind shortest routes planned once on activation.
#[derive(Debug, Clone, Default)]
pub struct DijkstraController {
    followers: BTreeMap<AircraftId, RouteFollower>,
}

impl Controller for DijkstraController {
    fn prepare(&mut self, world: &World) -> Result<()> {
        for a in world.active() {
            if !self.followers.contains_key(&a.id) {
                self.followers.insert(a.id, RouteFollower::new(plan_dijkstra(world, a.id)?));
            }
        }
        Ok(())
    }

    fn act(&mut self, _world: &World, id: AircraftId, mask: &ActionMask) -> Result<Action> {
        Ok(follow(&mut self.followers, id, mask))
    }
}

/// Congestion-weighted A*, replanned every `replan_period` steps.
#[derive(Debug, Clone, Default)]
pub struct AstarController {
    config: AstarConfig,
    followers: BTreeMap<AircraftId, (u32, RouteFollower)>,
}

impl AstarController {
    pub fn new(config: AstarConfig) -> AstarController {
        AstarController { config, followers: BTreeMap::new() }
    }
}

impl Controller for AstarController {
    fn prepare(&mut self, world: &World) -> Result<()> {
        let now = world.step_index();
        let period = self.config.replan_period.max(1);
        for a in world.active() {
            let due = self.followers.get(&a.id).map_or(true, |(planned, _)| now - planned >= period);
            if due {
                let route = plan_astar_congestion(world, a.id, &self.config)?;
                self.followers.insert(a.id, (now, RouteFollower::new(route)));
            }
        }
        Ok(())
    }

    fn act(&mut self, _world: &World, id: AircraftId, mask: &ActionMask) -> Result<Action> {
        Ok(self.followers.get_mut(&id).map_or(Action::Stop, |(_, f)| f.act(mask)))
    }
}

/// Prioritized GA planning: aircraft are planned on activation, in id order,
/// against the remaining routes of everyone already on the surface.
#[derive(Debug, Clone, Default)]
pub struct GaController {
    config: GaConfig,
    followers: BTreeMap<AircraftId, RouteFollower>,
}

impl GaController {
    pub fn new(config: GaConfig) -> GaController {
        GaController { config, followers: BTreeMap::new() }
    }
}

impl Controller for GaController {
    fn prepare(&mut self, world: &World) -> Result<()> {
        let now = world.step_index();
        let requests: Vec<GaRequest> = world
            .active()
            .filter(|a| !self.followers.contains_key(&a.id))
            .map(|a| GaRequest { id: a.id, start: a.pose, destination: a.destination, start_step: now })
            .collect();
        if requests.is_empty() {
            return Ok(());
        }
        let committed: Vec<TimedRoute> = world
            .active()
            .filter_map(|a| self.followers.get(&a.id))
            .map(|f| TimedRoute { start_step: now, poses: f.remaining_poses(world.map()) })
            .collect();
        let config = GaConfig { seed: self.config.seed.wrapping_add(now as u64), ..self.config };
        let (routes, _) = plan_ga(world.map(), &requests, &committed, &config)?;
        for r in routes {
            self.followers.insert(r.id, RouteFollower::new(r));
        }
        Ok(())
    }

    fn act(&mut self, _world: &World, id: AircraftId, mask: &ActionMask) -> Result<Action> {
        Ok(follow(&mut self.followers, id, mask))
    }
}

/// Outcome of one aircraft in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct AircraftLog {
    pub id: AircraftId,
    pub status: Status,
    pub spawn_step: u32,
    pub activation_step: Option<u32>,
    pub arrival_step: Option<u32>,
    /// Non-stop actions taken.
    pub path_len: u32,
    /// Steps spent on the surface, stops included.
    pub taxi_steps: u32,
    /// Unimpeded shortest route from the spawn pose.
    pub shortest_steps: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub aircraft: Vec<AircraftLog>,
    pub events: Vec<StepEvents>,
    pub decision_seconds: f64,
    pub decisions: usize,
    pub steps: u32,
}

impl EpisodeLog {
    pub fn headon_events(&self) -> usize {
        self.events.iter().map(|e| e.headon_pairs.len()).sum()
    }

    pub fn proximity_events(&self) -> usize {
        self.events.iter().map(|e| e.proximity_pairs.len()).sum()
    }

    pub fn count(&self, status: Status) -> usize {
        self.aircraft.iter().filter(|a| a.status == status).count()
    }
}

/// Runs `world` to completion. Decision time (controller preparation and
/// action selection) is measured with `clock`; `on_step` sees the world
/// after every step.
pub fn run_episode(
    mut world: World,
    controller: &mut dyn Controller,
    clock: &dyn Clock,
    on_step: &mut dyn FnMut(&World) -> Result<()>,
) -> Result<EpisodeLog> {
    let mut log = EpisodeLog::default();
    while !world.is_finished() {
        let t0 = clock.seconds();
        controller.prepare(&world)?;
        let mut joint = world.joint_action();
        while let Some((id, mask)) = joint.next(&world) {
            let action = controller.act(&world, id, &mask)?;
            joint.commit(&world, action)?;
            log.decisions += 1;
        }
        log.decision_seconds += clock.seconds() - t0;
        let outcome = world.step(joint.actions())?;
        log.events.push(outcome.events);
        on_step(&world)?;
    }
    log.steps = world.step_index();
    let map = world.map();
    for a in world.aircraft() {
        let spawn_pose = a.path_log.first().copied().unwrap_or(a.pose);
        let shortest = map.shortest_steps(spawn_pose, a.destination).ok_or_else(|| {
            Error::Metrics(format!("aircraft {}: destination unreachable from its spawn pose", a.id))
        })?;
        log.aircraft.push(AircraftLog {
            id: a.id,
            status: a.status,
            spawn_step: a.spawn_step,
            activation_step: a.activation_step,
            arrival_step: a.step_of_arrival,
            path_len: a.moves,
            taxi_steps: a.taxi_steps(),
            shortest_steps: shortest,
        });
    }
    Ok(log)
}

/// Head-on and proximity conflict rates, success rate, detour and excess
/// time ratios (all percentages) and decision runtime in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    pub hcr: f64,
    pub pcr: f64,
    pub sr: f64,
    pub dr: f64,
    pub etr: f64,
    pub rt: f64,
}

/// Metrics pooled over episodes: event counts and arrivals are divided by
/// the total number of scenario aircraft, ratios average over every arrived
/// aircraft, and runtime is the mean decision time per episode.
pub fn compute_metrics(logs: &[EpisodeLog]) -> Result<Metrics> {
    let spawned: usize = logs.iter().map(|l| l.aircraft.len()).sum();
    if spawned == 0 {
        return Err(Error::Metrics("no aircraft in the evaluated episodes".into()));
    }
    let n = spawned as f64;
    let headon: usize = logs.iter().map(EpisodeLog::headon_events).sum();
    let proximity: usize = logs.iter().map(EpisodeLog::proximity_events).sum();
    let arrived: Vec<&AircraftLog> =
        logs.iter().flat_map(|l| &l.aircraft).filter(|a| a.status == Status::Arrived).collect();
    let ratio = |f: &dyn Fn(&AircraftLog) -> u32| {
        if arrived.is_empty() {
            return 0.0;
        }
        let sum: f64 = arrived
            .iter()
            .map(|a| (f(a) as f64 - a.shortest_steps as f64) / a.shortest_steps.max(1) as f64)
            .sum();
        100.0 * sum / arrived.len() as f64
    };
    Ok(Metrics {
        hcr: 100.0 * headon as f64 / n,
        pcr: 100.0 * proximity as f64 / n,
        sr: 100.0 * arrived.len() as f64 / n,
        dr: ratio(&|a| a.path_len),
        etr: ratio(&|a| a.taxi_steps),
        rt: logs.iter().map(|l| l.decision_seconds).sum::<f64>() / logs.len() as f64,
    })
}

/// One CSV row of evaluation output.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scenario: String,
    pub method: String,
    pub density: f64,
    pub seed: u64,
    pub metrics: Metrics,
}

impl MetricsRow {
    pub const HEADER: &'static str = "scenario,method,density,seed,HCR,PCR,SR,DR,ETR,RT";

    pub fn to_csv(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{:.2},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.6}",
            self.scenario, self.method, self.density, self.seed, m.hcr, m.pcr, m.sr, m.dr, m.etr, m.rt
        )
    }
}

/// Binary (P6) portable pixmap of the world, `scale` pixels per cell.
pub fn render_ppm(world: &World, scale: usize) -> Vec<u8> {
    let map = world.map();
    let s = scale.max(1);
    let (w, h) = (map.width() * s, map.height() * s);
    let mut px = vec![0u8; w * h * 3];
    let mut put = |x: usize, y: usize, c: [u8; 3]| {
        let i = (y * w + x) * 3;
        px[i..i + 3].copy_from_slice(&c);
    };
    for cy in 0..map.height() {
        for cx in 0..map.width() {
            let cell = crate::map::Cell::new(cx as i32, cy as i32);
            let color = match map.kind(cell) {
                CellKind::Blocked => [40, 40, 40],
                CellKind::Taxiway => [200, 200, 200],
                CellKind::Gate => [90, 160, 220],
                CellKind::Runway(r) => match world.runway_state(r).mode {
                    RunwayMode::Empty => [110, 110, 110],
                    RunwayMode::Takeoff => [200, 80, 80],
                    RunwayMode::Landing => [210, 150, 60],
                    RunwayMode::Crossing => [120, 180, 120],
                },
            };
            for y in 0..s {
                for x in 0..s {
                    put(cx * s + x, cy * s + y, color);
                }
            }
        }
    }
    for a in world.active() {
        draw_aircraft(&mut put, a.pose, s);
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&px);
    out
}

/// A filled body with a nose stroke pointing along the heading.
fn draw_aircraft(put: &mut impl FnMut(usize, usize, [u8; 3]), pose: Pose, s: usize) {
    let (ox, oy) = (pose.cell.x as usize * s, pose.cell.y as usize * s);
    let lo = s / 4;
    let hi = s - s / 4;
    for y in lo..hi.max(lo + 1) {
        for x in lo..hi.max(lo + 1) {
            put(ox + x.min(s - 1), oy + y.min(s - 1), [250, 210, 40]);
        }
    }
    let c = s / 2;
    let (dx, dy) = pose.heading.delta();
    for k in 0..=c {
        let x = c as i64 + dx as i64 * k as i64;
        let y = c as i64 + dy as i64 * k as i64;
        if (0..s as i64).contains(&x) && (0..s as i64).contains(&y) {
            put(ox + x as usize, oy + y as usize, [20, 20, 20]);
        }
    }
}
