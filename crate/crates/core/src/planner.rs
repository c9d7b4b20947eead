//! Classical routing baselines: traffic-blind Dijkstra, congestion-weighted
//! A*, and a genetic algorithm with prioritized, conflict-penalized planning.
//!
//! Planners emit spatial routes; temporal safety belongs to the environment.
//! [`RouteFollower`] replays a route and holds position (stop) whenever the
//! next planned action is masked.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionMask, AircraftId, World};
use crate::error::{Error, Result};
use crate::map::{Action, Cell, DistanceField, GridMap, Heading, Maneuver, Pose};

/// An executable route: replaying `actions` from `start` through
/// [`GridMap::successor`] visits `cells` (which begins at the start cell).
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRoute {
    pub id: AircraftId,
    pub start: Pose,
    pub actions: Vec<Action>,
    pub cells: Vec<Cell>,
    pub cost: f64,
}

impl PlannedRoute {
    fn from_poses(id: AircraftId, poses: &[Pose], actions: Vec<Action>, cost: f64) -> PlannedRoute {
        PlannedRoute { id, start: poses[0], actions, cells: poses.iter().map(|p| p.cell).collect(), cost }
    }

    /// Poses visited when replaying the route; `None` if an action leaves
    /// the traversable grid.
    pub fn replay(&self, map: &GridMap) -> Option<Vec<Pose>> {
        let mut poses = Vec::with_capacity(self.actions.len() + 1);
        poses.push(self.start);
        let mut pose = self.start;
        for &a in &self.actions {
            pose = map.successor(pose, a)?;
            poses.push(pose);
        }
        Some(poses)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Heap entry ordered by smallest `f`, ties broken by state index so the
/// search is deterministic.
#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    state: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.state.cmp(&self.state))
    }
}

fn pose_of(map: &GridMap, state: usize) -> Pose {
    Pose { cell: map.cell_at(state / 4), heading: Heading::new((state % 4) as u8).unwrap() }
}

/// Best-first search over `(x, y, h)` with non-negative `edge_cost` and an
/// admissible `heuristic`; returns visited poses, actions and path cost.
fn search(
    map: &GridMap,
    start: Pose,
    goal: Cell,
    edge_cost: impl Fn(Pose) -> f64,
    heuristic: impl Fn(Cell) -> f64,
) -> Option<(Vec<Pose>, Vec<Action>, f64)> {
    if !map.is_traversable(start.cell) || !map.is_traversable(goal) {
        return None;
    }
    let n = map.cell_count() * 4;
    let mut best = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<(usize, Action)>> = vec![None; n];
    let mut closed = vec![false; n];
    let s = map.state_index(start);
    best[s] = 0.0;
    let mut open = BinaryHeap::from([Open { f: heuristic(start.cell), g: 0.0, state: s }]);
    while let Some(Open { g, state, .. }) = open.pop() {
        if closed[state] {
            continue;
        }
        closed[state] = true;
        let pose = pose_of(map, state);
        if pose.cell == goal {
            let mut actions = Vec::new();
            let mut poses = vec![pose];
            let mut cur = state;
            while let Some((prev, action)) = parent[cur] {
                actions.push(action);
                poses.push(pose_of(map, prev));
                cur = prev;
            }
            actions.reverse();
            poses.reverse();
            return Some((poses, actions, g));
        }
        for action in [Action::Forward, Action::Left, Action::Right] {
            let Some(next) = map.successor(pose, action) else { continue };
            let ni = map.state_index(next);
            let ng = g + edge_cost(next);
            if ng < best[ni] {
                best[ni] = ng;
                parent[ni] = Some((state, action));
                open.push(Open { f: ng + heuristic(next.cell), g: ng, state: ni });
            }
        }
    }
    None
}

/// Minimum-step, traffic-blind route from `start` to `destination`.
pub fn dijkstra(map: &GridMap, id: AircraftId, start: Pose, destination: Cell) -> Result<PlannedRoute> {
    let (poses, actions, cost) = search(map, start, destination, |_| 1.0, |_| 0.0)
        .ok_or_else(|| Error::Planning(format!("aircraft {id}: destination {destination} is unreachable")))?;
    Ok(PlannedRoute::from_poses(id, &poses, actions, cost))
}

/// Plans the current pose of an active aircraft with [`dijkstra`].
pub fn plan_dijkstra(world: &World, id: AircraftId) -> Result<PlannedRoute> {
    let a = world.get(id)?;
    dijkstra(world.map(), id, a.pose, a.destination)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AstarConfig {
    /// Extra cost per aircraft already on an edge's target segment.
    pub occupancy_cost: f64,
    /// Steps between full replans.
    pub replan_period: u32,
}

impl Default for AstarConfig {
    fn default() -> Self {
        AstarConfig { occupancy_cost: 0.5, replan_period: 5 }
    }
}

/// A* with Manhattan heuristic where entering a cell costs
/// `1 + occupancy_cost * (other aircraft on that cell's segment)`.
pub fn plan_astar_congestion(world: &World, id: AircraftId, config: &AstarConfig) -> Result<PlannedRoute> {
    let map = world.map();
    let a = world.get(id)?;
    let mut load = vec![0u32; map.segments().len()];
    for other in world.active() {
        if other.id != id {
            load[map.segment_of(other.pose.cell)?.index()] += 1;
        }
    }
    let c = config.occupancy_cost.max(0.0);
    let dest = a.destination;
    let edge = |p: Pose| {
        let seg = map.segment_of(p.cell).map(|s| load[s.index()]).unwrap_or(0);
        1.0 + c * seg as f64
    };
    let (poses, actions, cost) = search(map, a.pose, dest, edge, |cell| cell.manhattan(dest) as f64)
        .ok_or_else(|| Error::Planning(format!("aircraft {id}: destination {dest} is unreachable")))?;
    Ok(PlannedRoute::from_poses(id, &poses, actions, cost))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Fitness penalty per predicted conflict with an earlier-planned route.
    pub conflict_weight: f64,
    pub tournament_k: usize,
    /// Initial-population draws before giving up on a feasible decode.
    pub retries: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 50,
            generations: 100,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            conflict_weight: 20.0,
            tournament_k: 3,
            retries: 10,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        if self.population_size < 2 {
            return Err(Error::Config(format!("ga population_size must be at least 2, got {}", self.population_size)));
        }
        if !rate(self.crossover_rate) || !rate(self.mutation_rate) {
            return Err(Error::Config("ga rates must lie in [0, 1]".into()));
        }
        if self.tournament_k == 0 || self.conflict_weight < 0.0 {
            return Err(Error::Config("ga tournament_k must be positive and conflict_weight non-negative".into()));
        }
        Ok(())
    }
}

/// A route already committed by a higher-priority aircraft, with the step at
/// which its first pose is occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedRoute {
    pub start_step: u32,
    pub poses: Vec<Pose>,
}

impl TimedRoute {
    fn pose_at(&self, step: u32) -> Option<Pose> {
        step.checked_sub(self.start_step).and_then(|k| self.poses.get(k as usize)).copied()
    }
}

/// Added to the fitness of a decode that dead-ends before its destination.
pub const DEAD_END_PENALTY: f64 = 1.0e4;

/// One GA request: the aircraft to plan and when its route starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaRequest {
    pub id: AircraftId,
    pub start: Pose,
    pub destination: Cell,
    pub start_step: u32,
}

struct Decoded {
    poses: Vec<Pose>,
    actions: Vec<Action>,
    reached: bool,
}

/// Decodes a maneuver genotype. At every decision point (more than one
/// feasible move) the next gene picks the maneuver; an infeasible gene is
/// repaired to the feasible maneuver with the fewest steps to go, and once
/// genes run out the route continues greedily along the distance field.
fn decode(map: &GridMap, field: &DistanceField, start: Pose, genes: &[Maneuver], max_len: usize) -> Decoded {
    let mut pose = start;
    let mut poses = vec![pose];
    let mut actions = Vec::new();
    let mut next_gene = 0;
    let goal = field.target();
    while pose.cell != goal {
        if actions.len() >= max_len {
            return Decoded { poses, actions, reached: false };
        }
        let options: Vec<(Maneuver, Pose)> = Maneuver::ALL
            .into_iter()
            .filter_map(|m| map.successor(pose, m.action()).map(|p| (m, p)))
            .collect();
        let greedy = options
            .iter()
            .filter_map(|&(m, p)| field.get(map, p).map(|d| (d, m.index(), p, m)))
            .min()
            .map(|(_, _, p, m)| (m, p));
        let chosen = match options.len() {
            0 => return Decoded { poses, actions, reached: false },
            1 => Some(options[0]),
            _ => match genes.get(next_gene) {
                Some(&g) => {
                    next_gene += 1;
                    options.iter().copied().find(|&(m, _)| m == g).or(greedy)
                }
                None => greedy,
            },
        };
        let Some((m, p)) = chosen else {
            return Decoded { poses, actions, reached: false };
        };
        actions.push(m.action());
        poses.push(p);
        pose = p;
    }
    Decoded { poses, actions, reached: true }
}

/// Conflicts between a candidate route and earlier routes: same cell at the
/// same step, swaps, and opposite-heading neighbours on one segment.
/// Routes vanish once they reach their last pose.
pub fn predicted_conflicts(map: &GridMap, start_step: u32, poses: &[Pose], earlier: &[TimedRoute]) -> u32 {
    let mut conflicts = 0;
    for (k, p) in poses.iter().enumerate() {
        let t = start_step + k as u32;
        for other in earlier {
            let Some(q) = other.pose_at(t) else { continue };
            if q.cell == p.cell {
                conflicts += 1;
                continue;
            }
            let swap = k > 0
                && other.pose_at(t - 1).map(|q0| q0.cell) == Some(p.cell)
                && poses[k - 1].cell == q.cell;
            let facing = p.cell.step(p.heading) == q.cell
                && q.heading == p.heading.opposite()
                && map.segment_of(p.cell).ok() == map.segment_of(q.cell).ok();
            if swap || facing {
                conflicts += 1;
            }
        }
    }
    conflicts
}

struct Scored {
    genes: Vec<Maneuver>,
    fitness: f64,
}

/// Evolution trace of one aircraft's GA run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaTrace {
    pub id: AircraftId,
    /// Best fitness after initialization, then after each generation.
    pub best_fitness: Vec<f64>,
}

/// Plans every request in order; each aircraft's fitness counts conflicts
/// with the routes of all earlier requests and with `committed`.
pub fn plan_ga(
    map: &GridMap,
    requests: &[GaRequest],
    committed: &[TimedRoute],
    config: &GaConfig,
) -> Result<(Vec<PlannedRoute>, Vec<GaTrace>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut earlier: Vec<TimedRoute> = committed.to_vec();
    let mut routes = Vec::with_capacity(requests.len());
    let mut traces = Vec::with_capacity(requests.len());
    let mut fields: BTreeMap<Cell, DistanceField> = BTreeMap::new();
    for req in requests {
        let field = fields.entry(req.destination).or_insert_with(|| DistanceField::toward(map, req.destination));
        let (route, trace) = evolve(map, field, req, &earlier, config, &mut rng)?;
        let poses = route.replay(map).expect("decoded routes replay");
        earlier.push(TimedRoute { start_step: req.start_step, poses });
        routes.push(route);
        traces.push(trace);
    }
    Ok((routes, traces))
}

fn evolve(
    map: &GridMap,
    field: &DistanceField,
    req: &GaRequest,
    earlier: &[TimedRoute],
    config: &GaConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(PlannedRoute, GaTrace)> {
    let shortest = field.get(map, req.start).ok_or_else(|| {
        Error::Planning(format!("aircraft {}: destination {} is unreachable", req.id, req.destination))
    })?;
    // Cap: twice the decision points on a shortest route, plus slack.
    let reference = decode(map, field, req.start, &[], shortest as usize + 1);
    let decisions = reference
        .poses
        .iter()
        .take(reference.poses.len().saturating_sub(1))
        .filter(|p| Maneuver::ALL.iter().filter(|m| map.successor(**p, m.action()).is_some()).count() > 1)
        .count();
    let cap = 2 * decisions + 4;
    let max_len = 4 * (shortest as usize + map.width() + map.height());

    let fitness = |genes: &[Maneuver]| -> (f64, Decoded) {
        let d = decode(map, field, req.start, genes, max_len);
        let mut f = d.actions.len() as f64;
        if d.reached {
            f += config.conflict_weight * predicted_conflicts(map, req.start_step, &d.poses, earlier) as f64;
        } else {
            let left = field.get(map, *d.poses.last().unwrap()).unwrap_or(max_len as u32);
            f += DEAD_END_PENALTY + left as f64;
        }
        (f, d)
    };
    let random_genes =
        |rng: &mut ChaCha8Rng| -> Vec<Maneuver> { (0..cap).map(|_| Maneuver::ALL[rng.gen_range(0..3)]).collect() };

    let mut population = Vec::with_capacity(config.population_size);
    let mut feasible = false;
    for _ in 0..config.retries.max(1) {
        population.clear();
        for _ in 0..config.population_size {
            let genes = random_genes(rng);
            let (f, d) = fitness(&genes);
            feasible |= d.reached;
            population.push(Scored { genes, fitness: f });
        }
        if feasible {
            break;
        }
    }
    if !feasible {
        return Err(Error::Planning(format!("aircraft {}: no feasible route in the initial population", req.id)));
    }

    let best_of = |pop: &[Scored]| {
        pop.iter()
            .enumerate()
            .min_by(|a, b| a.1.fitness.total_cmp(&b.1.fitness).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .unwrap()
    };
    let mut trace = vec![population[best_of(&population)].fitness];
    for _ in 0..config.generations {
        let elite = best_of(&population);
        let mut next = Vec::with_capacity(config.population_size);
        next.push(Scored { genes: population[elite].genes.clone(), fitness: population[elite].fitness });
        while next.len() < config.population_size {
            let a = tournament(&population, config.tournament_k, rng);
            let b = tournament(&population, config.tournament_k, rng);
            let (mut c1, mut c2) = (population[a].genes.clone(), population[b].genes.clone());
            if rng.gen_bool(config.crossover_rate) && cap > 1 {
                let cut = rng.gen_range(1..cap);
                for i in cut..cap {
                    core::mem::swap(&mut c1[i], &mut c2[i]);
                }
            }
            for child in [c1, c2] {
                if next.len() == config.population_size {
                    break;
                }
                let mut child = child;
                for g in &mut child {
                    if rng.gen_bool(config.mutation_rate) {
                        *g = Maneuver::ALL[rng.gen_range(0..3)];
                    }
                }
                let (f, _) = fitness(&child);
                next.push(Scored { genes: child, fitness: f });
            }
        }
        population = next;
        trace.push(population[best_of(&population)].fitness);
    }
    let best = &population[best_of(&population)];
    let (f, d) = fitness(&best.genes);
    let route = PlannedRoute::from_poses(req.id, &d.poses, d.actions, f);
    Ok((route, GaTrace { id: req.id, best_fitness: trace }))
}

fn tournament(pop: &[Scored], k: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..k {
        let c = rng.gen_range(0..pop.len());
        if pop[c].fitness < pop[best].fitness {
            best = c;
        }
    }
    best
}

/// Replays a planned route under the environment's masks: the next planned
/// action is taken when valid, otherwise the aircraft stops and retries.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteFollower {
    route: PlannedRoute,
    next: usize,
}

impl RouteFollower {
    pub fn new(route: PlannedRoute) -> RouteFollower {
        RouteFollower { route, next: 0 }
    }

    pub fn route(&self) -> &PlannedRoute {
        &self.route
    }

    /// Planned actions not yet executed.
    pub fn remaining(&self) -> &[Action] {
        &self.route.actions[self.next..]
    }

    /// Poses still ahead, starting with the current one.
    pub fn remaining_poses(&self, map: &GridMap) -> Vec<Pose> {
        let mut pose = self.current_pose(map);
        let mut poses = vec![pose];
        for &a in self.remaining() {
            match map.successor(pose, a) {
                Some(p) => pose = p,
                None => break,
            }
            poses.push(pose);
        }
        poses
    }

    fn current_pose(&self, map: &GridMap) -> Pose {
        let mut pose = self.route.start;
        for &a in &self.route.actions[..self.next] {
            pose = map.successor(pose, a).unwrap_or(pose);
        }
        pose
    }

    /// Action to execute given the aircraft's current mask; advances the
    /// route cursor only when the planned action is taken.
    pub fn act(&mut self, mask: &ActionMask) -> Action {
        match self.route.actions.get(self.next) {
            Some(&a) if mask.is_valid(a) => {
                self.next += 1;
                a
            }
            _ => Action::Stop,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, FlightPlan, RunwaySchedule};
    use crate::testutil::PLUS;
    use alloc::sync::Arc;

    fn map(text: &str) -> GridMap {
        GridMap::parse(text).unwrap()
    }

    #[test]
    fn corridor_is_four_forwards() {
        let m = map("5 1\nttttt\n");
        let r = dijkstra(&m, AircraftId(0), Pose::new(0, 0, Heading::EAST), Cell::new(4, 0)).unwrap();
        assert_eq!(r.actions, vec![Action::Forward; 4]);
        assert_eq!(r.cost, 4.0);
        assert_eq!(r.cells.len(), 5);
        assert_eq!(r.replay(&m).unwrap().iter().map(|p| p.cell).collect::<Vec<_>>(), r.cells);
    }

    #[test]
    fn start_at_destination_is_empty() {
        let m = map("5 1\nttttt\n");
        let r = dijkstra(&m, AircraftId(0), Pose::new(2, 0, Heading::EAST), Cell::new(2, 0)).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn unreachable_is_a_planning_error() {
        let m = map("5 1\nttttt\n");
        // facing east with no way to turn around
        let err = dijkstra(&m, AircraftId(0), Pose::new(2, 0, Heading::EAST), Cell::new(0, 0));
        assert!(matches!(err, Err(Error::Planning(_))));
    }

    /// A fork at (1, 1): the top and bottom branches to (7, 1) are both 9
    /// moves long.
    const FORK: &str = "8 3\n.tttttt.\ntt....tt\n.tttttt.\n";

    #[test]
    fn astar_detours_around_congested_branch() {
        let m = Arc::new(map(FORK));
        let plan = |id: u32, origin: (i32, i32), heading: Heading| FlightPlan {
            id: AircraftId(id),
            spawn_step: 0,
            origin: Cell::new(origin.0, origin.1),
            destination: Cell::new(7, 1),
            heading,
        };
        let flights = vec![
            plan(0, (0, 1), Heading::EAST),
            plan(1, (2, 0), Heading::EAST),
            plan(2, (3, 0), Heading::EAST),
            plan(3, (4, 0), Heading::EAST),
        ];
        let w = World::new(m.clone(), EnvConfig::default(), flights, RunwaySchedule::default()).unwrap();
        let r = plan_astar_congestion(&w, AircraftId(0), &AstarConfig::default()).unwrap();
        // bottom branch: 9 moves on empty segments; the top branch would pay
        // 0.5 * 3 extra on each of the four cells of the occupied run (15.0)
        assert_eq!(r.cost, 9.0);
        assert!(r.cells.contains(&Cell::new(3, 2)));
        assert!(!r.cells.contains(&Cell::new(3, 0)));
        assert!(r.cost >= m.shortest_steps(w.get(AircraftId(0)).unwrap().pose, Cell::new(7, 1)).unwrap() as f64);
    }

    #[test]
    fn astar_matches_dijkstra_on_empty_world() {
        let m = Arc::new(map(PLUS));
        let flights = vec![FlightPlan {
            id: AircraftId(0),
            spawn_step: 0,
            origin: Cell::new(0, 2),
            destination: Cell::new(2, 0),
            heading: Heading::EAST,
        }];
        let w = World::new(m.clone(), EnvConfig::default(), flights, RunwaySchedule::default()).unwrap();
        let a = plan_astar_congestion(&w, AircraftId(0), &AstarConfig::default()).unwrap();
        let d = plan_dijkstra(&w, AircraftId(0)).unwrap();
        assert_eq!(a.len(), d.len());
        assert_eq!(a.cost, d.cost);
    }

    #[test]
    fn follower_waits_on_masked_action() {
        let m = map("5 1\nttttt\n");
        let r = dijkstra(&m, AircraftId(0), Pose::new(0, 0, Heading::EAST), Cell::new(4, 0)).unwrap();
        let mut f = RouteFollower::new(r);
        assert_eq!(f.act(&ActionMask::STOP_ONLY), Action::Stop);
        assert_eq!(f.remaining().len(), 4);
        assert_eq!(f.act(&ActionMask::ALL), Action::Forward);
        assert_eq!(f.remaining().len(), 3);
        assert_eq!(f.remaining_poses(&m)[0], Pose::new(1, 0, Heading::EAST));
    }

    #[test]
    fn ga_single_aircraft_finds_shortest_route() {
        let m = map(PLUS);
        let start = Pose::new(0, 2, Heading::EAST);
        let req = GaRequest { id: AircraftId(0), start, destination: Cell::new(2, 4), start_step: 0 };
        let cfg = GaConfig { seed: 3, ..GaConfig::default() };
        let (routes, traces) = plan_ga(&m, &[req], &[], &cfg).unwrap();
        assert_eq!(routes[0].len() as u32, m.shortest_steps(start, Cell::new(2, 4)).unwrap());
        assert!(traces[0].best_fitness.windows(2).all(|w| w[1] <= w[0]));
        let (again, _) = plan_ga(&m, &[req], &[], &cfg).unwrap();
        assert_eq!(routes, again);
    }

    #[test]
    fn ga_config_is_validated() {
        assert!(GaConfig { population_size: 1, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { mutation_rate: 1.5, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig::default().validate().is_ok());
    }

    #[test]
    fn conflicts_count_cooccupancy_swap_and_facing() {
        let m = map("5 1\nttttt\n");
        let east: Vec<Pose> = (0..5).map(|x| Pose::new(x, 0, Heading::EAST)).collect();
        let west: Vec<Pose> = (0..5).rev().map(|x| Pose::new(x, 0, Heading::WEST)).collect();
        let other = [TimedRoute { start_step: 0, poses: west }];
        assert!(predicted_conflicts(&m, 0, &east, &other) > 0);
        // an earlier route that has already finished is harmless
        let done = [TimedRoute { start_step: 0, poses: vec![Pose::new(4, 0, Heading::WEST)] }];
        assert_eq!(predicted_conflicts(&m, 5, &east, &done), 0);
    }
}
