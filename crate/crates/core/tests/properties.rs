//! Property tests against brute-force oracles on random small maps.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use catr_core::env::{AircraftId, EnvConfig, FlightPlan, RunwaySchedule, Status, World};
use catr_core::map::{Action, Cell, CellKind, GridMap, Heading, Pose};
use catr_core::obs::{build_hftr, ObsConfig};
use catr_core::planner::dijkstra;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random map up to 12×12: a few full-length taxiway lines (so the network
/// has intersections and long runs) plus scattered extra cells.
fn random_map(rng: &mut ChaCha8Rng) -> GridMap {
    let w = rng.gen_range(3..=12);
    let h = rng.gen_range(3..=12);
    let mut kinds = vec![CellKind::Blocked; w * h];
    for _ in 0..rng.gen_range(1..=3) {
        let y = rng.gen_range(0..h);
        (0..w).for_each(|x| kinds[y * w + x] = CellKind::Taxiway);
    }
    for _ in 0..rng.gen_range(1..=3) {
        let x = rng.gen_range(0..w);
        (0..h).for_each(|y| kinds[y * w + x] = CellKind::Taxiway);
    }
    for k in kinds.iter_mut() {
        if rng.gen_bool(0.15) {
            *k = if rng.gen_bool(0.3) { CellKind::Gate } else { CellKind::Taxiway };
        }
    }
    GridMap::from_kinds(w, h, kinds).expect("random map is well formed")
}

fn traversable(map: &GridMap) -> Vec<Cell> {
    map.traversable_cells().collect()
}

fn random_heading(rng: &mut ChaCha8Rng) -> Heading {
    Heading::ALL[rng.gen_range(0..4)]
}

/// Up to `n` aircraft on distinct cells, some spawning later.
fn random_world(rng: &mut ChaCha8Rng, map: GridMap, n: usize) -> Option<World> {
    let mut cells = traversable(&map);
    if cells.len() < 2 {
        return None;
    }
    cells.shuffle(rng);
    let count = n.min(cells.len() - 1).max(1);
    let flights = (0..count)
        .map(|i| {
            let origin = cells[i];
            let destination = loop {
                let c = cells[rng.gen_range(0..cells.len())];
                if c != origin {
                    break c;
                }
            };
            FlightPlan {
                id: AircraftId(i as u32),
                spawn_step: if rng.gen_bool(0.7) { 0 } else { rng.gen_range(0..10) },
                origin,
                destination,
                heading: random_heading(rng),
            }
        })
        .collect();
    let env = EnvConfig { max_steps: 60, ..EnvConfig::default() };
    Some(World::new(Arc::new(map), env, flights, RunwaySchedule::default()).unwrap())
}

/// One joint step of uniformly random masked actions; returns the chosen
/// actions.
fn random_step(world: &mut World, rng: &mut ChaCha8Rng) -> Vec<(AircraftId, Action)> {
    let mut joint = world.joint_action();
    while let Some((_, mask)) = joint.next(world) {
        let valid: Vec<Action> = mask.actions().collect();
        joint.commit(world, valid[rng.gen_range(0..valid.len())]).unwrap();
    }
    let actions = joint.actions().to_vec();
    world.step(&actions).unwrap();
    actions
}

/// Moves-only breadth-first search over poses.
fn bfs_steps(map: &GridMap, start: Pose, dest: Cell) -> Option<u32> {
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([(start, 0u32)]);
    while let Some((pose, d)) = queue.pop_front() {
        if pose.cell == dest {
            return Some(d);
        }
        for a in [Action::Forward, Action::Left, Action::Right] {
            if let Some(next) = map.successor(pose, a) {
                if seen.insert(next) {
                    queue.push_back((next, d + 1));
                }
            }
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dijkstra_matches_pose_bfs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng);
        let cells = traversable(&map);
        for _ in 0..10 {
            let start = Pose { cell: cells[rng.gen_range(0..cells.len())], heading: random_heading(&mut rng) };
            let dest = cells[rng.gen_range(0..cells.len())];
            let oracle = bfs_steps(&map, start, dest);
            prop_assert_eq!(map.shortest_steps(start, dest), oracle);
            match dijkstra(&map, AircraftId(0), start, dest) {
                Ok(route) => {
                    prop_assert_eq!(Some(route.len() as u32), oracle);
                    prop_assert_eq!(route.replay(&map).map(|poses| poses.last().map(|p| p.cell)), Some(Some(dest)));
                }
                Err(_) => prop_assert_eq!(oracle, None),
            }
        }
    }

    #[test]
    fn masked_actions_never_share_or_swap_cells(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng);
        let Some(mut world) = random_world(&mut rng, map, 8) else { return Ok(()) };
        while !world.is_finished() {
            let before: Vec<(AircraftId, Cell)> = world.active().map(|a| (a.id, a.pose.cell)).collect();
            random_step(&mut world, &mut rng);
            let after: Vec<Cell> = before.iter().map(|(id, _)| world.get(*id).unwrap().pose.cell).collect();
            let mut cells = HashSet::new();
            for c in &after {
                prop_assert!(cells.insert(*c), "two aircraft on {}", c);
            }
            for i in 0..before.len() {
                for j in i + 1..before.len() {
                    let swapped = after[i] == before[j].1 && after[j] == before[i].1;
                    prop_assert!(!swapped, "aircraft {} and {} swapped cells", before[i].0, before[j].0);
                }
            }
            let mut occupied = HashSet::new();
            for a in world.active() {
                prop_assert!(occupied.insert(a.pose.cell));
                prop_assert_eq!(world.occupant(a.pose.cell).map(|o| o.id), Some(a.id));
            }
        }
    }

    #[test]
    fn events_match_a_pairwise_scan(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng);
        let Some(mut world) = random_world(&mut rng, map, 8) else { return Ok(()) };
        let d_prox = world.config().d_prox;
        while !world.is_finished() {
            let movers: Vec<AircraftId> = world.active_ids();
            let mut joint = world.joint_action();
            while let Some((_, mask)) = joint.next(&world) {
                let valid: Vec<Action> = mask.actions().collect();
                joint.commit(&world, valid[rng.gen_range(0..valid.len())]).unwrap();
            }
            let outcome = world.step(joint.actions()).unwrap();
            let ev = &outcome.events;
            // Everyone who moved this step and did not arrive takes part in
            // conflict detection, at their post-move pose.
            let present: Vec<_> = movers
                .iter()
                .map(|id| world.get(*id).unwrap())
                .filter(|a| a.status != Status::Arrived)
                .collect();
            let mut headon = Vec::new();
            let mut prox = Vec::new();
            for (i, a) in present.iter().enumerate() {
                for b in &present[i + 1..] {
                    let facing = a.pose.cell.step(a.pose.heading) == b.pose.cell
                        && b.pose.cell.step(b.pose.heading) == a.pose.cell;
                    let same = world.map().segment_of(a.pose.cell).unwrap() == world.map().segment_of(b.pose.cell).unwrap();
                    let pair = (a.id.min(b.id), a.id.max(b.id));
                    if facing && same {
                        headon.push(pair);
                    } else if a.pose.cell.manhattan(b.pose.cell) <= d_prox {
                        prox.push(pair);
                    }
                }
            }
            headon.sort();
            prox.sort();
            let mut got_prox = ev.proximity_pairs.clone();
            got_prox.sort();
            prop_assert_eq!(&ev.headon_pairs, &headon);
            prop_assert_eq!(got_prox, prox);
            for &(x, y) in ev.headon_pairs.iter().chain(&ev.proximity_pairs) {
                prop_assert!(x < y, "pairs are stored low-high and never reflexive");
            }
            for &(x, y) in &ev.headon_pairs {
                prop_assert_eq!(world.get(x).unwrap().status, Status::Failed);
                prop_assert_eq!(world.get(y).unwrap().status, Status::Failed);
            }
        }
    }

    #[test]
    fn foresight_tree_matches_segment_scan(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng);
        let Some(mut world) = random_world(&mut rng, map, 8) else { return Ok(()) };
        for _ in 0..rng.gen_range(0..6) {
            if world.is_finished() {
                break;
            }
            random_step(&mut world, &mut rng);
        }
        let config = ObsConfig::default();
        for id in world.active_ids() {
            let tree = build_hftr(&world, id, &config).unwrap();
            prop_assert_eq!(tree.present_count(0), 1);
            for (level, slots) in tree.levels.iter().enumerate() {
                prop_assert_eq!(slots.len(), 3usize.pow(level as u32));
                for node in slots.iter().flatten() {
                    let seg = world.map().segment(node.segment);
                    // Cells ahead of the reference, walked one at a time.
                    let mut ahead = vec![node.reference];
                    loop {
                        let next = ahead.last().unwrap().step(node.heading);
                        if !seg.cells.contains(&next) {
                            break;
                        }
                        ahead.push(next);
                    }
                    let mut n = 0u32;
                    let (mut head, mut same) = (None::<usize>, None::<usize>);
                    for other in world.active().filter(|a| a.id != id) {
                        if !seg.cells.contains(&other.pose.cell) {
                            continue;
                        }
                        n += 1;
                        let Some(d) = ahead.iter().position(|c| *c == other.pose.cell) else { continue };
                        if other.pose.heading == node.heading.opposite() {
                            head = Some(head.map_or(d, |h| h.min(d)));
                        } else if other.pose.heading == node.heading {
                            same = Some(same.map_or(d, |s| s.min(d)));
                        }
                    }
                    let norm = |d: Option<usize>| d.map_or(1.0, |d| d as f64 / (seg.len() + 1) as f64);
                    let f = node.feature;
                    prop_assert_eq!(f.d_head_norm(), norm(head));
                    prop_assert_eq!(f.d_same_norm(), norm(same));
                    prop_assert_eq!(f.n_norm(), n.min(config.n_cap) as f64 / config.n_cap as f64);
                    prop_assert_eq!(f.l_rem_norm(), ahead.len() as f64 / seg.len() as f64);
                }
            }
        }
    }

    #[test]
    fn identical_inputs_give_identical_trajectories(seed in any::<u64>()) {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = random_map(&mut rng);
            let mut world = random_world(&mut rng, map, 6)?;
            let mut trace = Vec::new();
            while !world.is_finished() {
                random_step(&mut world, &mut rng);
                trace.push(world.aircraft().to_vec());
            }
            Some(trace)
        };
        prop_assert_eq!(run(), run());
    }
}
