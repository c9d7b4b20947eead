//! Per-aircraft observations: the routing state and the foresight tree of
//! downstream segment traffic features.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::{AircraftId, World};
use crate::error::Result;
use crate::map::{Cell, Heading, RunwayId, SegmentId};

pub const ROUTE_DIM: usize = 9;
pub const SEGMENT_FEATURES: usize = 5;
/// Segment features plus the presence bit.
pub const NODE_DIM: usize = SEGMENT_FEATURES + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsConfig {
    pub hftr_levels: usize,
    /// Aircraft count that saturates the per-segment count feature.
    pub n_cap: u32,
    /// Runway countdown that saturates the tau features.
    pub tau_max: u32,
}

impl Default for ObsConfig {
    fn default() -> Self {
        ObsConfig { hftr_levels: 3, n_cap: 8, tau_max: 20 }
    }
}

/// Number of node slots at `level` (3^level).
pub fn level_width(level: usize) -> usize {
    3usize.pow(level as u32)
}

/// Flattened observation length for a tree of `levels` levels.
pub fn observation_len(levels: usize) -> usize {
    ROUTE_DIM + NODE_DIM * (0..levels).map(level_width).sum::<usize>()
}

/// Routing state. Positions are divided by the map size, heading and runway
/// modes are raw codes, countdowns are divided by `tau_max` and clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteObs {
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub dx: f64,
    pub dy: f64,
    pub eta1: f64,
    pub tau1: f64,
    pub eta2: f64,
    pub tau2: f64,
}

impl RouteObs {
    /// Vector form with heading and runway codes scaled into `[0, 1]`.
    pub fn to_features(&self) -> [f64; ROUTE_DIM] {
        [self.x, self.y, self.h / 3.0, self.dx, self.dy, self.eta1 / 3.0, self.tau1, self.eta2 / 3.0, self.tau2]
    }
}

pub fn build_route_obs(world: &World, id: AircraftId, config: &ObsConfig) -> Result<RouteObs> {
    let a = world.get(id)?;
    if !a.is_active() {
        return Err(crate::Error::InactiveAircraft(id));
    }
    let map = world.map();
    let (w, h) = (map.width() as f64, map.height() as f64);
    let tau_max = config.tau_max.max(1) as f64;
    let runway = |r: RunwayId| {
        let s = world.runway_state(r);
        (s.mode.code() as f64, (s.tau_remaining as f64 / tau_max).min(1.0))
    };
    let (eta1, tau1) = runway(RunwayId::FIRST);
    let (eta2, tau2) = runway(RunwayId::SECOND);
    Ok(RouteObs {
        x: a.pose.cell.x as f64 / w,
        y: a.pose.cell.y as f64 / h,
        h: a.pose.heading.value() as f64,
        dx: (a.destination.x - a.pose.cell.x) as f64 / w,
        dy: (a.destination.y - a.pose.cell.y) as f64 / h,
        eta1,
        tau1,
        eta2,
        tau2,
    })
}

/// `[id, l_rem, d_head, d_same, n]`, each normalized into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFeature(pub [f64; SEGMENT_FEATURES]);

impl SegmentFeature {
    pub fn id_norm(&self) -> f64 {
        self.0[0]
    }
    pub fn l_rem_norm(&self) -> f64 {
        self.0[1]
    }
    pub fn d_head_norm(&self) -> f64 {
        self.0[2]
    }
    pub fn d_same_norm(&self) -> f64 {
        self.0[3]
    }
    pub fn n_norm(&self) -> f64 {
        self.0[4]
    }
}

/// A present node of the foresight tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HftrNode {
    pub segment: SegmentId,
    pub heading: Heading,
    /// Cell distances are measured from: the aircraft's own cell at level 0,
    /// the upstream end of the segment below it.
    pub reference: Cell,
    pub feature: SegmentFeature,
}

/// Fixed-layout foresight tree. Level `l` has `3^l` slots; the children of
/// slot `i` sit at `3i + maneuver` on the next level.
#[derive(Debug, Clone, PartialEq)]
pub struct HftrTensor {
    pub levels: Vec<Vec<Option<HftrNode>>>,
}

impl HftrTensor {
    pub fn present_count(&self, level: usize) -> usize {
        self.levels[level].iter().flatten().count()
    }

    /// Feature vector of a slot; padded slots read as zeros.
    pub fn feature(&self, level: usize, slot: usize) -> [f64; SEGMENT_FEATURES] {
        self.levels[level][slot].map(|n| n.feature.0).unwrap_or([0.0; SEGMENT_FEATURES])
    }
}

pub fn build_hftr(world: &World, id: AircraftId, config: &ObsConfig) -> Result<HftrTensor> {
    let a = world.get(id)?;
    if !a.is_active() {
        return Err(crate::Error::InactiveAircraft(id));
    }
    let map = world.map();
    let root_segment = map.segment_of(a.pose.cell)?;
    let root = HftrNode {
        segment: root_segment,
        heading: a.pose.heading,
        reference: a.pose.cell,
        feature: segment_feature(world, id, root_segment, a.pose.cell, a.pose.heading, config)?,
    };
    let mut levels = vec![vec![Some(root)]];
    for level in 1..config.hftr_levels.max(1) {
        let parents = &levels[level - 1];
        let mut next = vec![None; level_width(level)];
        for (slot, parent) in parents.iter().enumerate() {
            let Some(parent) = parent else { continue };
            let children = map.downstream_children(parent.reference, parent.heading)?;
            for child in children.iter() {
                next[slot * 3 + child.maneuver.index()] = Some(HftrNode {
                    segment: child.segment,
                    heading: child.heading,
                    reference: child.entry,
                    feature: segment_feature(world, id, child.segment, child.entry, child.heading, config)?,
                });
            }
        }
        levels.push(next);
    }
    Ok(HftrTensor { levels })
}

fn segment_feature(
    world: &World,
    observer: AircraftId,
    segment: SegmentId,
    reference: Cell,
    heading: Heading,
    config: &ObsConfig,
) -> Result<SegmentFeature> {
    let map = world.map();
    let len = map.segment(segment).len();
    let walk = map.walk_segment(reference, heading)?;
    let (dx, dy) = heading.delta();
    let mut count = 0u32;
    let mut nearest_head: Option<usize> = None;
    let mut nearest_same: Option<usize> = None;
    for &cell in &map.segment(segment).cells {
        let Some(other) = world.occupant(cell) else { continue };
        if other.id == observer {
            continue;
        }
        count += 1;
        // Only aircraft on the walked stretch ahead carry a distance.
        let offset = (cell.x - reference.x) * dx + (cell.y - reference.y) * dy;
        let on_line = Cell::new(reference.x + offset * dx, reference.y + offset * dy) == cell;
        if !on_line || offset < 0 || offset as usize >= walk.remaining {
            continue;
        }
        let slot = if other.pose.heading == heading.opposite() {
            &mut nearest_head
        } else if other.pose.heading == heading {
            &mut nearest_same
        } else {
            continue;
        };
        let offset = offset as usize;
        *slot = Some(slot.map_or(offset, |d| d.min(offset)));
    }
    let norm = |d: Option<usize>| d.map_or(1.0, |d| d as f64 / (len + 1) as f64);
    let cap = config.n_cap.max(1);
    Ok(SegmentFeature([
        segment.0 as f64 / map.segments().len() as f64,
        walk.remaining as f64 / len as f64,
        norm(nearest_head),
        norm(nearest_same),
        count.min(cap) as f64 / cap as f64,
    ]))
}

/// Concatenates the route features and every tree slot (features then
/// presence bit), levels in order and slots in maneuver-lexicographic order.
pub fn flatten(route: &RouteObs, hftr: &HftrTensor) -> Vec<f64> {
    let mut out = Vec::with_capacity(observation_len(hftr.levels.len()));
    out.extend_from_slice(&route.to_features());
    for level in &hftr.levels {
        for node in level {
            match node {
                Some(n) => {
                    out.extend_from_slice(&n.feature.0);
                    out.push(1.0);
                }
                None => out.extend_from_slice(&[0.0; NODE_DIM]),
            }
        }
    }
    out
}

/// Route state and foresight tree for `id`, flattened.
pub fn observe(world: &World, id: AircraftId, config: &ObsConfig) -> Result<Vec<f64>> {
    let route = build_route_obs(world, id, config)?;
    let hftr = build_hftr(world, id, config)?;
    Ok(flatten(&route, &hftr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, FlightPlan, RunwaySchedule};
    use crate::map::GridMap;
    use alloc::sync::Arc;

    fn world(text: &str, flights: &[(u32, (i32, i32), (i32, i32), Heading)]) -> World {
        let map = Arc::new(GridMap::parse(text).unwrap());
        let flights = flights
            .iter()
            .map(|&(id, o, d, heading)| FlightPlan {
                id: AircraftId(id),
                spawn_step: 0,
                origin: Cell::new(o.0, o.1),
                destination: Cell::new(d.0, d.1),
                heading,
            })
            .collect();
        World::new(map, EnvConfig::default(), flights, RunwaySchedule::default()).unwrap()
    }

    #[test]
    fn layout_length() {
        assert_eq!(observation_len(3), 87);
        assert_eq!(observation_len(1), 15);
    }

    #[test]
    fn route_obs_offsets() {
        let blank = alloc::format!("10 10\n{}", "tttttttttt\n".repeat(10));
        let w = world(&blank, &[(0, (2, 3), (7, 3), Heading::EAST)]);
        let r = build_route_obs(&w, AircraftId(0), &ObsConfig::default()).unwrap();
        assert_eq!((r.dx, r.dy), (0.5, 0.0));
        assert_eq!((r.eta1, r.tau1, r.eta2, r.tau2), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((r.x, r.y, r.h), (0.2, 0.3, 1.0));
    }

    #[test]
    fn lone_aircraft_sees_empty_segment() {
        let w = world("5 1\nttttt\n", &[(0, (1, 0), (4, 0), Heading::EAST)]);
        let config = ObsConfig { hftr_levels: 1, ..ObsConfig::default() };
        let t = build_hftr(&w, AircraftId(0), &config).unwrap();
        assert_eq!(t.present_count(0), 1);
        let f = t.levels[0][0].unwrap().feature;
        assert_eq!((f.d_head_norm(), f.d_same_norm(), f.n_norm()), (1.0, 1.0, 0.0));
        assert_eq!(f.l_rem_norm(), 4.0 / 5.0);
    }

    #[test]
    fn plus_map_expands_three_children() {
        let w = world(crate::testutil::PLUS, &[(0, (2, 4), (0, 2), Heading::NORTH)]);
        let config = ObsConfig { hftr_levels: 2, ..ObsConfig::default() };
        let t = build_hftr(&w, AircraftId(0), &config).unwrap();
        assert_eq!(t.present_count(1), 3);
        let map = w.map();
        let seg = |x, y| map.segment_of(Cell::new(x, y)).unwrap();
        assert_eq!(t.levels[1][0].unwrap().segment, seg(1, 2));
        assert_eq!(t.levels[1][1].unwrap().segment, seg(2, 1));
        assert_eq!(t.levels[1][2].unwrap().segment, seg(3, 2));
        let v = flatten(&build_route_obs(&w, AircraftId(0), &config).unwrap(), &t);
        assert_eq!(v.len(), observation_len(2));
    }

    #[test]
    fn opposing_traffic_ahead() {
        let w = world(
            "8 1\ntttttttt\n",
            &[(0, (0, 0), (7, 0), Heading::EAST), (1, (5, 0), (0, 0), Heading::WEST), (2, (3, 0), (7, 0), Heading::EAST)],
        );
        let config = ObsConfig { hftr_levels: 1, ..ObsConfig::default() };
        let f = build_hftr(&w, AircraftId(0), &config).unwrap().levels[0][0].unwrap().feature;
        assert_eq!(f.d_head_norm(), 5.0 / 9.0);
        assert_eq!(f.d_same_norm(), 3.0 / 9.0);
        assert_eq!(f.n_norm(), 2.0 / 8.0);
    }

    #[test]
    fn padded_slots_are_zero() {
        let w = world("5 1\nttttt\n", &[(0, (1, 0), (4, 0), Heading::EAST)]);
        let t = build_hftr(&w, AircraftId(0), &ObsConfig::default()).unwrap();
        let v = flatten(&build_route_obs(&w, AircraftId(0), &ObsConfig::default()).unwrap(), &t);
        assert!(v[ROUTE_DIM + NODE_DIM..].iter().all(|&x| x == 0.0));
        assert_eq!(v, observe(&w, AircraftId(0), &ObsConfig::default()).unwrap());
    }
}
