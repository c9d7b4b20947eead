//! Multi-aircraft surface environment.
//!
//! All active aircraft move synchronously once per step. Action masks are
//! computed in ascending aircraft-id order; each committed move reserves its
//! target cell so later aircraft in the same step cannot claim it. A target
//! cell must also be free at the start of the step, which rules out swaps.

mod runway;
mod traffic;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub use runway::{RunwayEvent, RunwayMode, RunwaySchedule, RunwayState};
pub use traffic::{generate_runway_schedule, generate_traffic, TrafficConfig};

use crate::error::{Error, Result};
use crate::map::{Action, Cell, DistanceField, GridMap, Pose, RunwayId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AircraftId(pub u32);

impl fmt::Display for AircraftId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Pending,
    Active,
    Arrived,
    Failed,
}

/// One flight of a scenario before it enters the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlightPlan {
    pub id: AircraftId,
    pub spawn_step: u32,
    pub origin: Cell,
    pub destination: Cell,
    pub heading: crate::map::Heading,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AircraftState {
    pub id: AircraftId,
    pub pose: Pose,
    pub origin: Cell,
    pub destination: Cell,
    pub spawn_step: u32,
    pub status: Status,
    /// Pose at activation, then one entry per step while active.
    pub path_log: Vec<Pose>,
    pub activation_step: Option<u32>,
    pub step_of_arrival: Option<u32>,
    /// Step at which the aircraft stopped being active (arrival or failure).
    pub end_step: Option<u32>,
    /// Non-stop actions taken.
    pub moves: u32,
}

impl AircraftState {
    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }

    /// Steps spent on the surface so far (or until arrival / failure).
    pub fn taxi_steps(&self) -> u32 {
        self.path_log.len().saturating_sub(1) as u32
    }
}

/// Per-action validity, indexed by [`Action::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionMask {
    pub valid: [bool; 4],
}

impl ActionMask {
    pub const ALL: ActionMask = ActionMask { valid: [true; 4] };
    pub const STOP_ONLY: ActionMask = ActionMask { valid: [false, true, false, false] };

    pub fn is_valid(&self, action: Action) -> bool {
        self.valid[action.index()]
    }

    pub fn count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(|a| self.is_valid(*a))
    }
}

/// Events detected at the end of one step. Pairs are stored `(low, high)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub headon_pairs: Vec<(AircraftId, AircraftId)>,
    pub proximity_pairs: Vec<(AircraftId, AircraftId)>,
    pub arrivals: Vec<AircraftId>,
}

/// Number of reward components.
pub const REWARD_COMPONENTS: usize = 5;

/// Reward components in fixed order: distance, movement, arrival,
/// proximity, head-on conflict.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardVector {
    pub dist: f64,
    pub movement: f64,
    pub arrive: f64,
    pub proximity: f64,
    pub conflict: f64,
}

impl RewardVector {
    pub const NAMES: [&'static str; REWARD_COMPONENTS] = ["dist", "move", "arrive", "prox", "conf"];

    pub fn to_array(self) -> [f64; REWARD_COMPONENTS] {
        [self.dist, self.movement, self.arrive, self.proximity, self.conflict]
    }

    pub fn total(self) -> f64 {
        self.to_array().iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    /// Multiplier on the drop in steps-to-go.
    pub dist_scale: f64,
    pub move_penalty: f64,
    pub arrive_bonus: f64,
    /// Per proximity pair the aircraft belongs to.
    pub proximity_penalty: f64,
    pub conflict_penalty: f64,
    /// Steps-to-go charged for poses that can no longer reach the
    /// destination. Defaults to `2 * (width + height)`.
    pub unreachable_steps: Option<u32>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            dist_scale: 0.1,
            move_penalty: -0.01,
            arrive_bonus: 10.0,
            proximity_penalty: -0.5,
            conflict_penalty: -5.0,
            unreachable_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig {
    /// Manhattan radius for proximity conflicts.
    pub d_prox: u32,
    /// Episode length; active aircraft left after this are unfinished.
    pub max_steps: u32,
    pub rewards: RewardConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { d_prox: 2, max_steps: 400, rewards: RewardConfig::default() }
    }
}

/// Result of one synchronized step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    /// Rewards for every aircraft that was active when the step began.
    pub rewards: Vec<(AircraftId, RewardVector)>,
    pub events: StepEvents,
}

impl StepOutcome {
    pub fn reward_of(&self, id: AircraftId) -> Option<RewardVector> {
        self.rewards.iter().find(|(a, _)| *a == id).map(|(_, r)| *r)
    }
}

#[derive(Debug, Clone)]
pub struct World {
    map: Arc<GridMap>,
    config: EnvConfig,
    schedule: Arc<RunwaySchedule>,
    fields: Arc<BTreeMap<Cell, DistanceField>>,
    step: u32,
    aircraft: Vec<AircraftState>,
    /// Aircraft slot occupying each cell.
    occupancy: Vec<Option<u32>>,
}

impl World {
    pub fn new(
        map: Arc<GridMap>,
        config: EnvConfig,
        mut flights: Vec<FlightPlan>,
        schedule: RunwaySchedule,
    ) -> Result<World> {
        flights.sort_by_key(|f| f.id);
        for pair in flights.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Scenario(format!("duplicate aircraft id {}", pair[0].id)));
            }
        }
        for f in &flights {
            for (what, cell) in [("origin", f.origin), ("destination", f.destination)] {
                if !map.is_traversable(cell) {
                    return Err(Error::Scenario(format!("aircraft {}: {what} {cell} is not traversable", f.id)));
                }
            }
            if f.origin == f.destination {
                return Err(Error::Scenario(format!("aircraft {}: origin equals destination", f.id)));
            }
        }
        for e in schedule.events() {
            if map.runway_cells(e.runway).is_empty() {
                return Err(Error::Schedule(format!("runway {} does not exist on this map", e.runway.get())));
            }
        }
        let mut fields = BTreeMap::new();
        for f in &flights {
            fields.entry(f.destination).or_insert_with(|| DistanceField::toward(&map, f.destination));
        }
        let aircraft = flights
            .iter()
            .map(|f| AircraftState {
                id: f.id,
                pose: Pose { cell: f.origin, heading: f.heading },
                origin: f.origin,
                destination: f.destination,
                spawn_step: f.spawn_step,
                status: Status::Pending,
                path_log: Vec::new(),
                activation_step: None,
                step_of_arrival: None,
                end_step: None,
                moves: 0,
            })
            .collect();
        let mut world = World {
            occupancy: vec![None; map.cell_count()],
            map,
            config,
            schedule: Arc::new(schedule),
            fields: Arc::new(fields),
            step: 0,
            aircraft,
        };
        world.activate_pending();
        Ok(world)
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn shared_map(&self) -> Arc<GridMap> {
        Arc::clone(&self.map)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn schedule(&self) -> &RunwaySchedule {
        &self.schedule
    }

    pub fn step_index(&self) -> u32 {
        self.step
    }

    pub fn aircraft(&self) -> &[AircraftState] {
        &self.aircraft
    }

    pub fn get(&self, id: AircraftId) -> Result<&AircraftState> {
        self.slot(id).map(|s| &self.aircraft[s])
    }

    fn slot(&self, id: AircraftId) -> Result<usize> {
        self.aircraft.binary_search_by_key(&id, |a| a.id).map_err(|_| Error::UnknownAircraft(id))
    }

    fn active_slot(&self, id: AircraftId) -> Result<usize> {
        let s = self.slot(id)?;
        if self.aircraft[s].is_active() {
            Ok(s)
        } else {
            Err(Error::InactiveAircraft(id))
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &AircraftState> + '_ {
        self.aircraft.iter().filter(|a| a.is_active())
    }

    pub fn active_ids(&self) -> Vec<AircraftId> {
        self.active().map(|a| a.id).collect()
    }

    /// Aircraft occupying `cell`, if any.
    pub fn occupant(&self, cell: Cell) -> Option<&AircraftState> {
        let i = self.map.index_of(cell)?;
        self.occupancy[i].map(|s| &self.aircraft[s as usize])
    }

    pub fn runway_state(&self, runway: RunwayId) -> RunwayState {
        self.schedule.state_at(runway, self.step)
    }

    /// True once every aircraft has arrived or failed, or the step limit is hit.
    pub fn is_finished(&self) -> bool {
        self.step >= self.config.max_steps
            || self.aircraft.iter().all(|a| matches!(a.status, Status::Arrived | Status::Failed))
    }

    /// Minimum non-stop actions from `pose` to the aircraft's destination.
    pub fn steps_to_go(&self, destination: Cell, pose: Pose) -> Option<u32> {
        match self.fields.get(&destination) {
            Some(field) => field.get(&self.map, pose),
            None => self.map.shortest_steps(pose, destination),
        }
    }

    fn potential_steps(&self, destination: Cell, pose: Pose) -> f64 {
        let cap = self
            .config
            .rewards
            .unreachable_steps
            .unwrap_or(2 * (self.map.width() + self.map.height()) as u32);
        self.steps_to_go(destination, pose).unwrap_or(cap) as f64
    }

    /// Mask for `id` ignoring reservations made by other aircraft this step.
    pub fn valid_actions(&self, id: AircraftId) -> Result<ActionMask> {
        let slot = self.active_slot(id)?;
        Ok(self.mask_for(slot, &[]))
    }

    fn mask_for(&self, slot: usize, reserved: &[Cell]) -> ActionMask {
        let me = &self.aircraft[slot];
        let mut mask = ActionMask::STOP_ONLY;
        for action in [Action::Forward, Action::Left, Action::Right] {
            let Some(next) = self.map.successor(me.pose, action) else {
                continue;
            };
            if self.occupant(next.cell).is_some() || reserved.contains(&next.cell) {
                continue;
            }
            if let Some(runway) = self.map.kind(next.cell).runway() {
                let entering = self.map.kind(me.pose.cell).runway() != Some(runway);
                if entering && self.runway_state(runway).mode.blocks_entry() {
                    continue;
                }
            }
            mask.valid[action.index()] = true;
        }
        mask
    }

    /// Starts building the joint action for the current step.
    pub fn joint_action(&self) -> JointAction {
        JointAction { order: self.active_ids(), reserved: Vec::new(), actions: Vec::new() }
    }

    /// Applies one action per active aircraft.
    pub fn step(&mut self, actions: &[(AircraftId, Action)]) -> Result<StepOutcome> {
        let active: Vec<usize> = (0..self.aircraft.len()).filter(|&s| self.aircraft[s].is_active()).collect();
        if actions.len() != active.len() {
            return Err(Error::ActionCount { expected: active.len(), got: actions.len() });
        }
        let mut sorted = actions.to_vec();
        sorted.sort_by_key(|(id, _)| *id);
        let mut reserved = Vec::new();
        for (&slot, &(id, action)) in active.iter().zip(&sorted) {
            if self.aircraft[slot].id != id {
                return Err(match self.slot(id) {
                    Ok(_) => Error::InactiveAircraft(id),
                    Err(e) => e,
                });
            }
            if !self.mask_for(slot, &reserved).is_valid(action) {
                return Err(Error::MaskedAction { id, action: action.name() });
            }
            if action != Action::Stop {
                reserved.push(self.map.successor(self.aircraft[slot].pose, action).expect("masked").cell);
            }
        }

        let before: Vec<f64> = active
            .iter()
            .map(|&s| self.potential_steps(self.aircraft[s].destination, self.aircraft[s].pose))
            .collect();

        for (&slot, &(_, action)) in active.iter().zip(&sorted) {
            let pose = self.aircraft[slot].pose;
            let next = self.map.successor(pose, action).expect("masked");
            let (from, to) = (self.map.index_of(pose.cell).unwrap(), self.map.index_of(next.cell).unwrap());
            self.occupancy[from] = None;
            self.occupancy[to] = Some(slot as u32);
            let a = &mut self.aircraft[slot];
            a.pose = next;
            a.path_log.push(next);
            if action != Action::Stop {
                a.moves += 1;
            }
        }
        self.step += 1;

        let mut events = StepEvents::default();
        for &slot in &active {
            let a = &mut self.aircraft[slot];
            if a.pose.cell == a.destination {
                a.status = Status::Arrived;
                a.step_of_arrival = Some(self.step);
                a.end_step = Some(self.step);
                events.arrivals.push(a.id);
                let i = self.map.index_of(a.pose.cell).unwrap();
                self.occupancy[i] = None;
            }
        }
        let still: Vec<usize> = active.iter().copied().filter(|&s| self.aircraft[s].is_active()).collect();
        for &slot in &still {
            let a = &self.aircraft[slot];
            let Some(other) = self.occupant(a.pose.cell.step(a.pose.heading)) else {
                continue;
            };
            let facing = other.pose.heading == a.pose.heading.opposite();
            let same_segment = self.map.segment_of(a.pose.cell).ok() == self.map.segment_of(other.pose.cell).ok();
            if facing && same_segment && a.id < other.id {
                events.headon_pairs.push((a.id, other.id));
            }
        }
        for (i, &sa) in still.iter().enumerate() {
            for &sb in &still[i + 1..] {
                let (a, b) = (&self.aircraft[sa], &self.aircraft[sb]);
                let pair = (a.id, b.id);
                if a.pose.cell.manhattan(b.pose.cell) <= self.config.d_prox && !events.headon_pairs.contains(&pair) {
                    events.proximity_pairs.push(pair);
                }
            }
        }
        events.headon_pairs.sort();

        let rc = self.config.rewards;
        let mut rewards = Vec::with_capacity(active.len());
        for (k, &slot) in active.iter().enumerate() {
            let a = &self.aircraft[slot];
            let after = if a.status == Status::Arrived { 0.0 } else { self.potential_steps(a.destination, a.pose) };
            let in_headon = events.headon_pairs.iter().any(|&(x, y)| x == a.id || y == a.id);
            let prox_count = events.proximity_pairs.iter().filter(|&&(x, y)| x == a.id || y == a.id).count();
            rewards.push((
                a.id,
                RewardVector {
                    dist: rc.dist_scale * (before[k] - after),
                    movement: rc.move_penalty,
                    arrive: if a.status == Status::Arrived { rc.arrive_bonus } else { 0.0 },
                    proximity: rc.proximity_penalty * prox_count as f64,
                    conflict: if in_headon { rc.conflict_penalty } else { 0.0 },
                },
            ));
        }
        for &(x, y) in &events.headon_pairs {
            for id in [x, y] {
                let slot = self.slot(id)?;
                let a = &mut self.aircraft[slot];
                a.status = Status::Failed;
                a.end_step = Some(self.step);
                let i = self.map.index_of(a.pose.cell).unwrap();
                self.occupancy[i] = None;
            }
        }
        self.activate_pending();
        Ok(StepOutcome { rewards, events })
    }

    /// Brings due pending aircraft onto the surface; a blocked origin defers
    /// the spawn to a later step.
    fn activate_pending(&mut self) {
        for slot in 0..self.aircraft.len() {
            let a = &self.aircraft[slot];
            if a.status != Status::Pending || a.spawn_step > self.step {
                continue;
            }
            let i = self.map.index_of(a.origin).unwrap();
            if self.occupancy[i].is_some() {
                continue;
            }
            self.occupancy[i] = Some(slot as u32);
            let a = &mut self.aircraft[slot];
            a.status = Status::Active;
            a.activation_step = Some(self.step);
            a.path_log.push(a.pose);
        }
    }
}

/// Joint action under construction. Aircraft are visited in ascending id
/// order and each mask accounts for cells reserved by earlier aircraft.
#[derive(Debug, Clone)]
pub struct JointAction {
    order: Vec<AircraftId>,
    reserved: Vec<Cell>,
    actions: Vec<(AircraftId, Action)>,
}

impl JointAction {
    /// Next aircraft to decide and its mask, or `None` when complete.
    pub fn next(&self, world: &World) -> Option<(AircraftId, ActionMask)> {
        let id = *self.order.get(self.actions.len())?;
        let slot = world.active_slot(id).ok()?;
        Some((id, world.mask_for(slot, &self.reserved)))
    }

    /// Commits `action` for the aircraft returned by [`JointAction::next`].
    pub fn commit(&mut self, world: &World, action: Action) -> Result<()> {
        let (id, mask) = self.next(world).ok_or(Error::ActionCount {
            expected: self.order.len(),
            got: self.actions.len() + 1,
        })?;
        if !mask.is_valid(action) {
            return Err(Error::MaskedAction { id, action: action.name() });
        }
        if action != Action::Stop {
            let pose = world.get(id)?.pose;
            self.reserved.push(world.map.successor(pose, action).expect("masked").cell);
        }
        self.actions.push((id, action));
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.actions.len() == self.order.len()
    }

    pub fn actions(&self) -> &[(AircraftId, Action)] {
        &self.actions
    }
}
