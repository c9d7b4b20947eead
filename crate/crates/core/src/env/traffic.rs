use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AircraftId, FlightPlan, RunwayEvent, RunwayMode, RunwaySchedule};
use crate::error::{Error, Result};
use crate::map::{DistanceField, GridMap, Heading, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficConfig {
    /// Aircraft per hour at multiplier 1.0.
    pub base_density: f64,
    pub multiplier: f64,
    /// Spawn window in steps.
    pub horizon_steps: u32,
    /// Simulated seconds per step.
    pub step_seconds: f64,
    /// Minimum steps-to-go between a sampled origin and destination.
    pub min_route_steps: u32,
    /// Runway events generated per runway over the horizon.
    pub runway_events: u32,
    /// Inclusive duration range of generated runway events, in steps.
    pub runway_event_min: u32,
    pub runway_event_max: u32,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            base_density: 42.0,
            multiplier: 1.0,
            horizon_steps: 360,
            step_seconds: 10.0,
            min_route_steps: 4,
            runway_events: 0,
            runway_event_min: 5,
            runway_event_max: 15,
        }
    }
}

impl TrafficConfig {
    pub fn aircraft_count(&self) -> usize {
        let hours = self.horizon_steps as f64 * self.step_seconds / 3600.0;
        libm::round(self.base_density * self.multiplier * hours) as usize
    }
}

/// Samples pending flights between gate cells.
///
/// Spawn steps are uniform over the horizon and ids follow spawn order. Each
/// aircraft draws an (origin, destination) pair uniformly from the gate
/// pairs whose steps-to-go is at least `min_route_steps`; its initial heading
/// is the one with the fewest steps to go.
pub fn generate_traffic(map: &GridMap, config: &TrafficConfig, seed: u64) -> Result<Vec<FlightPlan>> {
    if !(config.multiplier > 0.0) {
        return Err(Error::Generation(format!("multiplier must be positive, got {}", config.multiplier)));
    }
    let gates = map.gates();
    if gates.len() < 2 {
        return Err(Error::Generation(format!("map has {} gate cells, need at least 2", gates.len())));
    }
    let fields: Vec<DistanceField> = gates.iter().map(|&g| DistanceField::toward(map, g)).collect();
    let mut pairs = Vec::new();
    for &origin in gates {
        for (dest, field) in gates.iter().zip(&fields) {
            if origin == *dest {
                continue;
            }
            let best = Heading::ALL
                .into_iter()
                .filter_map(|h| field.get(map, Pose { cell: origin, heading: h }).map(|d| (d, h)))
                .min();
            if let Some((d, heading)) = best {
                if d >= config.min_route_steps {
                    pairs.push((origin, *dest, heading));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Generation(format!(
            "no gate pair is at least {} steps apart",
            config.min_route_steps
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = config.aircraft_count();
    let horizon = config.horizon_steps.max(1);
    let mut spawns: Vec<u32> = (0..count).map(|_| rng.gen_range(0..horizon)).collect();
    spawns.sort_unstable();
    Ok(spawns
        .into_iter()
        .enumerate()
        .map(|(i, spawn_step)| {
            let (origin, destination, heading) = pairs[rng.gen_range(0..pairs.len())];
            FlightPlan { id: AircraftId(i as u32), spawn_step, origin, destination, heading }
        })
        .collect())
}

/// Random non-overlapping runway events: the horizon is cut into
/// `runway_events` equal windows per runway and each window holds one
/// takeoff, landing or crossing event placed uniformly inside it.
pub fn generate_runway_schedule(map: &GridMap, config: &TrafficConfig, seed: u64) -> Result<RunwaySchedule> {
    if config.runway_events == 0 {
        return Ok(RunwaySchedule::default());
    }
    let (lo, hi) = (config.runway_event_min.max(1), config.runway_event_max);
    if hi < lo {
        return Err(Error::Generation(format!("runway event duration range {lo}..={hi} is empty")));
    }
    let window = config.horizon_steps / config.runway_events;
    if window < hi {
        return Err(Error::Generation(format!(
            "{} runway events of up to {hi} steps do not fit in {} steps",
            config.runway_events, config.horizon_steps
        )));
    }
    let modes = [RunwayMode::Takeoff, RunwayMode::Landing, RunwayMode::Crossing];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5275_6e77_6179);
    let mut events = Vec::new();
    for runway in map.runways().collect::<Vec<_>>() {
        for k in 0..config.runway_events {
            let duration = rng.gen_range(lo..=hi);
            let start_step = k * window + rng.gen_range(0..=window - duration);
            let mode = modes[rng.gen_range(0..modes.len())];
            events.push(RunwayEvent { runway, mode, start_step, duration });
        }
    }
    RunwaySchedule::new(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RING: &str = "6 4\ngttttg\nt....t\nt....t\ngttttg\n";

    fn hourly(multiplier: f64) -> TrafficConfig {
        TrafficConfig { multiplier, horizon_steps: 360, step_seconds: 10.0, ..TrafficConfig::default() }
    }

    #[test]
    fn density_sets_count() {
        let map = GridMap::parse(RING).unwrap();
        assert_eq!(generate_traffic(&map, &hourly(1.0), 1).unwrap().len(), 42);
        assert_eq!(generate_traffic(&map, &hourly(1.5), 1).unwrap().len(), 63);
        assert_eq!(generate_traffic(&map, &hourly(1.25), 1).unwrap().len(), 53);
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let map = GridMap::parse(RING).unwrap();
        let a = generate_traffic(&map, &hourly(1.0), 7).unwrap();
        assert_eq!(a, generate_traffic(&map, &hourly(1.0), 7).unwrap());
        assert_ne!(a, generate_traffic(&map, &hourly(1.0), 8).unwrap());
        for f in &a {
            assert_ne!(f.origin, f.destination);
            assert!(f.spawn_step < 360);
            assert!(map.shortest_steps(Pose { cell: f.origin, heading: f.heading }, f.destination).unwrap() >= 4);
        }
        assert!(a.windows(2).all(|w| w[0].spawn_step <= w[1].spawn_step));
    }

    #[test]
    fn generation_errors() {
        let map = GridMap::parse(RING).unwrap();
        assert!(generate_traffic(&map, &hourly(0.0), 1).is_err());
        let far = TrafficConfig { min_route_steps: 1000, ..hourly(1.0) };
        assert!(matches!(generate_traffic(&map, &far, 1), Err(Error::Generation(_))));
        let no_gates = GridMap::parse("3 1\nttt\n").unwrap();
        assert!(generate_traffic(&no_gates, &hourly(1.0), 1).is_err());
    }

    #[test]
    fn runway_schedule_fits_the_horizon() {
        let map = GridMap::parse("6 3\ngttttg\n111111\ngttttg\n").unwrap();
        let cfg = TrafficConfig { runway_events: 4, horizon_steps: 120, ..TrafficConfig::default() };
        let s = generate_runway_schedule(&map, &cfg, 3).unwrap();
        assert_eq!(s.events().len(), 4);
        for e in s.events() {
            assert!(e.start_step + e.duration <= 120);
            assert!((5..=15).contains(&e.duration));
        }
        assert_eq!(s, generate_runway_schedule(&map, &cfg, 3).unwrap());
        let cramped = TrafficConfig { runway_events: 20, ..cfg };
        assert!(generate_runway_schedule(&map, &cramped, 3).is_err());
        assert!(generate_runway_schedule(&map, &TrafficConfig::default(), 3).unwrap().events().is_empty());
    }
}
