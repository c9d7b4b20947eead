//! Scenario files: a `[flights]` section with one aircraft per line and a
//! `[runway_events]` section with one runway event per line.
//!
//! ```text
//! [flights]
//! # id spawn_step origin_x origin_y dest_x dest_y heading
//! 0 0 1 5 18 14 2
//! [runway_events]
//! # runway_id mode start_step duration
//! 1 takeoff 10 8
//! ```

use std::fmt::Write as _;
use std::path::Path;

use catr_core::env::{AircraftId, FlightPlan, RunwayEvent, RunwayMode, RunwaySchedule};
use catr_core::map::{Cell, Heading, RunwayId};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("runway schedule: {0}")]
    Schedule(#[from] catr_core::Error),
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub flights: Vec<FlightPlan>,
    pub runway: RunwaySchedule,
}

#[derive(Clone, Copy)]
enum Section {
    None,
    Flights,
    RunwayEvents,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        Scenario::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut section = Section::None;
        let mut flights = Vec::new();
        let mut events = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScenarioError::Line { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            match content {
                "[flights]" => {
                    section = Section::Flights;
                    continue;
                }
                "[runway_events]" => {
                    section = Section::RunwayEvents;
                    continue;
                }
                s if s.starts_with('[') => return Err(err(format!("unknown section {s}"))),
                _ => {}
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            match section {
                Section::None => return Err(err("entry before any section header".into())),
                Section::Flights => {
                    if fields.len() != 7 {
                        return Err(err(format!("expected 7 flight fields, found {}", fields.len())));
                    }
                    let num = |k: usize, name: &str| -> Result<i64, ScenarioError> {
                        fields[k].parse().map_err(|_| err(format!("{name} `{}` is not an integer", fields[k])))
                    };
                    let id = num(0, "id")?;
                    let spawn = num(1, "spawn_step")?;
                    let heading = num(6, "heading")?;
                    let id = u32::try_from(id).map_err(|_| err(format!("id {id} out of range")))?;
                    let spawn_step = u32::try_from(spawn).map_err(|_| err(format!("spawn_step {spawn} out of range")))?;
                    let heading = u8::try_from(heading)
                        .ok()
                        .and_then(Heading::new)
                        .ok_or_else(|| err(format!("heading {heading} is not in 0..=3")))?;
                    let coord = |k: usize, name: &str| -> Result<i32, ScenarioError> {
                        let v = num(k, name)?;
                        i32::try_from(v).map_err(|_| err(format!("{name} {v} out of range")))
                    };
                    let origin = Cell::new(coord(2, "origin_x")?, coord(3, "origin_y")?);
                    let destination = Cell::new(coord(4, "dest_x")?, coord(5, "dest_y")?);
                    if flights.iter().any(|f: &FlightPlan| f.id == AircraftId(id)) {
                        return Err(err(format!("aircraft id {id} appears twice")));
                    }
                    flights.push(FlightPlan { id: AircraftId(id), spawn_step, origin, destination, heading });
                }
                Section::RunwayEvents => {
                    if fields.len() != 4 {
                        return Err(err(format!("expected 4 runway event fields, found {}", fields.len())));
                    }
                    let runway = fields[0]
                        .parse::<u8>()
                        .ok()
                        .and_then(RunwayId::new)
                        .ok_or_else(|| err(format!("runway id `{}` is not 1 or 2", fields[0])))?;
                    let mode = RunwayMode::from_name(fields[1])
                        .filter(|m| *m != RunwayMode::Empty)
                        .ok_or_else(|| err(format!("mode `{}` is not takeoff, landing or crossing", fields[1])))?;
                    let count = |k: usize, name: &str| -> Result<u32, ScenarioError> {
                        fields[k].parse().map_err(|_| err(format!("{name} `{}` is not a step count", fields[k])))
                    };
                    events.push(RunwayEvent { runway, mode, start_step: count(2, "start_step")?, duration: count(3, "duration")? });
                }
            }
        }
        Ok(Scenario { flights, runway: RunwaySchedule::new(events)? })
    }

    /// Renders the scenario in the file format; parsing it gives the same
    /// scenario back.
    pub fn to_text(&self) -> String {
        let mut out = String::from("[flights]\n# id spawn_step origin_x origin_y dest_x dest_y heading\n");
        for f in &self.flights {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                f.id.0,
                f.spawn_step,
                f.origin.x,
                f.origin.y,
                f.destination.x,
                f.destination.y,
                f.heading.value()
            );
        }
        out.push_str("[runway_events]\n# runway_id mode start_step duration\n");
        for e in self.runway.events() {
            let _ = writeln!(out, "{} {} {} {}", e.runway.get(), e.mode, e.start_step, e.duration);
        }
        out
    }
}
