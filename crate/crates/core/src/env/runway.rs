use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::map::RunwayId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RunwayMode {
    Empty = 0,
    Takeoff = 1,
    Landing = 2,
    Crossing = 3,
}

impl RunwayMode {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            RunwayMode::Empty => "empty",
            RunwayMode::Takeoff => "takeoff",
            RunwayMode::Landing => "landing",
            RunwayMode::Crossing => "crossing",
        }
    }

    pub fn from_name(name: &str) -> Option<RunwayMode> {
        match name {
            "empty" => Some(RunwayMode::Empty),
            "takeoff" => Some(RunwayMode::Takeoff),
            "landing" => Some(RunwayMode::Landing),
            "crossing" => Some(RunwayMode::Crossing),
            _ => None,
        }
    }

    /// Takeoff and landing close the runway to entering traffic.
    pub fn blocks_entry(self) -> bool {
        matches!(self, RunwayMode::Takeoff | RunwayMode::Landing)
    }
}

impl fmt::Display for RunwayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mode of one runway and the steps left before it becomes available.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunwayState {
    pub mode: RunwayMode,
    pub tau_remaining: u32,
}

impl RunwayState {
    pub const EMPTY: RunwayState = RunwayState { mode: RunwayMode::Empty, tau_remaining: 0 };
}

impl Default for RunwayState {
    fn default() -> Self {
        Self::EMPTY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunwayEvent {
    pub runway: RunwayId,
    pub mode: RunwayMode,
    pub start_step: u32,
    pub duration: u32,
}

impl RunwayEvent {
    fn end(&self) -> u32 {
        self.start_step.saturating_add(self.duration)
    }
}

/// Validated, time-ordered runway events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunwaySchedule {
    events: Vec<RunwayEvent>,
}

impl RunwaySchedule {
    pub fn new(mut events: Vec<RunwayEvent>) -> Result<RunwaySchedule> {
        for e in &events {
            if e.mode == RunwayMode::Empty {
                return Err(Error::Schedule(format!("runway {}: event mode must not be empty", e.runway.get())));
            }
            if e.duration == 0 {
                return Err(Error::Schedule(format!(
                    "runway {}: event at step {} has zero duration",
                    e.runway.get(),
                    e.start_step
                )));
            }
        }
        events.sort_by_key(|e| (e.runway, e.start_step));
        for pair in events.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.runway == b.runway && b.start_step < a.end() {
                return Err(Error::Schedule(format!(
                    "runway {}: {} event at step {} overlaps {} event at step {}",
                    a.runway.get(),
                    b.mode,
                    b.start_step,
                    a.mode,
                    a.start_step
                )));
            }
        }
        Ok(RunwaySchedule { events })
    }

    pub fn events(&self) -> &[RunwayEvent] {
        &self.events
    }

    /// State of `runway` at simulation step `step`: an event starting at `s`
    /// with duration `d` holds its mode with `tau = s + d - step` for
    /// `s <= step < s + d`.
    pub fn state_at(&self, runway: RunwayId, step: u32) -> RunwayState {
        self.events
            .iter()
            .find(|e| e.runway == runway && e.start_step <= step && step < e.end())
            .map(|e| RunwayState { mode: e.mode, tau_remaining: e.end() - step })
            .unwrap_or(RunwayState::EMPTY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ev(runway: u8, mode: RunwayMode, start: u32, duration: u32) -> RunwayEvent {
        RunwayEvent { runway: RunwayId::new(runway).unwrap(), mode, start_step: start, duration }
    }

    #[test]
    fn countdown() {
        let s = RunwaySchedule::new(vec![ev(1, RunwayMode::Takeoff, 10, 5)]).unwrap();
        let r1 = RunwayId::FIRST;
        assert_eq!(s.state_at(r1, 12), RunwayState { mode: RunwayMode::Takeoff, tau_remaining: 3 });
        assert_eq!(s.state_at(r1, 9), RunwayState::EMPTY);
        assert_eq!(s.state_at(r1, 10).tau_remaining, 5);
        assert_eq!(s.state_at(r1, 14).tau_remaining, 1);
        assert_eq!(s.state_at(r1, 15), RunwayState::EMPTY);
        assert_eq!(s.state_at(RunwayId::SECOND, 12), RunwayState::EMPTY);
    }

    #[test]
    fn no_events_is_always_empty() {
        let s = RunwaySchedule::default();
        for t in 0..100 {
            assert_eq!(s.state_at(RunwayId::FIRST, t), RunwayState::EMPTY);
            assert_eq!(s.state_at(RunwayId::SECOND, t), RunwayState::EMPTY);
        }
    }

    #[test]
    fn overlap_is_rejected() {
        let err = RunwaySchedule::new(vec![ev(1, RunwayMode::Takeoff, 10, 5), ev(1, RunwayMode::Landing, 12, 4)]);
        assert!(matches!(err, Err(Error::Schedule(_))));
        // back-to-back and other-runway events are fine
        assert!(RunwaySchedule::new(vec![ev(1, RunwayMode::Takeoff, 10, 5), ev(1, RunwayMode::Landing, 15, 4)]).is_ok());
        assert!(RunwaySchedule::new(vec![ev(1, RunwayMode::Takeoff, 10, 5), ev(2, RunwayMode::Landing, 12, 4)]).is_ok());
        assert!(RunwaySchedule::new(vec![ev(1, RunwayMode::Takeoff, 10, 0)]).is_err());
    }
}
