//! Grid-based multi-aircraft taxiway routing.
//!
//! This crate holds the allocation-only algorithmic core: the surface grid
//! model, the masked multi-aircraft environment, foresight traffic
//! observations, classical planners, a hand-written dual-branch actor-critic
//! and its PPO / DQN trainers, plus the evaluation metrics. File formats, the
//! wall clock and the command line live in the companion `catr` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod env;
pub mod error;
pub mod eval;
pub mod map;
pub mod nn;
pub mod obs;
pub mod planner;
pub mod train;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, ParseError, Result};
