//! File formats, the command-line front end and evaluation plumbing around
//! [`catr_core`].

pub mod checkpoint;
pub mod config;
pub mod run;
pub mod scenario;

pub use config::RunConfig;
pub use run::{Method, Timing};
pub use scenario::Scenario;
