//! Train-ground millimetre-wave downlink simulator with learned receive-beam steering.
//!
//! The physical layer (`geometry`, `channel`, `antenna`, `link`) computes the
//! received signal power along a straight rail for any receive beam. `env`
//! wraps it as an episodic decision process; `nn` and `agents` learn beam
//! policies on it; `beamdb` runs the post-learning candidate database; and
//! `oracle` brute-forces the per-bin optimum as a yardstick.

pub mod agents;
pub mod antenna;
pub mod beamdb;
pub mod channel;
pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod link;
pub mod nn;
pub mod oracle;
pub mod output;

pub use error::{Error, Result};
