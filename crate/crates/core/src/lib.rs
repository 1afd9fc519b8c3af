//! Deterministic, seeded simulator for federated SGD with heterogeneous agents.
//!
//! The crate covers three update schemes over a shared virtual agent:
//!
//! - variation-aware periodic averaging, where agent `i` completes `tau_i <= tau`
//!   local steps per period depending on its wall-clock step time;
//! - decay weighting of the local gradients inside a period;
//! - consensus, where agents gossip their mini-batch gradients with graph
//!   neighbours before every local step.
//!
//! Alongside the simulator live closed-form convergence-bound evaluators
//! ([`theory`]), the resource-cost and utility model ([`accounting`]) and
//! Monte-Carlo validators for the averaged-gradient variance identities
//! ([`trainer::validators`]).

pub mod accounting;
pub mod config;
pub mod consensus;
pub mod error;
pub mod objective;
pub mod rng;
pub mod scheduler;
pub mod theory;
pub mod trainer;
pub mod vector;

pub use error::{Error, Result};
pub use rng::{RngStream, StreamPurpose};
pub use vector::{vec_axpy, vec_norm_sq, ParamVector};
