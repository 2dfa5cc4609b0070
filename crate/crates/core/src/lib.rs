//! Adaptive feature selection with reinforcement learning.
//!
//! A double-DQN agent decides which feature of a sample to reveal next, and a
//! guesser network classifies the partially revealed sample once the agent
//! chooses to stop or its question budget is spent.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod artifact;
pub mod dataset;
pub mod env;
mod error;
pub mod guesser;
pub mod metrics;
pub mod nn;
pub mod session;
pub mod trace;
pub mod trainer;

pub use error::{Error, Result};
