//! Lifelong reinforcement learning in a food-gathering gridworld.
//!
//! The reward an agent receives is a structured message, a reward state (the
//! current local goal) plus an occasional reward value, produced by a reward
//! machine. An evolutionary learner inside the agent keeps an elite pool of
//! episode-wise stationary policies per reward state and improves them over a
//! single lifetime.
//!
//! * [`types`]: actions, observations, policies, reward states and values.
//! * [`gridworld`]: layout loading and validation, dynamics, path oracle.
//! * [`reward_machine`]: machine specs, the three reward designs, runtime,
//!   trace validation.
//! * [`learner`]: policy pools and the generator strategies.
//! * [`lifetime`]: the lifetime loop, episode logs and learning curves.
//! * [`experiment`]: named presets and multi-run execution.

pub mod error;
pub mod experiment;
pub mod gridworld;
pub mod learner;
pub mod lifetime;
pub mod reward_machine;
pub mod types;

pub use error::Error;
