//! Minimal episodic environment interface used by the controller.

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// World variables after the step.
    pub xi: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Fixed-horizon environment with a discrete action set.
pub trait Environment {
    fn observation_dim(&self) -> usize;

    fn n_actions(&self) -> usize;

    /// Episode length in frames.
    fn horizon(&self) -> usize;

    /// Starts a new episode and returns the first observation.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<Transition>;
}
