//! Episode memory: one record per frame of interaction.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::plasticity::discounted_return;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<S> {
    /// World variables observed at this frame.
    pub xi: Array1<S>,
    pub action: usize,
    pub reward: S,
    /// Action probabilities of the acting (reference) network.
    pub pi_ref: Option<Array1<S>>,
    pub done: bool,
}

impl<S: Scalar> StepRecord<S> {
    /// Reference probability of the action taken at `step`.
    pub fn reference_prob(&self, step: usize) -> Result<S> {
        let pi = self.pi_ref.as_ref().ok_or(Error::MissingReference(step))?;
        pi.get(self.action)
            .copied()
            .ok_or(Error::MissingReference(step))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeBuffer<S> {
    pub id: u64,
    pub records: Vec<StepRecord<S>>,
}

impl<S: Scalar> EpisodeBuffer<S> {
    pub fn new(id: u64) -> Self {
        Self {
            id,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: StepRecord<S>) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rewards(&self) -> Vec<S> {
        self.records.iter().map(|r| r.reward).collect()
    }

    pub fn total_reward(&self) -> S {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn returns(&self, gamma: S) -> Result<Vec<S>> {
        discounted_return(&self.rewards(), gamma)
    }

    /// One record per frame, only the last one flagged `done`.
    pub fn is_complete(&self) -> bool {
        match self.records.split_last() {
            Some((last, rest)) => last.done && rest.iter().all(|r| !r.done),
            None => false,
        }
    }
}
