use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Action, CalibratedPosterior, IntentError, NUM_ACTIONS};

/// Ring buffer of the most recent `K` calibrated frames, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentHistory {
    capacity: usize,
    frames: VecDeque<(Action, [f64; NUM_ACTIONS])>,
}

impl IntentHistory {
    pub const DEFAULT_CAPACITY: usize = 10;

    pub fn new(capacity: usize) -> Result<Self, IntentError> {
        if capacity < 2 {
            return Err(IntentError::InvalidCapacity(capacity));
        }
        Ok(Self { capacity, frames: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.frames.len() == self.capacity
    }

    pub fn push(&mut self, p: &CalibratedPosterior) {
        self.push_label(p.argmax(), *p.probs());
    }

    fn push_label(&mut self, label: Action, probs: [f64; NUM_ACTIONS]) {
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back((label, probs));
    }

    /// Buffered argmax labels, oldest first.
    pub fn labels(&self) -> impl Iterator<Item = Action> + '_ {
        self.frames.iter().map(|(a, _)| *a)
    }

    pub fn posteriors(&self) -> impl Iterator<Item = &[f64; NUM_ACTIONS]> + '_ {
        self.frames.iter().map(|(_, p)| p)
    }

    /// Consecutive argmax flips divided by `K − 1`; zero with fewer than two frames.
    pub fn oscillation_index(&self) -> f64 {
        if self.frames.len() < 2 {
            return 0.0;
        }
        let flips = self.frames.iter().zip(self.frames.iter().skip(1)).filter(|(a, b)| a.0 != b.0).count();
        flips as f64 / (self.capacity - 1) as f64
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }
}
