use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use rand::Rng;

use super::nstep::Transition;

pub const DEFAULT_CAPACITY: usize = 200_000;

/// Fixed-capacity FIFO of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn extend(&mut self, ts: impl IntoIterator<Item = Transition>) {
        for t in ts {
            self.push(t);
        }
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform indices with replacement.
    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        (0..batch).map(|_| rng.random_range(0..self.items.len())).collect()
    }
}

/// Replay buffer shared by concurrent actors and one learner. Each
/// `push_episode` lands atomically, so a sampled batch never sees a
/// partially written transition.
#[derive(Clone, Debug)]
pub struct SharedReplay {
    inner: Arc<Mutex<ReplayBuffer>>,
}

impl SharedReplay {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: Arc::new(Mutex::new(ReplayBuffer::new(capacity))),
        }
    }

    pub fn push_episode(&self, ts: Vec<Transition>) {
        self.inner.lock().expect("replay lock poisoned").extend(ts);
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("replay lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with<T>(&self, f: impl FnOnce(&ReplayBuffer) -> T) -> T {
        f(&self.inner.lock().expect("replay lock poisoned"))
    }
}
