//! FIFO experience store with a max-priority side queue.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng as _;

use crate::envs::Observation;
use crate::rng::Rng;

/// One on-policy SARSA experience tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    /// Action actually taken in `next_state`; `None` iff `terminal`.
    pub next_action: Option<usize>,
    pub terminal: bool,
    /// Absolute mean residual from the last time this transition was
    /// trained on; `+inf` until then.
    pub last_td_error: f64,
    pub episode: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Key {
    priority: f64,
    seq: u64,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded replay memory.
///
/// Transitions are evicted oldest first. Every stored transition is also
/// keyed in a priority queue ordered by `last_td_error` (ties: newest
/// first) unless it is currently checked out by [`ReplayBuffer::pop_max`].
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    /// Sequence number of `items[0]`.
    first_seq: u64,
    queue: BTreeSet<Key>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            first_seq: 0,
            queue: BTreeSet::new(),
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

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    fn key(&self, index: usize) -> Key {
        Key {
            priority: self.items[index].last_td_error,
            seq: self.first_seq + index as u64,
        }
    }

    /// Stores a transition with priority `+inf`, evicting the oldest one
    /// when full.
    pub fn push(&mut self, mut transition: Transition) {
        if self.items.len() == self.capacity {
            let key = self.key(0);
            self.queue.remove(&key);
            self.items.pop_front();
            self.first_seq += 1;
        }
        transition.last_td_error = f64::INFINITY;
        self.items.push_back(transition);
        let key = self.key(self.items.len() - 1);
        self.queue.insert(key);
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> usize {
        rng.random_range(0..self.items.len())
    }

    /// Removes the highest-priority transition from the queue and returns
    /// its index. It stays in the store and re-enters the queue on the next
    /// [`ReplayBuffer::set_priority`].
    pub fn pop_max(&mut self) -> Option<usize> {
        let key = self.queue.pop_last()?;
        Some((key.seq - self.first_seq) as usize)
    }

    /// Records a new TD error for `index` and (re)queues it.
    pub fn set_priority(&mut self, index: usize, td_error: f64) {
        let old = self.key(index);
        self.queue.remove(&old);
        self.items[index].last_td_error = td_error;
        let key = self.key(index);
        self.queue.insert(key);
    }

    /// Transitions following `index` within the same episode, in order.
    pub fn episode_suffix(&self, index: usize) -> impl Iterator<Item = &Transition> {
        let episode = self.items[index].episode;
        self.items
            .range(index + 1..)
            .take_while(move |t| t.episode == episode)
    }
}
