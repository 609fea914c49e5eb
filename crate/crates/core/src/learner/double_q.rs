//! Tabular double Q-learning under the average-reward (differential) criterion.
//!
//! Generic over the key and action types so the same update drives both the
//! water world and small hand-built MDPs.

use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;

/// Sparse Q-table; absent entries read as zero.
#[derive(Debug, Clone)]
pub struct QTable<K, A> {
    entries: HashMap<K, HashMap<A, f64>>,
}

impl<K: Eq + Hash, A: Eq + Hash> PartialEq for QTable<K, A> {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl<K, A> Default for QTable<K, A> {
    fn default() -> Self {
        Self {
            entries: HashMap::new(),
        }
    }
}

impl<K: Eq + Hash + Clone, A: Eq + Hash + Copy> QTable<K, A> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &K, action: &A) -> f64 {
        self.entries
            .get(key)
            .and_then(|row| row.get(action))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, key: &K, action: A, value: f64) {
        match self.entries.get_mut(key) {
            Some(row) => {
                row.insert(action, value);
            }
            None => {
                self.entries
                    .insert(key.clone(), HashMap::from([(action, value)]));
            }
        }
    }

    pub fn add(&mut self, key: &K, action: A, delta: f64) {
        let v = self.get(key, &action);
        self.set(key, action, v + delta);
    }

    /// Number of stored (state, action) entries.
    pub fn len(&self) -> usize {
        self.entries.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &A, f64)> {
        self.entries
            .iter()
            .flat_map(|(k, row)| row.iter().map(move |(a, v)| (k, a, *v)))
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.entries.keys()
    }

    /// First action in `candidates` with the largest value.
    pub fn argmax<'c>(&self, key: &K, candidates: &'c [A]) -> Option<&'c A> {
        first_max(candidates, |a| self.get(key, a))
    }
}

/// Which table plays the role of the updated one (`Q1`) in a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Updated {
    A,
    B,
}

/// Two Q-tables plus the average-reward estimate `r_hat`.
#[derive(Debug, Clone)]
pub struct DoubleQ<K, A> {
    pub qa: QTable<K, A>,
    pub qb: QTable<K, A>,
    pub avg_reward: f64,
}

impl<K: Eq + Hash, A: Eq + Hash> PartialEq for DoubleQ<K, A> {
    fn eq(&self, other: &Self) -> bool {
        self.qa == other.qa && self.qb == other.qb && self.avg_reward == other.avg_reward
    }
}

impl<K, A> Default for DoubleQ<K, A> {
    fn default() -> Self {
        Self {
            qa: QTable::default(),
            qb: QTable::default(),
            avg_reward: 0.0,
        }
    }
}

impl<K: Eq + Hash + Clone, A: Eq + Hash + Copy> DoubleQ<K, A> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn combined(&self, key: &K, action: &A) -> f64 {
        self.qa.get(key, action) + self.qb.get(key, action)
    }

    /// First action in `candidates` maximising `Q + Q'`.
    pub fn greedy<'c>(&self, key: &K, candidates: &'c [A]) -> Option<&'c A> {
        first_max(candidates, |a| self.combined(key, a))
    }

    /// One differential double-Q step with a randomly chosen updated table.
    /// Returns the TD error.
    #[allow(clippy::too_many_arguments)]
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        state: &K,
        action: A,
        next_state: &K,
        next_candidates: &[A],
        reward: f64,
        alpha: f64,
        beta: f64,
        rng: &mut R,
    ) -> f64 {
        let which = if rng.gen::<bool>() {
            Updated::A
        } else {
            Updated::B
        };
        self.update_with(
            which,
            state,
            action,
            next_state,
            next_candidates,
            reward,
            alpha,
            beta,
        )
    }

    /// The update with the table roles fixed:
    ///
    /// `a* = argmax_{a in next_candidates} Q2(s', a)`,
    /// `delta = r - r_hat + Q2(s', a*) - Q1(s, a)`,
    /// `r_hat += beta * delta`, `Q1(s, a) += alpha * delta`.
    #[allow(clippy::too_many_arguments)]
    pub fn update_with(
        &mut self,
        which: Updated,
        state: &K,
        action: A,
        next_state: &K,
        next_candidates: &[A],
        reward: f64,
        alpha: f64,
        beta: f64,
    ) -> f64 {
        let (q1, q2) = match which {
            Updated::A => (&mut self.qa, &self.qb),
            Updated::B => (&mut self.qb, &self.qa),
        };
        let bootstrap = q2
            .argmax(next_state, next_candidates)
            .map_or(0.0, |a| q2.get(next_state, a));
        let delta = reward - self.avg_reward + bootstrap - q1.get(state, &action);
        self.avg_reward += beta * delta;
        if delta != 0.0 {
            q1.add(state, action, alpha * delta);
        }
        delta
    }
}

fn first_max<A>(candidates: &[A], value: impl Fn(&A) -> f64) -> Option<&A> {
    let mut best: Option<(&A, f64)> = None;
    for a in candidates {
        let v = value(a);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a)
}
