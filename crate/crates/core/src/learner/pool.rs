use crate::types::Policy;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub policy: Policy,
    /// Value of the most recent episode in which `policy` ran.
    pub last_value: f64,
    seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolUpdate {
    Inserted,
    /// A minimum-value entry was evicted.
    Replaced,
    Rejected,
}

/// Bounded elite set of policies.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPool {
    entries: Vec<PoolEntry>,
    capacity: usize,
    next_seq: u64,
}

impl PolicyPool {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "pool capacity must be positive");
        Self {
            entries: Vec::with_capacity(capacity),
            capacity,
            next_seq: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn min_value(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.last_value).min_by(f64::total_cmp)
    }

    /// Index of the oldest entry among those holding the minimum value.
    fn min_index(&self) -> Option<usize> {
        self.entries
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.last_value.total_cmp(&b.last_value).then(a.seq.cmp(&b.seq)))
            .map(|(i, _)| i)
    }

    /// Removes and returns the entry at `index`.
    pub fn take(&mut self, index: usize) -> PoolEntry {
        self.entries.swap_remove(index)
    }

    /// Inserts when there is room; otherwise replaces a minimum entry if
    /// `value` is at least the pool minimum.
    pub fn update(&mut self, policy: Policy, value: f64) -> PoolUpdate {
        let entry = PoolEntry {
            policy,
            last_value: value,
            seq: self.next_seq,
        };
        if self.entries.len() < self.capacity {
            self.next_seq += 1;
            self.entries.push(entry);
            return PoolUpdate::Inserted;
        }
        let min = self.min_index().expect("full pool is non-empty");
        if value >= self.entries[min].last_value {
            self.next_seq += 1;
            self.entries[min] = entry;
            PoolUpdate::Replaced
        } else {
            PoolUpdate::Rejected
        }
    }
}

/// Functional form of [`PolicyPool::update`].
pub fn update_pool(mut pool: PolicyPool, policy: Policy, value: f64) -> PolicyPool {
    pool.update(policy, value);
    pool
}
