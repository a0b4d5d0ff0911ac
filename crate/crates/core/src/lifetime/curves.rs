use std::collections::{BTreeMap, BTreeSet};

use crate::types::RewardState;

use super::{EpisodeRecord, LifetimeObserver, MetricsLog};

/// One row of a learning curve.
///
/// `mean_value` averages over every episode of `from_state` in the window, so
/// it is the same for all `to_state` rows of a window. Windows without
/// episodes have `episode_count == 0` and zero fraction and mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub window: u64,
    pub window_start: u64,
    pub from_state: RewardState,
    pub to_state: RewardState,
    pub transition_fraction: f64,
    pub mean_value: f64,
    pub episode_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowTally {
    pub episodes: u64,
    pub value_sum: f64,
    pub to_counts: BTreeMap<RewardState, u64>,
}

impl WindowTally {
    pub fn fraction(&self, to: RewardState) -> f64 {
        if self.episodes == 0 {
            return 0.0;
        }
        self.to_counts.get(&to).copied().unwrap_or(0) as f64 / self.episodes as f64
    }

    pub fn mean_value(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.value_sum / self.episodes as f64
        }
    }
}

/// Streaming per-window tallies keyed by (window, from_state).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveAccumulator {
    window: u64,
    windows: u64,
    tallies: BTreeMap<(u64, RewardState), WindowTally>,
}

impl CurveAccumulator {
    /// Tallies for a lifespan of `lifespan` timesteps split into windows of
    /// `window` timesteps.
    pub fn new(window: u64, lifespan: u64) -> Self {
        assert!(window > 0, "window must be positive");
        Self {
            window,
            windows: lifespan.div_ceil(window),
            tallies: BTreeMap::new(),
        }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn window_count(&self) -> u64 {
        self.windows
    }

    pub fn add(&mut self, record: &EpisodeRecord) {
        let w = record.start_timestep / self.window;
        self.windows = self.windows.max(w + 1);
        let tally = self.tallies.entry((w, record.from_state)).or_default();
        tally.episodes += 1;
        tally.value_sum += record.value;
        *tally.to_counts.entry(record.to_state).or_default() += 1;
    }

    /// Folds another accumulator (same window size) into this one.
    pub fn merge(&mut self, other: &CurveAccumulator) {
        assert_eq!(self.window, other.window, "window sizes differ");
        self.windows = self.windows.max(other.windows);
        for (key, tally) in &other.tallies {
            let mine = self.tallies.entry(*key).or_default();
            mine.episodes += tally.episodes;
            mine.value_sum += tally.value_sum;
            for (to, n) in &tally.to_counts {
                *mine.to_counts.entry(*to).or_default() += n;
            }
        }
    }

    pub fn tally(&self, window: u64, from: RewardState) -> Option<&WindowTally> {
        self.tallies.get(&(window, from))
    }

    pub fn from_states(&self) -> BTreeSet<RewardState> {
        self.tallies.keys().map(|(_, s)| *s).collect()
    }

    /// Curve rows for one starting state, every window and every successor
    /// state observed anywhere in the lifetime.
    pub fn points(&self, from: RewardState) -> Vec<CurvePoint> {
        let successors: BTreeSet<RewardState> = self
            .tallies
            .iter()
            .filter(|((_, s), _)| *s == from)
            .flat_map(|(_, t)| t.to_counts.keys().copied())
            .collect();
        let empty = WindowTally::default();
        let mut out = Vec::with_capacity(self.windows as usize * successors.len());
        for w in 0..self.windows {
            let tally = self.tallies.get(&(w, from)).unwrap_or(&empty);
            for &to in &successors {
                out.push(CurvePoint {
                    window: w,
                    window_start: w * self.window,
                    from_state: from,
                    to_state: to,
                    transition_fraction: tally.fraction(to),
                    mean_value: tally.mean_value(),
                    episode_count: tally.episodes,
                });
            }
        }
        out
    }

    /// Rows for every starting state, ordered by state then window.
    pub fn all_points(&self) -> Vec<CurvePoint> {
        self.from_states().into_iter().flat_map(|s| self.points(s)).collect()
    }
}

impl LifetimeObserver for CurveAccumulator {
    fn on_episode(&mut self, record: &EpisodeRecord) {
        self.add(record);
    }
}

/// Pools the episodes of `from_state` across runs, window by window.
pub fn aggregate_runs(logs: &[MetricsLog], from_state: RewardState, window: u64) -> Vec<CurvePoint> {
    let lifespan = logs.iter().map(|l| l.lifespan).max().unwrap_or(0);
    let mut acc = CurveAccumulator::new(window, lifespan);
    for log in logs {
        for r in &log.records {
            acc.add(r);
        }
    }
    acc.points(from_state)
}
