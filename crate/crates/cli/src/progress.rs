use lifelong_core::lifetime::{EpisodeRecord, LifetimeObserver};

/// Reports each run's progress to stderr in tenths of its lifespan.
pub struct Progress {
    run: u32,
    seed: u64,
    lifespan: u64,
    next_tenth: u64,
    quiet: bool,
}

impl Progress {
    pub fn new(run: u32, seed: u64, lifespan: u64, quiet: bool) -> Self {
        Self {
            run,
            seed,
            lifespan,
            next_tenth: 1,
            quiet,
        }
    }
}

impl LifetimeObserver for Progress {
    fn on_episode(&mut self, record: &EpisodeRecord) {
        let done = record.start_timestep + u64::from(record.length);
        while !self.quiet && self.next_tenth < 10 && done * 10 >= self.lifespan * self.next_tenth {
            eprintln!(
                "run {} (seed {}): {}% ({done}/{} steps)",
                self.run,
                self.seed,
                self.next_tenth * 10,
                self.lifespan
            );
            self.next_tenth += 1;
        }
    }
}
