//! CSV forms of episode logs and learning curves.
//!
//! Per-run files have the columns `start_timestep,from_state,to_state,value,length`;
//! aggregate files `window_start,from_state,to_state,fraction,mean_value,episode_count`.
//! States are written as canonical conjunction strings such as
//! `GET_FOOD&!TIMED_OUT`.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::Error;
use crate::reward_machine::RewardMachineSpec;
use crate::types::RewardState;

use super::{CurvePoint, EpisodeRecord, LifetimeObserver, MetricsLog};

pub const METRICS_HEADER: [&str; 5] = ["start_timestep", "from_state", "to_state", "value", "length"];
pub const CURVE_HEADER: [&str; 6] = [
    "window_start",
    "from_state",
    "to_state",
    "fraction",
    "mean_value",
    "episode_count",
];

pub fn write_metrics_csv<W: Write>(
    out: W,
    records: &[EpisodeRecord],
    machine: &RewardMachineSpec,
) -> Result<(), Error> {
    let mut writer = MetricsCsvWriter::new(out, machine)?;
    records.iter().for_each(|r| writer.on_episode(r));
    writer.finish().map(drop)
}

/// Streams episode records to CSV as a lifetime produces them.
///
/// Observers cannot fail, so the first write error is held back and returned
/// by [`finish`](Self::finish).
pub struct MetricsCsvWriter<'m, W: Write> {
    writer: csv::Writer<W>,
    machine: &'m RewardMachineSpec,
    names: HashMap<RewardState, String>,
    error: Option<Error>,
}

impl<'m, W: Write> MetricsCsvWriter<'m, W> {
    pub fn new(out: W, machine: &'m RewardMachineSpec) -> Result<Self, Error> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(METRICS_HEADER)?;
        Ok(Self {
            writer,
            machine,
            names: HashMap::new(),
            error: None,
        })
    }

    fn write(&mut self, r: &EpisodeRecord) -> Result<(), Error> {
        for s in [r.from_state, r.to_state] {
            self.names.entry(s).or_insert_with(|| self.machine.format_state(s));
        }
        self.writer.write_record([
            r.start_timestep.to_string().as_str(),
            &self.names[&r.from_state],
            &self.names[&r.to_state],
            &r.value.to_string(),
            &r.length.to_string(),
        ])?;
        Ok(())
    }

    /// Flushes and hands back the sink.
    pub fn finish(mut self) -> Result<W, Error> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.writer.flush()?;
        self.writer.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

impl<W: Write> LifetimeObserver for MetricsCsvWriter<'_, W> {
    fn on_episode(&mut self, record: &EpisodeRecord) {
        if self.error.is_none() {
            if let Err(e) = self.write(record) {
                self.error = Some(e);
            }
        }
    }
}

pub fn read_metrics_csv<R: Read>(
    input: R,
    machine: &RewardMachineSpec,
    seed: u64,
    lifespan: u64,
) -> Result<MetricsLog, Error> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(METRICS_HEADER) {
        return Err(Error::Format(format!("unexpected metrics header {headers:?}")));
    }
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let number = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: {e}", line + 1)))
        };
        records.push(EpisodeRecord {
            start_timestep: number(0)? as u64,
            from_state: machine.parse_state(field(1))?,
            to_state: machine.parse_state(field(2))?,
            value: number(3)?,
            length: number(4)? as u32,
        });
    }
    Ok(MetricsLog {
        seed,
        lifespan,
        records,
    })
}

pub fn write_curve_csv<W: Write>(out: W, points: &[CurvePoint], machine: &RewardMachineSpec) -> Result<(), Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CURVE_HEADER)?;
    for p in points {
        writer.write_record([
            p.window_start.to_string(),
            machine.format_state(p.from_state),
            machine.format_state(p.to_state),
            p.transition_fraction.to_string(),
            p.mean_value.to_string(),
            p.episode_count.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::GridLayout;
    use crate::learner::LearnerConfig;
    use crate::lifetime::{run_lifetime, LifetimeConfig};
    use crate::reward_machine::build_suboptimal_machine;

    #[test]
    fn metrics_csv_round_trips() {
        let machine = build_suboptimal_machine();
        let config = LifetimeConfig {
            lifespan: 5_000,
            seed: 3,
            window: 1_000,
        };
        let log = run_lifetime(&GridLayout::canonical(), &machine, &LearnerConfig::default(), &config).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &log.records, &machine).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("start_timestep,from_state,to_state,value,length\n0,GET_FOOD&!TIMED_OUT&!VISITED_LEFT,")
        );
        let back = read_metrics_csv(buf.as_slice(), &machine, 3, 5_000).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn bad_header_is_rejected() {
        let machine = build_suboptimal_machine();
        let err = read_metrics_csv("a,b\n1,2\n".as_bytes(), &machine, 0, 1).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }
}
