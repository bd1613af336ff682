//! Time-axis partition construction.
//!
//! Cut points are placed at empirical quantiles of the observed event times
//! so that intervals hold approximately equal numbers of failures, snapped to
//! observed event times so that every interval contains at least one. The
//! final cut sits just beyond the largest observed time.

use crate::error::{Error, Result};
use crate::model::{SurvivalDataset, TimePartition};

/// Relative headroom added past the largest observed time.
const END_MARGIN: f64 = 1e-6;

/// Builds a `J`-interval partition from the event-time quantiles.
///
/// Interior cut `j` lands on the event time at rank `ceil(D * j / J)` among
/// the `D` sorted event times (ties included), bumped forward past duplicate
/// cuts and capped so that later intervals keep at least one event each.
pub fn build_partition(data: &SurvivalDataset, intervals: usize) -> Result<TimePartition> {
    if intervals == 0 {
        return Err(Error::Partition("at least one interval required".into()));
    }
    if data.n() == 0 || !data.has_events() {
        return Err(Error::Partition("at least one event required".into()));
    }
    let mut event_times = data.event_times();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct: Vec<f64> = Vec::with_capacity(event_times.len());
    for &t in &event_times {
        if distinct.last() != Some(&t) {
            distinct.push(t);
        }
    }
    if distinct.len() < intervals {
        return Err(Error::Partition(format!(
            "{} intervals requested but only {} distinct event times; use a smaller interval count",
            intervals,
            distinct.len()
        )));
    }
    if event_times.iter().any(|&t| t <= 0.0) {
        return Err(Error::Partition("event times must be positive to partition".into()));
    }

    let total = event_times.len();
    let mut cuts = Vec::with_capacity(intervals + 1);
    cuts.push(0.0);
    for j in 1..intervals {
        let rank = (total * j).div_ceil(intervals); // ceil(D * j / J), 1-based
        let mut candidate = event_times[rank - 1];
        let prev = *cuts.last().unwrap();
        if candidate <= prev {
            // bump to the next distinct event time past the previous cut
            candidate = *distinct
                .iter()
                .find(|&&t| t > prev)
                .expect("distinct event count was checked against the interval count");
        }
        // keep enough distinct event times for the remaining intervals
        let cap = distinct[distinct.len() - 1 - (intervals - j)];
        if candidate > cap {
            candidate = cap;
        }
        cuts.push(candidate);
    }
    cuts.push(data.max_time() * (1.0 + END_MARGIN));

    let partition = TimePartition::new(cuts)?;
    partition.validate_for(data)?;
    Ok(partition)
}
