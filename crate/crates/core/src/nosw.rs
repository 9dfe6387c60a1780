//! Non-overlapping sliding window augmentation.
//!
//! Each signal is tiled from index 0 with disjoint windows of a fixed size;
//! the trailing remainder shorter than one window is discarded. Windowing is
//! applied after the record-level split, so every window inherits its
//! parent's partition and no signal leaks across partitions.

use crate::dataset::{FlowState, Partition, SignalRecord, SplitAssignment};
use crate::error::{Error, Result};

/// One window cut from a parent signal, carrying the parent's metadata.
#[derive(Debug, Clone)]
pub struct Segment {
    pub parent_id: String,
    pub window_index: usize,
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub upstream_pressure: f64,
    pub valve_opening: f64,
    pub label: FlowState,
    pub partition: Partition,
}

/// Number of full windows of `window_size` that fit in a signal of
/// `signal_len` samples. Zero when the window exceeds the signal.
pub fn window_count(signal_len: usize, window_size: usize) -> usize {
    if window_size == 0 {
        0
    } else {
        signal_len / window_size
    }
}

/// Cut a record into its full windows. Window `i` covers parent sample
/// indices `[i·W, (i+1)·W)`.
pub fn segment_signal(
    record: &SignalRecord,
    window_size: usize,
    partition: Partition,
) -> Result<Vec<Segment>> {
    if window_size == 0 {
        return Err(Error::Config("window_size must be at least 1".into()));
    }
    if window_size > record.samples.len() {
        return Err(Error::Config(format!(
            "window_size {} exceeds signal length {} of record {:?}",
            window_size,
            record.samples.len(),
            record.id
        )));
    }
    Ok(record
        .samples
        .chunks_exact(window_size)
        .enumerate()
        .map(|(window_index, chunk)| Segment {
            parent_id: record.id.clone(),
            window_index,
            samples: chunk.to_vec(),
            sample_rate: record.sample_rate,
            upstream_pressure: record.upstream_pressure,
            valve_opening: record.valve_opening,
            label: record.label,
            partition,
        })
        .collect())
}

/// Window every record and route the segments into train/test lists
/// according to the record-level split.
pub fn segment_dataset(
    records: &[SignalRecord],
    split: &SplitAssignment,
    window_size: usize,
) -> Result<(Vec<Segment>, Vec<Segment>)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for record in records {
        let partition = split.partition_of(&record.id).ok_or_else(|| {
            Error::Data(format!("record {:?} is not covered by the split", record.id))
        })?;
        let segments = segment_signal(record, window_size, partition)?;
        match partition {
            Partition::Train => train.extend(segments),
            Partition::Test => test.extend(segments),
        }
    }
    Ok((train, test))
}

/// Window-count bookkeeping without touching sample data: given
/// `(record_id, signal_length)` pairs and a split, return the total number
/// of train and test windows a `segment_dataset` call would produce.
pub fn partition_window_counts<'a>(
    lengths: impl IntoIterator<Item = (&'a str, usize)>,
    split: &SplitAssignment,
    window_size: usize,
) -> Result<(usize, usize)> {
    if window_size == 0 {
        return Err(Error::Config("window_size must be at least 1".into()));
    }
    let mut train = 0;
    let mut test = 0;
    for (id, len) in lengths {
        let partition = split
            .partition_of(id)
            .ok_or_else(|| Error::Data(format!("record {id:?} is not covered by the split")))?;
        match partition {
            Partition::Train => train += window_count(len, window_size),
            Partition::Test => test += window_count(len, window_size),
        }
    }
    Ok((train, test))
}
