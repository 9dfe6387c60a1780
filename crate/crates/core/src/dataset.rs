//! Dataset loading, validation and record-level train/test splitting.
//!
//! A dataset is described by a JSON manifest listing signal files along with
//! their acquisition conditions (upstream pressure, valve opening) and flow
//! state label. Signals are stored either as headerless little-endian f32
//! (`.f32le`) or as single-column CSV.
//!
//! Splitting happens on whole records, before any windowing, so that all
//! windows cut from one signal land in exactly one partition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flow condition of the valve during acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowState {
    ChokedFlowCavitation,
    ConstantCavitation,
    IncipientCavitation,
    TurbulentFlow,
    NoFlow,
}

impl FlowState {
    /// All states in canonical order. Iteration order matters for
    /// deterministic splits and class indexing, so always use this list.
    pub const ALL: [FlowState; 5] = [
        FlowState::ChokedFlowCavitation,
        FlowState::ConstantCavitation,
        FlowState::IncipientCavitation,
        FlowState::TurbulentFlow,
        FlowState::NoFlow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowState::ChokedFlowCavitation => "choked_flow_cavitation",
            FlowState::ConstantCavitation => "constant_cavitation",
            FlowState::IncipientCavitation => "incipient_cavitation",
            FlowState::TurbulentFlow => "turbulent_flow",
            FlowState::NoFlow => "no_flow",
        }
    }

    pub fn parse(s: &str) -> Result<FlowState> {
        FlowState::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Data(format!("unknown flow state label: {s:?}")))
    }

    /// True for the three cavitating regimes.
    pub fn is_cavitation(self) -> bool {
        matches!(
            self,
            FlowState::ChokedFlowCavitation
                | FlowState::ConstantCavitation
                | FlowState::IncipientCavitation
        )
    }

    /// Class index for the binary task: 1 = cavitation, 0 = no cavitation.
    pub fn binary_class(self) -> usize {
        usize::from(self.is_cavitation())
    }

    /// Class index for the four-class task. Turbulent flow and no flow
    /// merge into a single non-cavitation class.
    pub fn four_class(self) -> usize {
        match self {
            FlowState::ChokedFlowCavitation => 0,
            FlowState::ConstantCavitation => 1,
            FlowState::IncipientCavitation => 2,
            FlowState::TurbulentFlow | FlowState::NoFlow => 3,
        }
    }
}

impl fmt::Display for FlowState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Class names for the binary task, indexed by [`FlowState::binary_class`].
pub const BINARY_CLASS_NAMES: [&str; 2] = ["no_cavitation", "cavitation"];

/// Class names for the four-class task, indexed by [`FlowState::four_class`].
pub const FOUR_CLASS_NAMES: [&str; 4] = [
    "choked_flow_cavitation",
    "constant_cavitation",
    "incipient_cavitation",
    "non_cavitation",
];

/// Which side of the train/test split a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Partition> {
        match s {
            "train" => Ok(Partition::Train),
            "test" => Ok(Partition::Test),
            other => Err(Error::Data(format!("unknown partition tag: {other:?}"))),
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// On-disk encoding of signal sample files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalCodec {
    /// Headerless raw little-endian 32-bit floats.
    F32le,
    /// One sample per line, no header.
    Csv,
}

impl SignalCodec {
    pub fn extension(self) -> &'static str {
        match self {
            SignalCodec::F32le => "f32le",
            SignalCodec::Csv => "csv",
        }
    }
}

/// One labeled signal file inside a manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Signal file path, relative to the manifest's directory.
    pub path: String,
    pub upstream_pressure: f64,
    pub valve_opening: f64,
    pub label: FlowState,
}

impl ManifestEntry {
    /// Record id: the file stem of the signal path. Must be unique across
    /// the manifest.
    pub fn id(&self) -> String {
        Path::new(&self.path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.clone())
    }
}

/// Validated description of a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub pressure_levels: Vec<f64>,
    pub opening_levels: Vec<f64>,
    pub sample_rate: f64,
    pub signal_length: usize,
    pub codec: SignalCodec,
    /// Permitted deviation, in samples, between a decoded signal and
    /// `signal_length`. Zero (the default) demands an exact match.
    #[serde(default)]
    pub length_tolerance: usize,
    /// Directory signal paths are resolved against. Set when the manifest
    /// is loaded from disk; not part of the serialized form.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    /// Absolute path of an entry's signal file.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    /// Number of entries per label, in [`FlowState::ALL`] order.
    pub fn label_counts(&self) -> [usize; 5] {
        let mut counts = [0usize; 5];
        for e in &self.entries {
            let pos = FlowState::ALL.iter().position(|f| *f == e.label).unwrap();
            counts[pos] += 1;
        }
        counts
    }

    /// Structural validation: non-empty entry list, positive rates and
    /// lengths, categorical membership, unique ids. Does not touch the
    /// filesystem; see [`check_files_exist`].
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Data("manifest has no entries".into()));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::Data(format!(
                "manifest sample_rate must be a positive finite number, got {}",
                self.sample_rate
            )));
        }
        if self.signal_length == 0 {
            return Err(Error::Data("manifest signal_length must be at least 1".into()));
        }
        if self.pressure_levels.is_empty() || self.opening_levels.is_empty() {
            return Err(Error::Data(
                "manifest must declare non-empty pressure_levels and opening_levels".into(),
            ));
        }
        for level in self.pressure_levels.iter().chain(&self.opening_levels) {
            if !level.is_finite() {
                return Err(Error::Data("category levels must be finite".into()));
            }
        }

        let mut seen = BTreeSet::new();
        for entry in &self.entries {
            if !self.pressure_levels.contains(&entry.upstream_pressure) {
                return Err(Error::Data(format!(
                    "entry {:?}: upstream_pressure {} is not in pressure_levels {:?}",
                    entry.path, entry.upstream_pressure, self.pressure_levels
                )));
            }
            if !self.opening_levels.contains(&entry.valve_opening) {
                return Err(Error::Data(format!(
                    "entry {:?}: valve_opening {} is not in opening_levels {:?}",
                    entry.path, entry.valve_opening, self.opening_levels
                )));
            }
            if !seen.insert(entry.id()) {
                return Err(Error::Data(format!(
                    "duplicate record id {:?} (signal file stems must be unique)",
                    entry.id()
                )));
            }
        }
        Ok(())
    }

    /// Verify that every referenced signal file exists. Reports all absent
    /// paths at once rather than stopping at the first.
    pub fn check_files_exist(&self) -> Result<()> {
        let missing: Vec<String> = self
            .entries
            .iter()
            .map(|e| self.resolve(e))
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Data(format!(
                "{} signal file(s) missing: {}",
                missing.len(),
                missing.join(", ")
            )))
        }
    }
}

/// A fully loaded signal with its acquisition metadata.
#[derive(Debug, Clone)]
pub struct SignalRecord {
    pub id: String,
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub upstream_pressure: f64,
    pub valve_opening: f64,
    pub label: FlowState,
}

/// Load and validate a manifest from disk. Signal files are checked for
/// existence but not decoded.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| {
        Error::parse(path, format!("line {}, column {}: {}", e.line(), e.column(), e))
    })?;
    manifest.base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    manifest.validate()?;
    manifest.check_files_exist()?;
    Ok(manifest)
}

/// Serialize a manifest to `path` as pretty-printed JSON. Entry paths are
/// written as-is, i.e. relative to the manifest's directory.
pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Data(format!("manifest serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Decode one signal file according to the manifest codec and check its
/// length against the declared `signal_length`.
pub fn load_signal(manifest: &DatasetManifest, entry: &ManifestEntry) -> Result<Vec<f64>> {
    let path = manifest.resolve(entry);
    let samples = match manifest.codec {
        SignalCodec::F32le => decode_f32le(&path)?,
        SignalCodec::Csv => decode_signal_csv(&path)?,
    };
    let declared = manifest.signal_length;
    let deviation = samples.len().abs_diff(declared);
    if deviation > manifest.length_tolerance {
        return Err(Error::Data(format!(
            "signal {:?} decoded to {} samples, expected {} (tolerance {})",
            entry.path,
            samples.len(),
            declared,
            manifest.length_tolerance
        )));
    }
    if samples.is_empty() {
        return Err(Error::Data(format!("signal {:?} is empty", entry.path)));
    }
    Ok(samples)
}

/// Load every record in the manifest, in entry order.
pub fn load_records(manifest: &DatasetManifest) -> Result<Vec<SignalRecord>> {
    manifest
        .entries
        .iter()
        .map(|entry| {
            Ok(SignalRecord {
                id: entry.id(),
                samples: load_signal(manifest, entry)?,
                sample_rate: manifest.sample_rate,
                upstream_pressure: entry.upstream_pressure,
                valve_opening: entry.valve_opening,
                label: entry.label,
            })
        })
        .collect()
}

fn decode_f32le(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::parse(
            path,
            format!("f32le file length {} is not a multiple of 4", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn decode_signal_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| {
            Error::parse(path, format!("line {}: not a number: {trimmed:?}", lineno + 1))
        })?;
        samples.push(value);
    }
    Ok(samples)
}

/// Encode samples with the given codec and write them to `path`.
pub fn write_signal(samples: &[f64], codec: SignalCodec, path: &Path) -> Result<()> {
    match codec {
        SignalCodec::F32le => {
            let mut bytes = Vec::with_capacity(samples.len() * 4);
            for &s in samples {
                bytes.extend_from_slice(&(s as f32).to_le_bytes());
            }
            std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
        SignalCodec::Csv => {
            let mut text = String::new();
            for &s in samples {
                text.push_str(&format!("{s}\n"));
            }
            std::fs::write(path, text).map_err(|e| Error::io(path, e))
        }
    }
}

/// Record-level train/test assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    assignment: BTreeMap<String, Partition>,
    pub seed: u64,
    pub train_fraction: f64,
}

impl SplitAssignment {
    pub fn partition_of(&self, id: &str) -> Option<Partition> {
        self.assignment.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn count(&self, partition: Partition) -> usize {
        self.assignment.values().filter(|p| **p == partition).count()
    }

    /// Iterate over (id, partition) pairs in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, Partition)> {
        self.assignment.iter().map(|(id, p)| (id.as_str(), *p))
    }
}

/// Stratified train/test split over whole records.
///
/// The global train count is floor(N × fraction). Each label first receives
/// floor(count × fraction) train slots; the remaining slots are handed out
/// by largest fractional remainder (ties broken by label order), which keeps
/// every label within one record of its exact share. Which records fill the
/// train slots is decided by a seeded shuffle of the per-label id lists.
pub fn split_records(
    manifest: &DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    if manifest.entries.is_empty() {
        return Err(Error::Data("manifest has no entries".into()));
    }

    let total = manifest.entries.len();
    let train_total = (total as f64 * train_fraction).floor() as usize;
    if train_total == 0 || train_total == total {
        return Err(Error::Config(format!(
            "impossible stratification: fraction {train_fraction} over {total} records leaves \
             an empty partition"
        )));
    }

    // Per-label id lists, in canonical label order, each sorted for
    // seed-stable shuffling.
    let mut by_label: Vec<Vec<String>> = vec![Vec::new(); FlowState::ALL.len()];
    for entry in &manifest.entries {
        let pos = FlowState::ALL.iter().position(|f| *f == entry.label).unwrap();
        by_label[pos].push(entry.id());
    }
    for ids in &mut by_label {
        ids.sort();
    }

    for (state, ids) in FlowState::ALL.iter().zip(&by_label) {
        if ids.len() == 1 {
            log::warn!(
                "label {state} has a single record; it cannot appear in both partitions"
            );
        }
    }

    // Allocate train slots: per-label floor, then distribute what is left of
    // the global floor by largest remainder.
    let mut train_counts: Vec<usize> = Vec::with_capacity(by_label.len());
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    for (idx, ids) in by_label.iter().enumerate() {
        let exact = ids.len() as f64 * train_fraction;
        let floor = exact.floor() as usize;
        train_counts.push(floor);
        remainders.push((exact - floor as f64, idx));
    }
    let assigned: usize = train_counts.iter().sum();
    if assigned > train_total {
        // Cannot happen: sum of floors never exceeds floor of the sum.
        return Err(Error::Config("internal split accounting error".into()));
    }
    let mut leftover = train_total - assigned;
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for (remainder, idx) in remainders {
        if leftover == 0 {
            break;
        }
        if remainder > 0.0 && train_counts[idx] < by_label[idx].len() {
            train_counts[idx] += 1;
            leftover -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    for (idx, mut ids) in by_label.into_iter().enumerate() {
        ids.shuffle(&mut rng);
        for (rank, id) in ids.into_iter().enumerate() {
            let partition = if rank < train_counts[idx] {
                Partition::Train
            } else {
                Partition::Test
            };
            assignment.insert(id, partition);
        }
    }

    Ok(SplitAssignment {
        assignment,
        seed,
        train_fraction,
    })
}
