//! Synthetic dataset generation. Each flow state gets a spectral
//! signature (a handful of tones plus broadband Gaussian noise) that is
//! mildly rescaled by the record's pressure and opening category, so the
//! grouped aggregation features downstream have real structure to find.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    write_manifest, write_signal, DatasetManifest, FlowState, ManifestEntry, SignalCodec,
    SignalRecord,
};
use crate::error::{Error, Result};

/// One sinusoidal component of a class signature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub frequency: f64,
    pub amplitude: f64,
}

/// Spectral recipe for one flow state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: FlowState,
    pub tones: Vec<Tone>,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_level: f64,
    /// Depth of the slow amplitude modulation applied to the tone sum,
    /// in [0, 1].
    pub am_depth: f64,
}

impl ClassSpec {
    /// Two specs with the same tones, noise, and modulation are the same
    /// signature even under different labels.
    fn same_signature(&self, other: &ClassSpec) -> bool {
        self.tones == other.tones
            && self.noise_level == other.noise_level
            && self.am_depth == other.am_depth
    }
}

/// Frequency of the amplitude modulation envelope.
const AM_FREQUENCY: f64 = 3.0;

/// Full recipe for a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub signals_per_class: usize,
    pub signal_length: usize,
    pub sample_rate: f64,
    pub pressure_levels: Vec<f64>,
    pub opening_levels: Vec<f64>,
    pub classes: Vec<ClassSpec>,
    pub seed: u64,
}

impl SynthSpec {
    /// Desk-scale defaults: all five flow states, one-second records at a
    /// 65 536 Hz rate so every configured tone lands exactly on an FFT
    /// bin, and well-separated signatures.
    pub fn desk(seed: u64) -> Self {
        let tone = |frequency: f64, amplitude: f64| Tone { frequency, amplitude };
        SynthSpec {
            signals_per_class: 4,
            signal_length: 65_536,
            sample_rate: 65_536.0,
            pressure_levels: vec![4.0, 5.0, 6.0],
            opening_levels: vec![20.0, 40.0, 60.0, 80.0],
            classes: vec![
                ClassSpec {
                    label: FlowState::ChokedFlowCavitation,
                    tones: vec![tone(3000.0, 6.0), tone(7000.0, 4.0), tone(11_000.0, 3.0)],
                    noise_level: 0.4,
                    am_depth: 0.5,
                },
                ClassSpec {
                    label: FlowState::ConstantCavitation,
                    tones: vec![tone(2000.0, 9.0), tone(5000.0, 6.0)],
                    noise_level: 0.25,
                    am_depth: 0.3,
                },
                ClassSpec {
                    label: FlowState::IncipientCavitation,
                    tones: vec![tone(1500.0, 3.5)],
                    noise_level: 0.8,
                    am_depth: 0.15,
                },
                ClassSpec {
                    label: FlowState::TurbulentFlow,
                    tones: vec![],
                    noise_level: 1.6,
                    am_depth: 0.0,
                },
                ClassSpec {
                    label: FlowState::NoFlow,
                    tones: vec![],
                    noise_level: 0.05,
                    am_depth: 0.0,
                },
            ],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.signals_per_class == 0 {
            return Err(Error::Config("signals_per_class must be at least 1".into()));
        }
        if self.signal_length == 0 {
            return Err(Error::Config("signal_length must be at least 1".into()));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::Config(format!(
                "sample_rate must be positive and finite, got {}",
                self.sample_rate
            )));
        }
        if self.pressure_levels.is_empty() || self.opening_levels.is_empty() {
            return Err(Error::Config(
                "pressure_levels and opening_levels must be non-empty".into(),
            ));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("at least one class is required".into()));
        }
        for (i, class) in self.classes.iter().enumerate() {
            for tone in &class.tones {
                if !(tone.frequency > 0.0) || tone.frequency >= self.sample_rate / 2.0 {
                    return Err(Error::Config(format!(
                        "{} tone at {} Hz is outside (0, rate/2) = (0, {})",
                        class.label,
                        tone.frequency,
                        self.sample_rate / 2.0
                    )));
                }
                if !(tone.amplitude > 0.0) {
                    return Err(Error::Config(format!(
                        "{} tone amplitude must be positive, got {}",
                        class.label, tone.amplitude
                    )));
                }
            }
            if class.noise_level < 0.0 || !class.noise_level.is_finite() {
                return Err(Error::Config(format!(
                    "{} noise level must be non-negative, got {}",
                    class.label, class.noise_level
                )));
            }
            if !(0.0..=1.0).contains(&class.am_depth) {
                return Err(Error::Config(format!(
                    "{} modulation depth must lie in [0, 1], got {}",
                    class.label, class.am_depth
                )));
            }
            for other in &self.classes[i + 1..] {
                if class.label == other.label {
                    return Err(Error::Config(format!(
                        "class {} is specified twice",
                        class.label
                    )));
                }
                if class.same_signature(other) {
                    return Err(Error::Config(format!(
                        "classes {} and {} share a signature and would be \
                         indistinguishable",
                        class.label, other.label
                    )));
                }
            }
        }
        Ok(())
    }

    fn entry_id(&self, class: &ClassSpec, i: usize) -> String {
        format!("{}_{i:02}", class.label)
    }
}

/// Draw from the standard normal distribution via the Box-Muller
/// transform. `1 - u` keeps the logarithm away from zero.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn synthesize(
    spec: &SynthSpec,
    class: &ClassSpec,
    pressure_index: usize,
    opening_index: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let scale = 1.0 + 0.08 * pressure_index as f64 + 0.05 * opening_index as f64;
    let phases: Vec<f64> = class.tones.iter().map(|_| rng.gen::<f64>() * TAU).collect();
    let mut samples = Vec::with_capacity(spec.signal_length);
    for t in 0..spec.signal_length {
        let time = t as f64 / spec.sample_rate;
        let mut tone_sum = 0.0;
        for (tone, &phase) in class.tones.iter().zip(&phases) {
            tone_sum += tone.amplitude * scale * (TAU * tone.frequency * time + phase).sin();
        }
        let envelope = 1.0 + class.am_depth * (TAU * AM_FREQUENCY * time).sin();
        let noise = if class.noise_level > 0.0 {
            class.noise_level * standard_normal(rng)
        } else {
            0.0
        };
        samples.push(tone_sum * envelope + noise);
    }
    samples
}

/// Generate all records and the manifest that describes them. Entry
/// paths point under a `signals/` directory; [`write_dataset`] creates
/// them. Each record derives its own seed from the dataset seed and its
/// global index, so regeneration is order-independent.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<SignalRecord>, DatasetManifest)> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut entries = Vec::new();
    let mut index = 0u64;
    for class in &spec.classes {
        for i in 0..spec.signals_per_class {
            let pressure_index = i % spec.pressure_levels.len();
            let opening_index = (i / spec.pressure_levels.len()) % spec.opening_levels.len();
            let record_seed = spec
                .seed
                .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut rng = ChaCha8Rng::seed_from_u64(record_seed);
            let samples = synthesize(spec, class, pressure_index, opening_index, &mut rng);
            let id = spec.entry_id(class, i);
            records.push(SignalRecord {
                id: id.clone(),
                samples,
                sample_rate: spec.sample_rate,
                upstream_pressure: spec.pressure_levels[pressure_index],
                valve_opening: spec.opening_levels[opening_index],
                label: class.label,
            });
            entries.push(ManifestEntry {
                path: format!("signals/{id}.{}", SignalCodec::F32le.extension()),
                upstream_pressure: spec.pressure_levels[pressure_index],
                valve_opening: spec.opening_levels[opening_index],
                label: class.label,
            });
            index += 1;
        }
    }
    let manifest = DatasetManifest {
        entries,
        pressure_levels: spec.pressure_levels.clone(),
        opening_levels: spec.opening_levels.clone(),
        sample_rate: spec.sample_rate,
        signal_length: spec.signal_length,
        codec: SignalCodec::F32le,
        length_tolerance: 0,
        base_dir: PathBuf::new(),
    };
    manifest.validate()?;
    Ok((records, manifest))
}

/// Generate a dataset and write it under `dir`: signal files in
/// `dir/signals/` and the manifest at `dir/manifest.json`. Returns the
/// manifest path.
pub fn write_dataset(spec: &SynthSpec, dir: &Path) -> Result<PathBuf> {
    let (records, mut manifest) = generate(spec)?;
    let signals_dir = dir.join("signals");
    std::fs::create_dir_all(&signals_dir).map_err(|e| Error::io(&signals_dir, e))?;
    for (record, entry) in records.iter().zip(&manifest.entries) {
        write_signal(&record.samples, manifest.codec, &dir.join(&entry.path))?;
    }
    let manifest_path = dir.join("manifest.json");
    write_manifest(&manifest, &manifest_path)?;
    manifest.base_dir = dir.to_path_buf();
    Ok(manifest_path)
}
