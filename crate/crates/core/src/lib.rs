//! Acoustic cavitation detection for control valves.
//!
//! The crate turns packs of labeled acoustic time-series into flow-state
//! classifiers. A recording is cut into non-overlapping windows, each
//! window becomes a one-sided FFT magnitude spectrum, the spectrum is
//! condensed into fifteen statistical features, an optional adaptive
//! feature-engineering stage expands those with grouped aggregates and
//! pairwise crosses, and a second-order gradient-boosted-tree ensemble
//! (trained from scratch here, no external ML dependency) does the
//! classification. The [`eval`] module scores the result and the
//! [`pipeline`] module chains everything behind one config struct.
//!
//! ```no_run
//! use cavdet::pipeline::{run, PipelineConfig};
//!
//! let mut config = PipelineConfig::new("data/manifest.json", "out");
//! config.window_size = 4096;
//! let artifacts = run(&config)?;
//! println!("test accuracy {:.4}", artifacts.report.accuracy);
//! # Ok::<(), cavdet::Error>(())
//! ```

pub mod artifacts;
pub mod asfe;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbt;
pub mod nosw;
pub mod pipeline;
pub mod spectrum;
pub mod synth;
pub mod table;
pub mod task;

pub use error::{Error, Result};
pub use task::TaskKind;
