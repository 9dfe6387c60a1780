//! The 15 statistical features computed from a magnitude spectrum.
//!
//! Three families: central trend (mean, median, quartiles), dispersion
//! (min, max, iqr, std, rms, square-root amplitude) and distribution shape
//! (kurtosis, skewness, shape/clearance/crest factors). All normalizations
//! are population-style (1/n); order statistics sort ascending.

use crate::error::{Error, Result};
use crate::nosw::Segment;
use crate::spectrum::{fft_magnitude, Spectrum};
use crate::table::{FeatureTable, RowMeta};

/// Canonical feature order. Tables, CSV headers and model schemas all use
/// this ordering.
pub const FEATURE_NAMES: [&str; 15] = [
    "mean",
    "median",
    "low_quartile",
    "upper_quartile",
    "min",
    "max",
    "iqr",
    "std",
    "rms",
    "sra",
    "kurtosis",
    "skewness",
    "shape_factor",
    "clearance_factor",
    "crest_factor",
];

/// The 15 statistics of one sequence, plus a flag marking degenerate inputs
/// (zero variance or all-zero) whose shape statistics used guarded values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub mean: f64,
    pub median: f64,
    pub low_quartile: f64,
    pub upper_quartile: f64,
    pub min: f64,
    pub max: f64,
    pub iqr: f64,
    pub std: f64,
    pub rms: f64,
    pub sra: f64,
    pub kurtosis: f64,
    pub skewness: f64,
    pub shape_factor: f64,
    pub clearance_factor: f64,
    pub crest_factor: f64,
    pub degenerate: bool,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; 15] {
        [
            self.mean,
            self.median,
            self.low_quartile,
            self.upper_quartile,
            self.min,
            self.max,
            self.iqr,
            self.std,
            self.rms,
            self.sra,
            self.kurtosis,
            self.skewness,
            self.shape_factor,
            self.clearance_factor,
            self.crest_factor,
        ]
    }
}

/// Features of a spectrum's magnitude sequence.
pub fn extract_features(spectrum: &Spectrum) -> Result<FeatureVector> {
    features_of(&spectrum.magnitudes)
}

/// Features of an arbitrary real sequence. Needs at least 4 values for the
/// higher moments to mean anything.
pub fn features_of(values: &[f64]) -> Result<FeatureVector> {
    let n = values.len();
    if n < 4 {
        return Err(Error::Data(format!(
            "need at least 4 values to extract features, got {n}"
        )));
    }
    for (index, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "value at index {index} is not finite ({v})"
            )));
        }
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;

    // All order-dependent sums run over the sorted copy, so the features
    // are exactly invariant under input permutation.
    let mean = sorted.iter().sum::<f64>() / nf;
    let median = median_sorted(&sorted);
    let low_quartile = quartile_sorted(&sorted, 1);
    let upper_quartile = quartile_sorted(&sorted, 3);
    let min = sorted[0];
    let max = sorted[n - 1];
    let iqr = upper_quartile - low_quartile;

    let m2 = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m3 = sorted.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    let m4 = sorted.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let std = m2.sqrt();

    let rms = (sorted.iter().map(|x| x * x).sum::<f64>() / nf).sqrt();
    let sra = (sorted.iter().map(|x| x.abs().sqrt()).sum::<f64>() / nf).powi(2);
    let mean_abs = sorted.iter().map(|x| x.abs()).sum::<f64>() / nf;
    let peak = sorted.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));

    let mut degenerate = false;

    // Zero variance: the standardized moments are 0/0; report 0 and flag.
    let (kurtosis, skewness) = if std == 0.0 {
        degenerate = true;
        (0.0, 0.0)
    } else {
        (m4 / (m2 * m2), m3 / (m2 * std))
    };

    // All-zero input: every amplitude ratio is 0/0; report the constant
    // sequence limit 1 and flag.
    let (shape_factor, clearance_factor, crest_factor) = if peak == 0.0 {
        degenerate = true;
        (1.0, 1.0, 1.0)
    } else {
        (rms / mean_abs, peak / sra, peak / rms)
    };

    Ok(FeatureVector {
        mean,
        median,
        low_quartile,
        upper_quartile,
        min,
        max,
        iqr,
        std,
        rms,
        sra,
        kurtosis,
        skewness,
        shape_factor,
        clearance_factor,
        crest_factor,
        degenerate,
    })
}

/// Median of an ascending-sorted slice: middle value for odd n, mean of the
/// two middle values for even n.
fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Quartile of an ascending-sorted slice. `quarters` is 1 for Q1, 3 for Q3,
/// so that np = n·quarters/4 can be tested for integrality without floating
/// point: if np is an integer, Q = ½(x_(np) + x_(np+1)); otherwise
/// Q = x_(⌊np⌋+1), indices 1-based.
fn quartile_sorted(sorted: &[f64], quarters: usize) -> f64 {
    let n = sorted.len();
    let num = n * quarters;
    if num % 4 == 0 {
        let idx = num / 4;
        0.5 * (sorted[idx - 1] + sorted[idx])
    } else {
        let idx = num / 4 + 1;
        sorted[idx - 1]
    }
}

/// Transform segments to spectra to feature rows. Rows are ordered by
/// (parent_id, window_index); duplicates are rejected.
pub fn build_feature_table(segments: &[Segment]) -> Result<FeatureTable> {
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&a, &b| {
        (&segments[a].parent_id, segments[a].window_index)
            .cmp(&(&segments[b].parent_id, segments[b].window_index))
    });
    for pair in order.windows(2) {
        let (a, b) = (&segments[pair[0]], &segments[pair[1]]);
        if a.parent_id == b.parent_id && a.window_index == b.window_index {
            return Err(Error::Data(format!(
                "duplicate segment ({}, {})",
                a.parent_id, a.window_index
            )));
        }
    }

    let mut table = FeatureTable::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect())?;
    for &idx in &order {
        let segment = &segments[idx];
        let spectrum = fft_magnitude(segment)?;
        let features = extract_features(&spectrum)?;
        table.push_row(
            RowMeta {
                parent_id: segment.parent_id.clone(),
                window_index: segment.window_index,
                partition: segment.partition,
                pressure: segment.upstream_pressure,
                opening: segment.valve_opening,
                label: segment.label,
                degenerate: features.degenerate,
            },
            features.values().to_vec(),
        )?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FlowState, Partition};
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        let scale = a.abs().max(b.abs()).max(1.0);
        assert!((a - b).abs() / scale < tol, "{what}: {a} vs {b}");
    }

    #[test]
    fn hand_computed_one_to_five() {
        let f = features_of(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(f.mean, 3.0);
        assert_eq!(f.median, 3.0);
        assert_eq!(f.min, 1.0);
        assert_eq!(f.max, 5.0);
        // n=5: np = 1.25 and 3.75 are not integers, so Q1 = x_(2), Q3 = x_(4).
        assert_eq!(f.low_quartile, 2.0);
        assert_eq!(f.upper_quartile, 4.0);
        assert_eq!(f.iqr, 2.0);
        assert_close(f.std, 2.0f64.sqrt(), 1e-15, "std");
        assert_close(f.rms, 11.0f64.sqrt(), 1e-15, "rms");
        assert!(!f.degenerate);
    }

    #[test]
    fn constant_sequence_flags_degenerate_shape_statistics() {
        let f = features_of(&[2.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(f.mean, 2.0);
        assert_eq!(f.std, 0.0);
        assert_eq!(f.kurtosis, 0.0);
        assert_eq!(f.skewness, 0.0);
        assert_close(f.shape_factor, 1.0, 1e-12, "shape_factor");
        assert_close(f.clearance_factor, 1.0, 1e-12, "clearance_factor");
        assert_close(f.crest_factor, 1.0, 1e-12, "crest_factor");
        assert!(f.degenerate);
        // n=4: np = 1 and 3 are integers, so both quartiles average two
        // order statistics.
        assert_eq!(f.low_quartile, 2.0);
        assert_eq!(f.upper_quartile, 2.0);
    }

    #[test]
    fn all_zero_sequence_pins_ratio_features_to_one() {
        let f = features_of(&[0.0; 8]).unwrap();
        assert_eq!(f.shape_factor, 1.0);
        assert_eq!(f.clearance_factor, 1.0);
        assert_eq!(f.crest_factor, 1.0);
        assert_eq!(f.kurtosis, 0.0);
        assert_eq!(f.skewness, 0.0);
        assert!(f.degenerate);
    }

    #[test]
    fn normal_like_kurtosis_is_near_three_not_zero() {
        // The raw fourth standardized moment of a near-normal sample sits
        // near 3; this pins the moment convention.
        let mut state = 0xDEAD_BEEF_u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let samples: Vec<f64> = (0..20000)
            .map(|_| {
                let u1: f64 = next().max(1e-12);
                let u2: f64 = next();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let f = features_of(&samples).unwrap();
        assert!((f.kurtosis - 3.0).abs() < 0.2, "kurtosis {}", f.kurtosis);
        assert!(f.skewness.abs() < 0.2, "skewness {}", f.skewness);
    }

    #[test]
    fn too_short_input_is_rejected() {
        assert!(features_of(&[1.0, 2.0, 3.0]).is_err());
        assert!(features_of(&[1.0, 2.0, 3.0, 4.0]).is_ok());
    }

    #[test]
    fn build_feature_table_orders_rows_and_rejects_duplicates() {
        let seg = |id: &str, w: usize| Segment {
            parent_id: id.into(),
            window_index: w,
            samples: vec![1.0, -2.0, 3.0, 0.5, -1.5, 2.5, 0.0, 1.0],
            sample_rate: 8.0,
            upstream_pressure: 10.0,
            valve_opening: 100.0,
            label: FlowState::TurbulentFlow,
            partition: Partition::Train,
        };
        let table = build_feature_table(&[seg("b", 0), seg("a", 1), seg("a", 0)]).unwrap();
        assert_eq!(table.n_rows(), 3);
        assert_eq!(table.n_features(), 15);
        let keys: Vec<(String, usize)> = (0..3)
            .map(|r| (table.meta(r).parent_id.clone(), table.meta(r).window_index))
            .collect();
        assert_eq!(
            keys,
            vec![("a".into(), 0), ("a".into(), 1), ("b".into(), 0)]
        );

        assert!(build_feature_table(&[seg("a", 0), seg("a", 0)]).is_err());
        let empty = build_feature_table(&[]).unwrap();
        assert_eq!(empty.n_rows(), 0);
        assert_eq!(empty.n_features(), 15);
    }

    proptest! {
        #[test]
        fn order_statistics_sandwich_and_rms_identity(
            values in proptest::collection::vec(-100.0f64..100.0, 4..200),
        ) {
            let f = features_of(&values).unwrap();
            prop_assert!(f.min <= f.low_quartile);
            prop_assert!(f.low_quartile <= f.median);
            prop_assert!(f.median <= f.upper_quartile);
            prop_assert!(f.upper_quartile <= f.max);
            prop_assert!(f.iqr >= 0.0);
            prop_assert!(f.std >= 0.0);
            prop_assert!(f.rms >= 0.0);
            let lhs = f.rms * f.rms;
            let rhs = f.mean * f.mean + f.std * f.std;
            let scale = lhs.abs().max(rhs.abs()).max(1e-12);
            prop_assert!((lhs - rhs).abs() / scale < 1e-9);
        }

        #[test]
        fn scaling_is_equivariant_for_amplitudes_and_invariant_for_shapes(
            values in proptest::collection::vec(-50.0f64..50.0, 4..100),
            scale in 0.01f64..100.0,
        ) {
            let base = features_of(&values).unwrap();
            prop_assume!(!base.degenerate);
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let f = features_of(&scaled).unwrap();
            let close = |a: f64, b: f64| {
                let s = a.abs().max(b.abs()).max(1e-9);
                (a - b).abs() / s < 1e-9
            };
            for (ours, expect) in [
                (f.mean, base.mean * scale),
                (f.median, base.median * scale),
                (f.low_quartile, base.low_quartile * scale),
                (f.upper_quartile, base.upper_quartile * scale),
                (f.min, base.min * scale),
                (f.max, base.max * scale),
                (f.iqr, base.iqr * scale),
                (f.std, base.std * scale),
                (f.rms, base.rms * scale),
                (f.sra, base.sra * scale),
                (f.kurtosis, base.kurtosis),
                (f.skewness, base.skewness),
                (f.shape_factor, base.shape_factor),
                (f.clearance_factor, base.clearance_factor),
                (f.crest_factor, base.crest_factor),
            ] {
                prop_assert!(close(ours, expect), "{ours} vs {expect}");
            }
        }

        #[test]
        fn features_ignore_input_order(
            values in proptest::collection::vec(-50.0f64..50.0, 4..100),
            seed in 0u64..1000,
        ) {
            let mut shuffled = values.clone();
            // Fisher-Yates with a toy generator; any permutation works.
            let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).max(1);
            for i in (1..shuffled.len()).rev() {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                shuffled.swap(i, (s as usize) % (i + 1));
            }
            let a = features_of(&values).unwrap();
            let b = features_of(&shuffled).unwrap();
            for (x, y) in a.values().iter().zip(b.values().iter()) {
                prop_assert_eq!(x, y);
            }
        }

        #[test]
        fn ratio_features_exceed_one_on_non_negative_input(
            values in proptest::collection::vec(0.0f64..100.0, 4..100),
        ) {
            let f = features_of(&values).unwrap();
            prop_assert!(f.crest_factor >= 1.0 - 1e-12);
            prop_assert!(f.shape_factor >= 1.0 - 1e-12);
        }
    }
}
