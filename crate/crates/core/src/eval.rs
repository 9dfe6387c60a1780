//! Classification metrics: confusion matrices, per-class and macro
//! precision/recall/F1, ROC curves with trapezoidal AUC, and Pearson
//! correlation between fixed-length sub-sequences of a signal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::TaskKind;

/// Square contingency table of actual vs predicted classes.
/// `counts[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// One-vs-rest scores for a single class. Whenever a score's denominator
/// is zero the score is reported as 0 and `degenerate` is set, so the
/// convention is visible instead of silent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class_name: String,
    /// Number of rows whose actual class this is.
    pub support: u64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

/// Unweighted means of the per-class scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::Config(
                "a confusion matrix needs at least two classes".into(),
            ));
        }
        let n = class_names.len();
        Ok(ConfusionMatrix {
            class_names,
            counts: vec![vec![0; n]; n],
        })
    }

    pub fn from_pairs(
        class_names: Vec<String>,
        actual: &[usize],
        predicted: &[usize],
    ) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::Data(format!(
                "actual and predicted lengths differ: {} vs {}",
                actual.len(),
                predicted.len()
            )));
        }
        let mut matrix = ConfusionMatrix::new(class_names)?;
        for (&a, &p) in actual.iter().zip(predicted) {
            matrix.record(a, p)?;
        }
        Ok(matrix)
    }

    pub fn record(&mut self, actual: usize, predicted: usize) -> Result<()> {
        let n = self.class_names.len();
        if actual >= n || predicted >= n {
            return Err(Error::Data(format!(
                "class index out of range: actual {actual}, predicted {predicted}, {n} classes"
            )));
        }
        self.counts[actual][predicted] += 1;
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Fraction of rows on the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.n_classes()).map(|i| self.counts[i][i]).sum();
        trace as f64 / total as f64
    }

    pub fn class_scores(&self) -> Vec<ClassScores> {
        (0..self.n_classes())
            .map(|k| {
                let tp = self.counts[k][k];
                let fp: u64 = (0..self.n_classes())
                    .filter(|&a| a != k)
                    .map(|a| self.counts[a][k])
                    .sum();
                let fn_: u64 = (0..self.n_classes())
                    .filter(|&p| p != k)
                    .map(|p| self.counts[k][p])
                    .sum();
                let mut degenerate = false;
                let mut ratio = |num: u64, den: u64| {
                    if den == 0 {
                        degenerate = true;
                        0.0
                    } else {
                        num as f64 / den as f64
                    }
                };
                let precision = ratio(tp, tp + fp);
                let recall = ratio(tp, tp + fn_);
                let f1 = if precision + recall == 0.0 {
                    degenerate = true;
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScores {
                    class_name: self.class_names[k].clone(),
                    support: tp + fn_,
                    true_positives: tp,
                    false_positives: fp,
                    false_negatives: fn_,
                    precision,
                    recall,
                    f1,
                    degenerate,
                }
            })
            .collect()
    }

    pub fn macro_scores(&self) -> MacroScores {
        let scores = self.class_scores();
        let n = scores.len() as f64;
        MacroScores {
            precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
            f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
        }
    }

    /// Accuracy plus per-class and macro scores; errors on an empty
    /// matrix, where none of them are defined.
    pub fn scores(&self) -> Result<EvalScores> {
        if self.total() == 0 {
            return Err(Error::Data(
                "cannot compute scores from an empty confusion matrix".into(),
            ));
        }
        Ok(EvalScores {
            accuracy: self.accuracy(),
            per_class: self.class_scores(),
            macro_avg: self.macro_scores(),
        })
    }
}

/// Aggregated scores of a non-empty confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_avg: MacroScores,
}

/// A vertex of a ROC curve. The opening (0, 0) vertex has no threshold;
/// every other vertex records the score at which it was reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve and AUC for binary labels (0 = negative, 1 = positive) under
/// a descending sweep over the distinct scores. Rows sharing a score
/// enter together, so ties contribute a single diagonal segment and the
/// trapezoidal AUC equals the pair-counting value
/// (concordant + ties/2) / (positives * negatives).
pub fn roc_auc_binary(labels: &[usize], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::Data(format!(
            "labels and scores lengths differ: {} vs {}",
            labels.len(),
            scores.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Data("cannot build a ROC curve from no rows".into()));
    }
    for (i, &label) in labels.iter().enumerate() {
        if label > 1 {
            return Err(Error::Data(format!(
                "binary ROC labels must be 0 or 1, got {label} at row {i}"
            )));
        }
    }
    for (i, &score) in scores.iter().enumerate() {
        if !score.is_finite() {
            return Err(Error::Numeric(format!(
                "score at row {i} is not finite: {score}"
            )));
        }
    }
    let positives = labels.iter().filter(|&&l| l == 1).count() as f64;
    let negatives = labels.len() as f64 - positives;
    if positives == 0.0 || negatives == 0.0 {
        return Err(Error::Data(
            "ROC needs at least one positive and one negative row".into(),
        ));
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![RocPoint {
        threshold: None,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut rank = 0;
    while rank < order.len() {
        let threshold = scores[order[rank]];
        while rank < order.len() && scores[order[rank]] == threshold {
            match labels[order[rank]] {
                1 => tp += 1,
                _ => fp += 1,
            }
            rank += 1;
        }
        points.push(RocPoint {
            threshold: Some(threshold),
            fpr: fp as f64 / negatives,
            tpr: tp as f64 / positives,
        });
    }

    let auc = points
        .windows(2)
        .map(|pair| (pair[1].fpr - pair[0].fpr) * (pair[0].tpr + pair[1].tpr) * 0.5)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Micro-averaged multiclass ROC: the n x K probability matrix and the
/// one-hot membership matrix are flattened row-major into a single binary
/// problem, which then follows the binary sweep.
pub fn roc_auc_multiclass(labels: &[usize], probabilities: &[Vec<f64>]) -> Result<RocCurve> {
    if labels.len() != probabilities.len() {
        return Err(Error::Data(format!(
            "labels and probability rows differ: {} vs {}",
            labels.len(),
            probabilities.len()
        )));
    }
    if probabilities.is_empty() {
        return Err(Error::Data("cannot build a ROC curve from no rows".into()));
    }
    let num_classes = probabilities[0].len();
    if num_classes < 2 {
        return Err(Error::Data(format!(
            "probability rows must cover at least two classes, got {num_classes}"
        )));
    }
    let mut flat_labels = Vec::with_capacity(labels.len() * num_classes);
    let mut flat_scores = Vec::with_capacity(labels.len() * num_classes);
    for (i, (row, &label)) in probabilities.iter().zip(labels).enumerate() {
        if row.len() != num_classes {
            return Err(Error::Data(format!(
                "probability row {i} has {} entries, expected {num_classes}",
                row.len()
            )));
        }
        if label >= num_classes {
            return Err(Error::Data(format!(
                "label {label} at row {i} is out of range for {num_classes} classes"
            )));
        }
        let sum: f64 = row.iter().sum();
        if !(sum - 1.0).abs().is_finite() || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Numeric(format!(
                "probability row {i} sums to {sum}, expected 1 within 1e-9"
            )));
        }
        for (k, &p) in row.iter().enumerate() {
            flat_labels.push(usize::from(k == label));
            flat_scores.push(p);
        }
    }
    roc_auc_binary(&flat_labels, &flat_scores)
}

/// Index of the largest probability in each row; the first index wins a
/// tie.
pub fn argmax_labels(probabilities: &[Vec<f64>]) -> Result<Vec<usize>> {
    probabilities
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.is_empty() {
                return Err(Error::Data(format!("probability row {i} is empty")));
            }
            let mut best = 0;
            for (k, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = k;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Band of off-diagonal Pearson correlations observed across a set of
/// sub-sequence correlation matrices. Reported for inspection only; no
/// range is asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub window: usize,
    pub records: usize,
    pub min_off_diagonal: f64,
    pub max_off_diagonal: f64,
    pub mean_off_diagonal: f64,
}

impl CorrelationSummary {
    /// Summarize one or more correlation matrices; None when no matrix
    /// has an off-diagonal entry.
    pub fn from_matrices(window: usize, matrices: &[Vec<Vec<f64>>]) -> Option<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut count = 0u64;
        for matrix in matrices {
            for (i, row) in matrix.iter().enumerate() {
                for (j, &value) in row.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    lo = lo.min(value);
                    hi = hi.max(value);
                    sum += value;
                    count += 1;
                }
            }
        }
        if count == 0 {
            return None;
        }
        Some(CorrelationSummary {
            window,
            records: matrices.len(),
            min_off_diagonal: lo,
            max_off_diagonal: hi,
            mean_off_diagonal: sum / count as f64,
        })
    }
}

/// Everything one evaluation run produces: the confusion matrix, its
/// derived scores, the ROC curve, and (optionally) the sub-sequence
/// correlation band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskKind,
    pub class_names: Vec<String>,
    pub rows: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassScores>,
    pub macro_avg: MacroScores,
    pub auc: f64,
    pub roc: RocCurve,
    /// How the aggregate numbers were formed, stated so readers need not
    /// guess the convention.
    pub averaging_note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationSummary>,
}

/// Score a prediction set: predicted classes are the per-row argmax, the
/// ROC is binary on the positive-class probability for two-class tasks
/// and micro-averaged over the one-hot flattening otherwise.
pub fn evaluate(
    task: TaskKind,
    actual: &[usize],
    probabilities: &[Vec<f64>],
) -> Result<EvalReport> {
    if actual.len() != probabilities.len() {
        return Err(Error::Data(format!(
            "labels and probability rows differ: {} vs {}",
            actual.len(),
            probabilities.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Data("cannot evaluate an empty prediction set".into()));
    }
    let class_names = task.class_names();
    for (i, row) in probabilities.iter().enumerate() {
        if row.len() != class_names.len() {
            return Err(Error::Data(format!(
                "probability row {i} has {} entries, expected {}",
                row.len(),
                class_names.len()
            )));
        }
    }
    let predicted = argmax_labels(probabilities)?;
    let confusion = ConfusionMatrix::from_pairs(class_names.clone(), actual, &predicted)?;
    let scores = confusion.scores()?;
    let roc = match task.num_classes() {
        2 => {
            let positive: Vec<f64> = probabilities.iter().map(|row| row[1]).collect();
            roc_auc_binary(actual, &positive)?
        }
        _ => roc_auc_multiclass(actual, probabilities)?,
    };
    Ok(EvalReport {
        task,
        class_names,
        rows: actual.len() as u64,
        accuracy: scores.accuracy,
        confusion,
        per_class: scores.per_class,
        macro_avg: scores.macro_avg,
        auc: roc.auc,
        roc,
        averaging_note: "macro scores are unweighted class means; multiclass AUC is \
                         micro-averaged by one-hot flattening"
            .into(),
        correlation: None,
    })
}

/// Pearson correlation matrix between the consecutive non-overlapping
/// `window`-sample sub-sequences of a signal; any trailing remainder is
/// ignored. Errors if a sub-sequence has zero variance, naming it.
pub fn subsequence_correlation(record: &[f64], window: usize) -> Result<Vec<Vec<f64>>> {
    if window == 0 {
        return Err(Error::Config("correlation window must be positive".into()));
    }
    if record.len() < window {
        return Err(Error::Config(format!(
            "record of {} samples has no complete window of {window}",
            record.len()
        )));
    }
    let segments: Vec<&[f64]> = record.chunks_exact(window).collect();
    let mut centered = Vec::with_capacity(segments.len());
    let mut norms = Vec::with_capacity(segments.len());
    for (i, segment) in segments.iter().enumerate() {
        let mean = segment.iter().sum::<f64>() / window as f64;
        let values: Vec<f64> = segment.iter().map(|&x| x - mean).collect();
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Numeric(format!(
                "sub-sequence {i} has zero variance; correlation is undefined"
            )));
        }
        centered.push(values);
        norms.push(norm);
    }
    let m = segments.len();
    let mut matrix = vec![vec![0.0; m]; m];
    for i in 0..m {
        matrix[i][i] = 1.0;
        for j in (i + 1)..m {
            let dot: f64 = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum();
            let r = dot / (norms[i] * norms[j]);
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    Ok(matrix)
}

/// Smallest and largest off-diagonal entries of a correlation matrix;
/// None when the matrix is 1 x 1.
pub fn off_diagonal_range(matrix: &[Vec<f64>]) -> Option<(f64, f64)> {
    let mut range: Option<(f64, f64)> = None;
    for (i, row) in matrix.iter().enumerate() {
        for (j, &value) in row.iter().enumerate() {
            if i == j {
                continue;
            }
            range = Some(match range {
                None => (value, value),
                Some((lo, hi)) => (lo.min(value), hi.max(value)),
            });
        }
    }
    range
}
