//! Loss functions for boosted-tree training: binary logistic and softmax
//! cross-entropy, their first and second derivatives with respect to raw
//! scores, and prior-based base scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classification objective family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Single sigmoid score; exactly 2 classes, one tree per round.
    Binary,
    /// Softmax over one score per class; one tree per class per round.
    Multiclass,
}

/// Number of parallel score columns (and trees per round) for a task.
pub fn score_groups(task: Task, num_classes: usize) -> usize {
    match task {
        Task::Binary => 1,
        Task::Multiclass => num_classes,
    }
}

pub fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Softmax probabilities of one row of raw scores.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// First and second derivatives of the log-loss with respect to each raw
/// score. `scores` is row-major with `score_groups` columns per sample;
/// the outputs use the same layout.
///
/// Binary: p = sigmoid(s), g = p − y, h = p(1−p).
/// Multiclass: p = softmax(s), g_k = p_k − 1[y = k], h_k = p_k(1 − p_k).
pub fn grad_hess(
    task: Task,
    num_classes: usize,
    labels: &[usize],
    scores: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let groups = score_groups(task, num_classes);
    check_shapes(task, num_classes, labels, scores)?;
    let mut g = vec![0.0; scores.len()];
    let mut h = vec![0.0; scores.len()];
    match task {
        Task::Binary => {
            for (i, (&y, &s)) in labels.iter().zip(scores).enumerate() {
                let p = sigmoid(s);
                g[i] = p - y as f64;
                h[i] = p * (1.0 - p);
            }
        }
        Task::Multiclass => {
            for (i, &y) in labels.iter().enumerate() {
                let row = &scores[i * groups..(i + 1) * groups];
                let p = softmax(row);
                for k in 0..groups {
                    g[i * groups + k] = p[k] - f64::from(u8::from(y == k));
                    h[i * groups + k] = p[k] * (1.0 - p[k]);
                }
            }
        }
    }
    Ok((g, h))
}

/// Total (summed, not averaged) log-loss of raw scores against labels.
pub fn log_loss(task: Task, num_classes: usize, labels: &[usize], scores: &[f64]) -> Result<f64> {
    check_shapes(task, num_classes, labels, scores)?;
    let groups = score_groups(task, num_classes);
    let mut total = 0.0;
    match task {
        Task::Binary => {
            for (&y, &s) in labels.iter().zip(scores) {
                // -[y ln p + (1-y) ln(1-p)] in overflow-safe form.
                total += if y == 1 { softplus(-s) } else { softplus(s) };
            }
        }
        Task::Multiclass => {
            for (i, &y) in labels.iter().enumerate() {
                let row = &scores[i * groups..(i + 1) * groups];
                let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let z: f64 = row.iter().map(|s| (s - m).exp()).sum();
                total -= row[y] - m - z.ln();
            }
        }
    }
    Ok(total)
}

/// Initial raw scores before any trees: the log-odds of the class prior for
/// the binary task (clamped away from certainty), zeros for multiclass.
pub fn base_scores(task: Task, num_classes: usize, labels: &[usize]) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::Data("cannot derive base scores from zero labels".into()));
    }
    match task {
        Task::Binary => {
            let positives = labels.iter().filter(|&&y| y == 1).count();
            let p = (positives as f64 / labels.len() as f64).clamp(1e-6, 1.0 - 1e-6);
            Ok(vec![(p / (1.0 - p)).ln()])
        }
        Task::Multiclass => Ok(vec![0.0; num_classes]),
    }
}

fn check_shapes(
    task: Task,
    num_classes: usize,
    labels: &[usize],
    scores: &[f64],
) -> Result<()> {
    let groups = score_groups(task, num_classes);
    if scores.len() != labels.len() * groups {
        return Err(Error::Data(format!(
            "score matrix has {} entries, expected {} labels x {} groups",
            scores.len(),
            labels.len(),
            groups
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite raw score {bad}")));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    Ok(())
}
