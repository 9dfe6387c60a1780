//! Exact-greedy tree growing against second-order gradients.
//!
//! Each tree is grown depth-first. A node receives, per feature, its row
//! ids pre-sorted by feature value (with the values carried alongside so
//! scans stay sequential); splitting partitions those lists stably, which
//! keeps them sorted without re-sorting. Split search enumerates midpoints
//! between adjacent distinct values and maximizes the second-order gain.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::table::FeatureTable;

use super::loss::{base_scores, grad_hess, log_loss, score_groups, Task};
use super::{GbtHyperParams, GbtModel, TreeNode, TreePlan};

/// Optimal leaf weight −G/(H+λ), the minimizer of G·w + ½(H+λ)w².
pub fn leaf_weight(g_sum: f64, h_sum: f64, lambda: f64) -> Result<f64> {
    let denom = h_sum + lambda;
    if denom <= 0.0 {
        return Err(Error::Numeric(format!(
            "leaf weight undefined: H + lambda = {denom} must be positive"
        )));
    }
    Ok(-g_sum / denom)
}

/// Objective reduction of a candidate split:
/// ½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ)] − γ.
/// A split is only worth taking when this is positive.
pub fn split_gain(
    g_left: f64,
    h_left: f64,
    g_right: f64,
    h_right: f64,
    lambda: f64,
    gamma: f64,
) -> Result<f64> {
    let dl = h_left + lambda;
    let dr = h_right + lambda;
    let dp = h_left + h_right + lambda;
    if dl <= 0.0 || dr <= 0.0 || dp <= 0.0 {
        return Err(Error::Numeric(format!(
            "split gain undefined: denominators ({dl}, {dr}, {dp}) must be positive"
        )));
    }
    let g_parent = g_left + g_right;
    Ok(0.5 * (g_left * g_left / dl + g_right * g_right / dr - g_parent * g_parent / dp) - gamma)
}

/// A (row, feature value) pair inside a node's per-feature sorted list.
pub type SortedEntry = (u32, f64);

/// Winning split for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Exact greedy split search over every feature of one node.
///
/// `node_sorted` holds, for each feature, the node's rows sorted ascending
/// by that feature's value. Candidate thresholds are midpoints between
/// adjacent distinct values; a candidate is kept only when both children
/// carry at least `min_child_hessian` total hessian, all gain denominators
/// are positive, and the gain exceeds zero. Ties are broken by lower
/// feature index, then lower threshold, which makes the search a total
/// order and training fully deterministic.
pub fn find_best_split(
    node_sorted: &[Vec<SortedEntry>],
    g: &[f64],
    h: &[f64],
    lambda: f64,
    gamma: f64,
    min_child_hessian: f64,
) -> Option<SplitCandidate> {
    let rows = node_sorted.first()?;
    if rows.len() < 2 {
        return None;
    }
    let mut total_g = 0.0;
    let mut total_h = 0.0;
    for &(row, _) in rows {
        total_g += g[row as usize];
        total_h += h[row as usize];
    }
    let parent_denom = total_h + lambda;
    if parent_denom <= 0.0 {
        return None;
    }
    let parent_term = total_g * total_g / parent_denom;

    let mut best: Option<SplitCandidate> = None;
    for (feature, sorted) in node_sorted.iter().enumerate() {
        let mut cum_g = 0.0;
        let mut cum_h = 0.0;
        let mut prev_value = f64::NAN;
        for (position, &(row, value)) in sorted.iter().enumerate() {
            if position > 0 && value > prev_value {
                let threshold = 0.5 * (prev_value + value);
                // Guard against the midpoint collapsing onto the lower
                // value for adjacent floats; rows equal to prev_value must
                // stay on the left of a `v < threshold` test.
                if threshold > prev_value
                    && cum_h >= min_child_hessian
                    && total_h - cum_h >= min_child_hessian
                {
                    let dl = cum_h + lambda;
                    let dr = total_h - cum_h + lambda;
                    if dl > 0.0 && dr > 0.0 {
                        let gr = total_g - cum_g;
                        let gain = 0.5
                            * (cum_g * cum_g / dl + gr * gr / dr - parent_term)
                            - gamma;
                        if gain > 0.0 {
                            let better = match &best {
                                None => true,
                                Some(b) => {
                                    gain > b.gain
                                        || (gain == b.gain
                                            && (feature < b.feature
                                                || (feature == b.feature
                                                    && threshold < b.threshold)))
                                }
                            };
                            if better {
                                best = Some(SplitCandidate {
                                    feature,
                                    threshold,
                                    gain,
                                });
                            }
                        }
                    }
                }
            }
            cum_g += g[row as usize];
            cum_h += h[row as usize];
            prev_value = value;
        }
    }
    best
}

/// Pre-sort every feature column once; trees partition these lists instead
/// of re-sorting. Ties order by row index so the result is deterministic.
pub fn presort_columns(table: &FeatureTable) -> Vec<Vec<SortedEntry>> {
    (0..table.n_features())
        .map(|f| {
            let column = table.column(f);
            let mut entries: Vec<SortedEntry> = column
                .iter()
                .enumerate()
                .map(|(row, &value)| (row as u32, value))
                .collect();
            entries.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            entries
        })
        .collect()
}

/// Scratch state threaded through one tree's growth.
struct TreeBuilder<'a> {
    g: &'a [f64],
    h: &'a [f64],
    lambda: f64,
    gamma: f64,
    min_child_hessian: f64,
    max_depth: usize,
    /// Per-feature accumulated split gain and split count for importance.
    gain_by_feature: &'a mut [f64],
    splits_by_feature: &'a mut [u64],
    /// Raw (unscaled) leaf weight assigned to each training row.
    row_weight: &'a mut [f64],
    leaf_count: usize,
    sum_sq_leaf_weight: f64,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, node_sorted: Vec<Vec<SortedEntry>>, depth: usize) -> Result<TreeNode> {
        let rows = &node_sorted[0];
        let mut g_sum = 0.0;
        let mut h_sum = 0.0;
        for &(row, _) in rows {
            g_sum += self.g[row as usize];
            h_sum += self.h[row as usize];
        }

        let candidate = if depth < self.max_depth {
            find_best_split(
                &node_sorted,
                self.g,
                self.h,
                self.lambda,
                self.gamma,
                self.min_child_hessian,
            )
        } else {
            None
        };

        match candidate {
            None => {
                // With λ > 0 the weight always exists; a saturated leaf with
                // λ = 0 and zero curvature carries no usable signal, so it
                // contributes nothing.
                let weight = if h_sum + self.lambda > 0.0 {
                    leaf_weight(g_sum, h_sum, self.lambda)?
                } else {
                    0.0
                };
                for &(row, _) in rows {
                    self.row_weight[row as usize] = weight;
                }
                self.leaf_count += 1;
                self.sum_sq_leaf_weight += weight * weight;
                Ok(TreeNode::Leaf { weight })
            }
            Some(split) => {
                self.gain_by_feature[split.feature] += split.gain;
                self.splits_by_feature[split.feature] += 1;

                // Stable partition of every per-feature list keeps each
                // side sorted. Membership is decided by the split feature's
                // value, so all lists agree on the row sets.
                let goes_left: Vec<bool> = {
                    let mut lookup = vec![false; self.row_weight.len()];
                    for &(row, value) in &node_sorted[split.feature] {
                        lookup[row as usize] = value < split.threshold;
                    }
                    lookup
                };
                let mut left_lists = Vec::with_capacity(node_sorted.len());
                let mut right_lists = Vec::with_capacity(node_sorted.len());
                for sorted in node_sorted {
                    let mut left = Vec::new();
                    let mut right = Vec::new();
                    for entry in sorted {
                        if goes_left[entry.0 as usize] {
                            left.push(entry);
                        } else {
                            right.push(entry);
                        }
                    }
                    left_lists.push(left);
                    right_lists.push(right);
                }

                let left = self.grow(left_lists, depth + 1)?;
                let right = self.grow(right_lists, depth + 1)?;
                Ok(TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    // Tables reject non-finite values, so no training row is
                    // ever missing; the default direction only matters for
                    // NaN probes at predict time.
                    default_left: true,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
        }
    }
}

/// Train a boosted forest on the numeric columns of `table` against
/// per-row class indices. `class_names[i]` names class index `i`.
///
/// Per round (and per class for the multiclass task): gradients and
/// hessians are computed at the current raw scores, one tree is grown by
/// exact greedy search, and scores advance by `learning_rate` times the
/// tree output. Leaf weights are stored unscaled; the learning rate is
/// applied wherever trees are accumulated.
pub fn train(
    table: &FeatureTable,
    labels: &[usize],
    class_names: &[String],
    params: &GbtHyperParams,
    task: Task,
) -> Result<GbtModel> {
    params.validate()?;
    match task {
        Task::Binary if params.num_classes != 2 => {
            return Err(Error::Config(format!(
                "binary task requires num_classes = 2, got {}",
                params.num_classes
            )));
        }
        Task::Multiclass if params.num_classes < 3 => {
            return Err(Error::Config(format!(
                "multiclass task requires num_classes >= 3, got {}; use the binary task \
                 for 2 classes",
                params.num_classes
            )));
        }
        _ => {}
    }
    let n = table.n_rows();
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 training rows, got {n}")));
    }
    if table.n_features() == 0 {
        return Err(Error::Data("training table has no feature columns".into()));
    }
    if labels.len() != n {
        return Err(Error::Data(format!(
            "{} labels for {} rows",
            labels.len(),
            n
        )));
    }
    if class_names.len() != params.num_classes {
        return Err(Error::Config(format!(
            "{} class names for {} classes",
            class_names.len(),
            params.num_classes
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= params.num_classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {} classes",
            params.num_classes
        )));
    }

    let groups = score_groups(task, params.num_classes);
    let base_score = base_scores(task, params.num_classes, labels)?;
    let mut model = GbtModel {
        task,
        params: params.clone(),
        feature_names: table.feature_names().to_vec(),
        class_names: class_names.to_vec(),
        base_score,
        forest: Vec::new(),
        feature_importance: zero_map(table.feature_names()),
        split_counts: table
            .feature_names()
            .iter()
            .map(|f| (f.clone(), 0u64))
            .collect(),
        train_objective: Vec::new(),
    };

    let distinct_labels = {
        let mut seen = vec![false; params.num_classes];
        labels.iter().for_each(|&y| seen[y] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct_labels < 2 {
        log::warn!("training labels are all one class; returning a base-score-only model");
        return Ok(model);
    }

    let sorted = presort_columns(table);
    let mut scores = vec![0.0; n * groups];
    for row in 0..n {
        for k in 0..groups {
            scores[row * groups + k] = model.base_score[k];
        }
    }

    let mut gain_by_feature = vec![0.0; table.n_features()];
    let mut splits_by_feature = vec![0u64; table.n_features()];
    let mut row_weight = vec![0.0; n];
    // Cumulative regularization Σ_t [γ·T_t + ½λ·Σ_j (η·w_j)²] over all
    // trees grown so far; added to the data loss for the per-round
    // objective trace. The effective leaf contribution to scores is η·w,
    // so that is what the L2 term must see for the objective to be the one
    // the updates actually descend.
    let mut omega = 0.0;

    for round in 0..params.num_rounds {
        let (g, h) = grad_hess(task, params.num_classes, labels, &scores)?;
        for class_index in 0..groups {
            let (g_class, h_class): (Vec<f64>, Vec<f64>) = if groups == 1 {
                (g.clone(), h.clone())
            } else {
                (
                    (0..n).map(|r| g[r * groups + class_index]).collect(),
                    (0..n).map(|r| h[r * groups + class_index]).collect(),
                )
            };
            let mut builder = TreeBuilder {
                g: &g_class,
                h: &h_class,
                lambda: params.lambda,
                gamma: params.gamma,
                min_child_hessian: params.min_child_hessian,
                max_depth: params.max_depth,
                gain_by_feature: &mut gain_by_feature,
                splits_by_feature: &mut splits_by_feature,
                row_weight: &mut row_weight,
                leaf_count: 0,
                sum_sq_leaf_weight: 0.0,
            };
            let root = builder.grow(sorted.clone(), 0)?;
            omega += params.gamma * builder.leaf_count as f64
                + 0.5
                    * params.lambda
                    * params.learning_rate
                    * params.learning_rate
                    * builder.sum_sq_leaf_weight;
            for row in 0..n {
                scores[row * groups + class_index] +=
                    params.learning_rate * row_weight[row];
            }
            model.forest.push(TreePlan {
                round,
                class_index,
                root,
            });
        }
        let data_loss = log_loss(task, params.num_classes, labels, &scores)?;
        model.train_objective.push(data_loss + omega);
    }

    for (feature, name) in table.feature_names().iter().enumerate() {
        *model.feature_importance.get_mut(name).unwrap() = gain_by_feature[feature];
        *model.split_counts.get_mut(name).unwrap() = splits_by_feature[feature];
    }
    Ok(model)
}

fn zero_map(names: &[String]) -> BTreeMap<String, f64> {
    names.iter().map(|n| (n.clone(), 0.0)).collect()
}
