//! Gradient-boosted decision trees trained against a second-order
//! approximation of the classification log-loss.
//!
//! The model is a forest of regression trees; each round fits one tree (or
//! one per class under softmax) to the current gradients and hessians, and
//! leaves carry the closed-form optimal weights −G/(H+λ). Regularization
//! follows the penalty γ·T + ½λ·Σw²: γ taxes each split's gain and λ damps
//! leaf weights.

pub mod loss;
pub mod train;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use loss::{base_scores, grad_hess, log_loss, score_groups, sigmoid, softmax, Task};
pub use train::{
    find_best_split, leaf_weight, presort_columns, split_gain, train, SplitCandidate,
    SortedEntry,
};

use crate::error::{Error, Result};
use crate::table::FeatureTable;

/// Training hyperparameters. All exposed through configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtHyperParams {
    pub num_rounds: usize,
    pub max_depth: usize,
    /// Shrinkage η applied to every tree's output, in (0, 1].
    pub learning_rate: f64,
    /// L2 penalty λ on leaf weights.
    pub lambda: f64,
    /// Per-leaf penalty γ; subtracted from every split gain.
    pub gamma: f64,
    /// Minimum total hessian required in each child of a split.
    pub min_child_hessian: f64,
    pub num_classes: usize,
    /// Recorded for provenance; training itself is deterministic and draws
    /// no random numbers.
    pub seed: u64,
}

impl Default for GbtHyperParams {
    fn default() -> Self {
        GbtHyperParams {
            num_rounds: 100,
            max_depth: 6,
            learning_rate: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_hessian: 1.0,
            num_classes: 2,
            seed: 0,
        }
    }
}

impl GbtHyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_rounds == 0 {
            return Err(Error::Config("num_rounds must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        for (name, value) in [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("min_child_hessian", self.min_child_hessian),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }
}

/// One node of a regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Where rows with a missing (NaN) feature value go at predict
        /// time. Training tables contain no NaN, so this is fixed.
        default_left: bool,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Raw (unscaled) output of this subtree for one gathered feature row.
    pub fn eval(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { weight } => *weight,
            TreeNode::Split {
                feature,
                threshold,
                default_left,
                left,
                right,
            } => {
                let value = row[*feature];
                let go_left = if value.is_nan() {
                    *default_left
                } else {
                    value < *threshold
                };
                if go_left {
                    left.eval(row)
                } else {
                    right.eval(row)
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// One tree with its position in the boosting schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePlan {
    pub round: usize,
    pub class_index: usize,
    pub root: TreeNode,
}

/// A trained forest plus everything needed to apply and inspect it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub task: Task,
    pub params: GbtHyperParams,
    /// Training schema; tree feature indices refer to this ordering.
    pub feature_names: Vec<String>,
    /// Names of the class indices used as labels.
    pub class_names: Vec<String>,
    /// Initial raw score per score group.
    pub base_score: Vec<f64>,
    pub forest: Vec<TreePlan>,
    /// Total split gain accumulated per feature (zero if never split on).
    pub feature_importance: BTreeMap<String, f64>,
    /// How many splits used each feature; a coarser importance measure
    /// kept alongside the gain-based one.
    pub split_counts: BTreeMap<String, u64>,
    /// Regularized training objective after each round: summed log-loss
    /// plus γ·(total leaves) + ½λ·Σ(effective leaf weights)². With γ = 0
    /// the trace is non-increasing; a positive γ charges every tree γ·T
    /// up front while the learning rate delivers only part of the loss
    /// reduction the split gains promised, so marginal late trees can
    /// raise it.
    pub train_objective: Vec<f64>,
}

impl GbtModel {
    /// Raw scores (one per score group) for a gathered feature row laid out
    /// in `feature_names` order.
    pub fn predict_raw(&self, row: &[f64]) -> Vec<f64> {
        let mut raw = self.base_score.clone();
        for plan in &self.forest {
            raw[plan.class_index] += self.params.learning_rate * plan.root.eval(row);
        }
        raw
    }

    /// Class probabilities for a gathered feature row; length equals
    /// `num_classes` and sums to 1.
    pub fn predict_probabilities_row(&self, row: &[f64]) -> Vec<f64> {
        let raw = self.predict_raw(row);
        match self.task {
            Task::Binary => {
                let p = sigmoid(raw[0]);
                vec![1.0 - p, p]
            }
            Task::Multiclass => softmax(&raw),
        }
    }

    /// Per-row class probabilities for every row of a table. The table may
    /// carry extra columns; every model feature must be present by name.
    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        let column_for: Vec<usize> = self
            .feature_names
            .iter()
            .map(|name| {
                table.column_index(name).ok_or_else(|| {
                    Error::Data(format!(
                        "table is missing model feature {name:?}; schemas do not match"
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(table.n_rows());
        let mut row = vec![0.0; self.feature_names.len()];
        for r in 0..table.n_rows() {
            for (slot, &column) in row.iter_mut().zip(&column_for) {
                *slot = table.value(r, column);
            }
            out.push(self.predict_probabilities_row(&row));
        }
        Ok(out)
    }

    /// Features ranked by total split gain, descending; ties broken by
    /// name ascending. Every training feature appears, including unused
    /// ones with gain 0.
    pub fn importance_ranking(&self) -> Vec<(String, f64)> {
        let mut ranked: Vec<(String, f64)> = self
            .feature_importance
            .iter()
            .map(|(name, &gain)| (name.clone(), gain))
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        ranked
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("model serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<GbtModel> {
        serde_json::from_str(text)
            .map_err(|e| Error::Data(format!("model deserialization failed: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<GbtModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GbtModel::from_json(&text)
            .map_err(|e| Error::parse(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FlowState, Partition};
    use crate::table::RowMeta;

    fn toy_meta(i: usize) -> RowMeta {
        RowMeta {
            parent_id: format!("row{i:04}"),
            window_index: 0,
            partition: Partition::Train,
            pressure: 10.0,
            opening: 100.0,
            label: FlowState::NoFlow,
            degenerate: false,
        }
    }

    fn table_of(columns: &[(&str, Vec<f64>)]) -> FeatureTable {
        let names: Vec<String> = columns.iter().map(|(n, _)| n.to_string()).collect();
        let n_rows = columns[0].1.len();
        let mut table = FeatureTable::new(names).unwrap();
        for r in 0..n_rows {
            let values: Vec<f64> = columns.iter().map(|(_, c)| c[r]).collect();
            table.push_row(toy_meta(r), values).unwrap();
        }
        table
    }

    fn binary_names() -> Vec<String> {
        vec!["neg".into(), "pos".into()]
    }

    #[test]
    fn hand_checked_leaf_weight_and_split_gain() {
        assert_eq!(leaf_weight(2.0, 3.0, 1.0).unwrap(), -0.5);
        assert_eq!(leaf_weight(0.0, 5.0, 0.5).unwrap(), 0.0);
        assert!(leaf_weight(1.0, 0.0, 0.0).is_err());

        let gain = split_gain(1.0, 1.0, -1.0, 1.0, 0.0, 0.0).unwrap();
        assert!((gain - 1.0).abs() < 1e-15);
        let gain = split_gain(0.0, 1.0, 0.0, 1.0, 0.0, 0.7).unwrap();
        assert!((gain + 0.7).abs() < 1e-15);
        assert!(split_gain(1.0, 0.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn separable_stump_finds_the_gap_and_fits_perfectly() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let labels: Vec<usize> = x.iter().map(|&v| usize::from(v > 0.0)).collect();
        let table = table_of(&[("x", x.clone())]);
        let params = GbtHyperParams {
            num_rounds: 1,
            max_depth: 1,
            learning_rate: 1.0,
            lambda: 1.0,
            gamma: 0.0,
            min_child_hessian: 0.0,
            num_classes: 2,
            seed: 0,
        };
        let model = train::train(&table, &labels, &binary_names(), &params, Task::Binary).unwrap();
        assert_eq!(model.forest.len(), 1);
        match &model.forest[0].root {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                // The crossing points are -0.5 and 0.5.
                assert!((*threshold - 0.0).abs() < 1e-12, "threshold {threshold}");
            }
            other => panic!("expected a stump, got {other:?}"),
        }
        let probs = model.predict(&table).unwrap();
        for (p, &y) in probs.iter().zip(&labels) {
            assert_eq!(usize::from(p[1] > 0.5), y);
        }
    }

    #[test]
    fn xor_needs_depth_two_and_gets_there() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let a = if i % 2 == 0 { -1.0 } else { 1.0 };
            let b = if (i / 2) % 2 == 0 { -1.0 } else { 1.0 };
            // Small deterministic jitter so values within a corner differ.
            let jitter = (i as f64) * 1e-3;
            xs.push(a + jitter);
            ys.push(b - jitter);
            labels.push(usize::from((a > 0.0) != (b > 0.0)));
        }
        let table = table_of(&[("x", xs), ("y", ys)]);
        let params = GbtHyperParams {
            num_rounds: 20,
            max_depth: 2,
            learning_rate: 0.5,
            lambda: 1.0,
            gamma: 0.0,
            min_child_hessian: 0.5,
            num_classes: 2,
            seed: 0,
        };
        let model = train::train(&table, &labels, &binary_names(), &params, Task::Binary).unwrap();
        let probs = model.predict(&table).unwrap();
        let correct = probs
            .iter()
            .zip(&labels)
            .filter(|(p, &y)| usize::from(p[1] > 0.5) == y)
            .count();
        assert_eq!(correct, labels.len(), "XOR should be fit exactly");
    }

    #[test]
    fn training_is_deterministic() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
        let z: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).cos()).collect();
        let labels: Vec<usize> = (0..30).map(|i| usize::from(i % 3 == 0)).collect();
        let table = table_of(&[("x", x), ("z", z)]);
        let params = GbtHyperParams {
            num_rounds: 10,
            max_depth: 3,
            min_child_hessian: 0.1,
            ..GbtHyperParams::default()
        };
        let a = train::train(&table, &labels, &binary_names(), &params, Task::Binary).unwrap();
        let b = train::train(&table, &labels, &binary_names(), &params, Task::Binary).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn high_gamma_prunes_everything_to_the_base_score() {
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        let labels: Vec<usize> = (0..16).map(|i| usize::from(i >= 8)).collect();
        let table = table_of(&[("x", x)]);
        let params = GbtHyperParams {
            num_rounds: 5,
            gamma: 1e6,
            min_child_hessian: 0.0,
            ..GbtHyperParams::default()
        };
        let model = train::train(&table, &labels, &binary_names(), &params, Task::Binary).unwrap();
        for plan in &model.forest {
            assert_eq!(plan.root.leaf_count(), 1, "gamma should prune every split");
        }
        let probs = model.predict(&table).unwrap();
        let expected = sigmoid(model.base_score[0]);
        for p in probs {
            assert!((p[1] - expected).abs() < 1e-12);
        }
        assert!(model.importance_ranking().iter().all(|(_, g)| *g == 0.0));
    }

    #[test]
    fn importance_prefers_the_informative_feature() {
        let n = 60;
        let informative: Vec<f64> = (0..n).map(|i| f64::from(i)).collect();
        let noise: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 17) as f64).collect();
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        let table = table_of(&[("informative", informative), ("noise", noise)]);
        let params = GbtHyperParams {
            num_rounds: 10,
            max_depth: 3,
            ..GbtHyperParams::default()
        };
        let model = train::train(
            &table,
            &labels,
            &binary_names(),
            &params,
            Task::Binary,
        )
        .unwrap();
        let ranking = model.importance_ranking();
        assert_eq!(ranking[0].0, "informative");
        assert!(ranking[0].1 > ranking[1].1);
    }

    #[test]
    fn multiclass_forest_has_one_tree_per_class_per_round() {
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        let labels: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let table = table_of(&[("x", x)]);
        let params = GbtHyperParams {
            num_rounds: 4,
            num_classes: 3,
            min_child_hessian: 0.1,
            ..GbtHyperParams::default()
        };
        let names = vec!["a".into(), "b".into(), "c".into()];
        let model = train::train(&table, &labels, &names, &params, Task::Multiclass).unwrap();
        assert_eq!(model.forest.len(), 4 * 3);
        for (i, plan) in model.forest.iter().enumerate() {
            assert_eq!(plan.round, i / 3);
            assert_eq!(plan.class_index, i % 3);
        }
        let probs = model.predict(&table).unwrap();
        let correct = probs
            .iter()
            .zip(&labels)
            .filter(|(p, &y)| {
                let argmax = p
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                argmax == y
            })
            .count();
        assert_eq!(correct, 30);
        for p in &probs {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_trace_is_monotonically_non_increasing() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let z: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos() * 2.0).collect();
        let labels: Vec<usize> = x
            .iter()
            .zip(&z)
            .map(|(a, b)| usize::from(a + b > 0.0))
            .collect();
        let table = table_of(&[("x", x), ("z", z)]);
        // γ stays 0: a positive per-leaf charge plus a damped learning
        // rate makes marginal trees net-positive, which is expected and
        // documented on the field.
        let params = GbtHyperParams {
            num_rounds: 40,
            max_depth: 3,
            ..GbtHyperParams::default()
        };
        let model = train::train(&table, &labels, &binary_names(), &params, Task::Binary).unwrap();
        assert_eq!(model.train_objective.len(), 40);
        for pair in model.train_objective.windows(2) {
            let slack = 1e-9 * pair[0].abs().max(1.0);
            assert!(
                pair[1] <= pair[0] + slack,
                "objective rose: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn all_one_label_training_returns_base_only_model() {
        let table = table_of(&[("x", vec![1.0, 2.0, 3.0])]);
        let model = train::train(
            &table,
            &[1, 1, 1],
            &binary_names(),
            &GbtHyperParams::default(),
            Task::Binary,
        )
        .unwrap();
        assert!(model.forest.is_empty());
        let probs = model.predict(&table).unwrap();
        for p in probs {
            assert!(p[1] > 0.99, "prior should dominate, got {}", p[1]);
        }
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let table = table_of(&[("x", vec![0.0, 1.0, 2.0, 3.0])]);
        let labels = vec![0, 0, 1, 1];
        let params = GbtHyperParams {
            min_child_hessian: 0.0,
            num_rounds: 2,
            ..GbtHyperParams::default()
        };
        let model = train::train(&table, &labels, &binary_names(), &params, Task::Binary).unwrap();
        let other = table_of(&[("y", vec![0.0, 1.0])]);
        let err = model.predict(&other).unwrap_err();
        assert!(err.to_string().contains("missing model feature"));
    }

    #[test]
    fn json_round_trip_reproduces_predictions_exactly() {
        let x: Vec<f64> = (0..24).map(|i| (i as f64).sqrt() - 2.0).collect();
        let z: Vec<f64> = (0..24).map(|i| ((i * 7) % 5) as f64).collect();
        let labels: Vec<usize> = (0..24).map(|i| usize::from((i % 4) < 2)).collect();
        let table = table_of(&[("x", x), ("z", z)]);
        let params = GbtHyperParams {
            num_rounds: 8,
            max_depth: 4,
            min_child_hessian: 0.2,
            ..GbtHyperParams::default()
        };
        let model = train::train(&table, &labels, &binary_names(), &params, Task::Binary).unwrap();
        let reloaded = GbtModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, reloaded);
        let a = model.predict(&table).unwrap();
        let b = reloaded.predict(&table).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            for (x, y) in pa.iter().zip(pb) {
                assert_eq!(x.to_bits(), y.to_bits(), "bit-exact round trip");
            }
        }
    }

    #[test]
    fn hyperparameter_bounds_are_enforced() {
        let mut p = GbtHyperParams::default();
        p.learning_rate = 0.0;
        assert!(p.validate().is_err());
        p.learning_rate = 1.5;
        assert!(p.validate().is_err());
        p = GbtHyperParams { lambda: -0.1, ..GbtHyperParams::default() };
        assert!(p.validate().is_err());
        p = GbtHyperParams { num_classes: 1, ..GbtHyperParams::default() };
        assert!(p.validate().is_err());
        assert!(GbtHyperParams::default().validate().is_ok());

        // Task / class-count consistency.
        let table = table_of(&[("x", vec![0.0, 1.0])]);
        let bad = GbtHyperParams { num_classes: 3, ..GbtHyperParams::default() };
        assert!(train::train(&table, &[0, 1], &binary_names(), &bad, Task::Binary).is_err());
        let bad2 = GbtHyperParams { num_classes: 2, ..GbtHyperParams::default() };
        assert!(
            train::train(&table, &[0, 1], &binary_names(), &bad2, Task::Multiclass).is_err()
        );
    }
}
