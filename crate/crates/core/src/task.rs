//! Classification task definitions: how flow states map onto class indices
//! for the binary (cavitation / no cavitation) and four-class (stages plus
//! merged non-cavitation) problems.

use serde::{Deserialize, Serialize};

use crate::dataset::{FlowState, BINARY_CLASS_NAMES, FOUR_CLASS_NAMES};
use crate::error::{Error, Result};
use crate::gbt::Task;
use crate::table::FeatureTable;

/// Which classification problem the pipeline is solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Cavitation (any stage) vs. no cavitation.
    #[default]
    Binary,
    /// Choked flow, constant, incipient, and merged non-cavitation.
    FourClass,
}

impl TaskKind {
    pub fn num_classes(self) -> usize {
        match self {
            TaskKind::Binary => 2,
            TaskKind::FourClass => 4,
        }
    }

    pub fn gbt_task(self) -> Task {
        match self {
            TaskKind::Binary => Task::Binary,
            TaskKind::FourClass => Task::Multiclass,
        }
    }

    /// Class index of a flow state under this task.
    pub fn class_index(self, label: FlowState) -> usize {
        match self {
            TaskKind::Binary => label.binary_class(),
            TaskKind::FourClass => label.four_class(),
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            TaskKind::Binary => BINARY_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            TaskKind::FourClass => FOUR_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Class indices for every row of a table, in row order.
    pub fn labels_for(self, table: &FeatureTable) -> Vec<usize> {
        table
            .metas()
            .iter()
            .map(|meta| self.class_index(meta.label))
            .collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Binary => "binary",
            TaskKind::FourClass => "four_class",
        }
    }

    pub fn parse(s: &str) -> Result<TaskKind> {
        match s {
            "binary" => Ok(TaskKind::Binary),
            "four_class" => Ok(TaskKind::FourClass),
            other => Err(Error::Config(format!(
                "unknown task {other:?}; expected \"binary\" or \"four_class\""
            ))),
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
