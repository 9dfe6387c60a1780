//! Tabular container for feature rows with their provenance metadata.
//!
//! Storage is column-major: the ASFE stage appends thousands of derived
//! columns and the tree trainer scans one feature at a time, so columns are
//! the natural unit. Metadata (parent id, window index, partition, pressure,
//! opening, label, degenerate flag) rides alongside and is preserved through
//! CSV round trips.

use std::path::Path;

use crate::dataset::{FlowState, Partition};
use crate::error::{Error, Result};

/// Per-row provenance and label metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMeta {
    pub parent_id: String,
    pub window_index: usize,
    pub partition: Partition,
    pub pressure: f64,
    pub opening: f64,
    pub label: FlowState,
    /// True when feature extraction hit a degenerate input (zero variance
    /// or all-zero sequence) and used guarded values.
    pub degenerate: bool,
}

/// Rectangular table of named numeric feature columns plus row metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    feature_names: Vec<String>,
    columns: Vec<Vec<f64>>,
    meta: Vec<RowMeta>,
}

/// Metadata columns preceding the features in the CSV layout.
const META_HEADER: [&str; 6] = [
    "parent_id",
    "window_index",
    "partition",
    "pressure",
    "opening",
    "label",
];

/// Trailing flag column in the CSV layout.
const FLAG_HEADER: &str = "degenerate_flag";

impl FeatureTable {
    /// Empty table with the given feature schema. Names must be unique.
    pub fn new(feature_names: Vec<String>) -> Result<Self> {
        for (i, name) in feature_names.iter().enumerate() {
            if feature_names[..i].contains(name) {
                return Err(Error::Data(format!("duplicate feature column {name:?}")));
            }
        }
        let columns = vec![Vec::new(); feature_names.len()];
        Ok(FeatureTable {
            feature_names,
            columns,
            meta: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.meta.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn value(&self, row: usize, column: usize) -> f64 {
        self.columns[column][row]
    }

    /// Gather one row across all columns, in schema order.
    pub fn row_values(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    pub fn meta(&self, row: usize) -> &RowMeta {
        &self.meta[row]
    }

    pub fn metas(&self) -> &[RowMeta] {
        &self.meta
    }

    /// Append a row. The value count must match the schema and every value
    /// must be finite.
    pub fn push_row(&mut self, meta: RowMeta, values: Vec<f64>) -> Result<()> {
        if values.len() != self.feature_names.len() {
            return Err(Error::Data(format!(
                "row has {} values but the table has {} feature columns",
                values.len(),
                self.feature_names.len()
            )));
        }
        for (value, name) in values.iter().zip(&self.feature_names) {
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite value {value} in column {name:?} for row ({}, {})",
                    meta.parent_id, meta.window_index
                )));
            }
        }
        for (column, value) in self.columns.iter_mut().zip(values) {
            column.push(value);
        }
        self.meta.push(meta);
        Ok(())
    }

    /// Append a derived feature column. Length must equal the row count,
    /// the name must be new, and values must be finite.
    pub fn add_column(&mut self, name: String, values: Vec<f64>) -> Result<()> {
        if self.feature_names.contains(&name) {
            return Err(Error::Data(format!("duplicate feature column {name:?}")));
        }
        if values.len() != self.n_rows() {
            return Err(Error::Data(format!(
                "column {name:?} has {} values but the table has {} rows",
                values.len(),
                self.n_rows()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value {bad} in derived column {name:?}"
            )));
        }
        self.feature_names.push(name);
        self.columns.push(values);
        Ok(())
    }

    /// Keep only rows matching the predicate (used for train-only fitting).
    pub fn filtered(&self, keep: impl Fn(&RowMeta) -> bool) -> FeatureTable {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&r| keep(&self.meta[r])).collect();
        FeatureTable {
            feature_names: self.feature_names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            meta: rows.iter().map(|&r| self.meta[r].clone()).collect(),
        }
    }

    /// Serialize as CSV: metadata columns, then features, then the
    /// degenerate flag. Numbers use Rust's shortest round-trip formatting,
    /// so writing the same table twice is byte-identical.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| {
            Error::Data(format!("cannot write {}: {e}", path.display()))
        })?;
        let mut header: Vec<String> = META_HEADER.iter().map(|s| s.to_string()).collect();
        header.extend(self.feature_names.iter().cloned());
        header.push(FLAG_HEADER.to_string());
        writer
            .write_record(&header)
            .map_err(|e| Error::Data(format!("csv write failed: {e}")))?;

        for row in 0..self.n_rows() {
            let meta = &self.meta[row];
            let mut record: Vec<String> = vec![
                meta.parent_id.clone(),
                meta.window_index.to_string(),
                meta.partition.to_string(),
                format!("{}", meta.pressure),
                format!("{}", meta.opening),
                meta.label.to_string(),
            ];
            record.extend(self.columns.iter().map(|c| format!("{}", c[row])));
            record.push(if meta.degenerate { "1" } else { "0" }.to_string());
            writer
                .write_record(&record)
                .map_err(|e| Error::Data(format!("csv write failed: {e}")))?;
        }
        writer
            .flush()
            .map_err(|e| Error::io(path, e))
    }

    /// Read a table previously written by [`write_csv`].
    pub fn read_csv(path: &Path) -> Result<FeatureTable> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::parse(path, format!("cannot open csv: {e}")))?;

        let header = reader
            .headers()
            .map_err(|e| Error::parse(path, format!("bad header: {e}")))?
            .clone();
        let fields: Vec<&str> = header.iter().collect();
        if fields.len() < META_HEADER.len() + 1
            || fields[..META_HEADER.len()] != META_HEADER
            || fields[fields.len() - 1] != FLAG_HEADER
        {
            return Err(Error::parse(
                path,
                format!(
                    "unexpected header layout; want {:?} ... {:?}, got {:?}",
                    META_HEADER, FLAG_HEADER, fields
                ),
            ));
        }
        let feature_names: Vec<String> = fields[META_HEADER.len()..fields.len() - 1]
            .iter()
            .map(|s| s.to_string())
            .collect();

        let mut table = FeatureTable::new(feature_names)?;
        for (idx, record) in reader.records().enumerate() {
            let lineno = idx + 2;
            let record = record
                .map_err(|e| Error::parse(path, format!("line {lineno}: {e}")))?;
            if record.len() != fields.len() {
                return Err(Error::parse(
                    path,
                    format!(
                        "line {lineno}: expected {} fields, got {}",
                        fields.len(),
                        record.len()
                    ),
                ));
            }
            let field = |i: usize| record.get(i).unwrap();
            let parse_f64 = |i: usize| -> Result<f64> {
                field(i).parse().map_err(|_| {
                    Error::parse(
                        path,
                        format!("line {lineno}: not a number: {:?}", field(i)),
                    )
                })
            };
            let meta = RowMeta {
                parent_id: field(0).to_string(),
                window_index: field(1).parse().map_err(|_| {
                    Error::parse(
                        path,
                        format!("line {lineno}: bad window_index {:?}", field(1)),
                    )
                })?,
                partition: Partition::parse(field(2))
                    .map_err(|e| Error::parse(path, format!("line {lineno}: {e}")))?,
                pressure: parse_f64(3)?,
                opening: parse_f64(4)?,
                label: FlowState::parse(field(5))
                    .map_err(|e| Error::parse(path, format!("line {lineno}: {e}")))?,
                degenerate: match field(record.len() - 1) {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::parse(
                            path,
                            format!("line {lineno}: bad degenerate_flag {other:?}"),
                        ))
                    }
                },
            };
            let mut values = Vec::with_capacity(table.n_features());
            for i in META_HEADER.len()..record.len() - 1 {
                values.push(parse_f64(i)?);
            }
            table.push_row(meta, values)?;
        }
        Ok(table)
    }
}
