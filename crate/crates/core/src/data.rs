//! CSV ingestion, the seeded train/validation split, and z-score standardization.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Numeric behavioral features plus binary flags, one row per user.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    feature_names: Vec<String>,
    features: Matrix,
    labels: Vec<u8>,
    row_ids: Option<Vec<String>>,
}

impl DatasetTable {
    pub fn new(feature_names: Vec<String>, features: Matrix, labels: Vec<u8>) -> Result<Self> {
        if feature_names.len() != features.cols() {
            return Err(Error::shape(
                format!("{} feature names", feature_names.len()),
                format!("{} feature columns", features.cols()),
            ));
        }
        if labels.len() != features.rows() {
            return Err(Error::shape(
                format!("{} labels", labels.len()),
                format!("{} feature rows", features.rows()),
            ));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("label {bad} is not 0 or 1")));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate feature name {name:?}")));
            }
        }
        Ok(Self {
            feature_names,
            features,
            labels,
            row_ids: None,
        })
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_rows() {
            return Err(Error::shape(
                format!("{} row ids", ids.len()),
                format!("{} rows", self.n_rows()),
            ));
        }
        self.row_ids = Some(ids);
        Ok(self)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| f64::from(l)).collect()
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - pos, pos)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            row_ids: self
                .row_ids
                .as_ref()
                .map(|ids| indices.iter().map(|&i| ids[i].clone()).collect()),
        }
    }

    pub fn select_columns(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: indices
                .iter()
                .map(|&i| self.feature_names[i].clone())
                .collect(),
            features: self.features.select_columns(indices),
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
        }
    }

    pub(crate) fn with_features(&self, features: Matrix) -> Self {
        debug_assert_eq!(features.shape(), self.features.shape());
        Self {
            feature_names: self.feature_names.clone(),
            features,
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
        }
    }
}

/// Reads a comma-separated file with a header row.
///
/// Every column other than `label_column` and `exclude_columns` must parse as
/// a finite float. Lines starting with `#` are skipped. Error rows are
/// 1-based data rows (the header is not counted).
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    exclude_columns: &[String],
) -> Result<DatasetTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);

    let schema_err = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };

    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(schema_err("empty file".into()));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| schema_err(format!("label column {label_column:?} not found")))?;
    let retained: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && !exclude_columns.iter().any(|e| e == &headers[i]))
        .collect();
    let names: Vec<String> = retained.iter().map(|&i| headers[i].to_string()).collect();

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_no + 1;
        let cell = |column: usize, message: String| Error::Cell {
            path: path.to_path_buf(),
            row,
            column: headers.get(column).unwrap_or("?").to_string(),
            message,
        };
        if record.len() != headers.len() {
            return Err(cell(
                record.len().min(headers.len().saturating_sub(1)),
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        labels.push(match &record[label_idx] {
            "0" => 0,
            "1" => 1,
            other => return Err(cell(label_idx, format!("label {other:?} is not 0 or 1"))),
        });
        for &c in &retained {
            let raw = &record[c];
            if raw.is_empty() {
                return Err(cell(c, "missing value".into()));
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| cell(c, format!("{raw:?} is not a number")))?;
            if !v.is_finite() {
                return Err(cell(c, format!("{raw:?} is not finite")));
            }
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(schema_err("empty file: no data rows".into()));
    }
    let features = Matrix::new(labels.len(), names.len(), data)?;
    let table = DatasetTable::new(names, features, labels)?;
    let (neg, pos) = table.class_counts();
    log::info!(
        "loaded {}: {} rows x {} features ({} flagged, {} unflagged)",
        path.display(),
        table.n_rows(),
        table.n_features(),
        pos,
        neg
    );
    Ok(table)
}

/// Extra string column appended after the label when writing.
pub struct ExtraColumn<'a> {
    pub name: &'a str,
    pub values: &'a [String],
}

/// Writes the table in the dialect [`load_csv`] reads. Floats use Rust's
/// shortest round-trip representation, so reloading is exact.
pub fn write_csv(
    table: &DatasetTable,
    path: impl AsRef<Path>,
    label_column: &str,
    extra: &[ExtraColumn<'_>],
    comment: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = String::new();
    if let Some(c) = comment {
        buf.push_str("# ");
        buf.push_str(c);
        buf.push('\n');
    }
    let mut header: Vec<&str> = table.feature_names.iter().map(String::as_str).collect();
    header.push(label_column);
    header.extend(extra.iter().map(|e| e.name));
    buf.push_str(&header.join(","));
    buf.push('\n');
    for r in 0..table.n_rows() {
        for v in table.features.row(r) {
            buf.push_str(&v.to_string());
            buf.push(',');
        }
        buf.push_str(if table.labels[r] == 1 { "1" } else { "0" });
        for e in extra {
            buf.push(',');
            buf.push_str(&e.values[r]);
        }
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Validation size for `rows` at `fraction`, rounding half up.
pub fn validation_size(rows: usize, fraction: f64) -> usize {
    (rows as f64 * fraction + 0.5).floor() as usize
}

/// Seeded shuffle of `0..rows`; the first `validation_size` indices go to
/// validation. Both index lists are returned sorted.
pub fn split_indices(
    rows: usize,
    valid_fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction must lie in (0, 1), got {valid_fraction}"
        )));
    }
    let n_valid = validation_size(rows, valid_fraction);
    if n_valid == 0 || n_valid >= rows {
        return Err(Error::invalid(format!(
            "{rows} rows cannot be split at fraction {valid_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..rows).collect();
    rng.shuffle(&mut order);
    let mut valid = order[..n_valid].to_vec();
    let mut train = order[n_valid..].to_vec();
    valid.sort_unstable();
    train.sort_unstable();
    Ok((train, valid))
}

pub fn split_train_valid(
    table: &DatasetTable,
    valid_fraction: f64,
    rng: &mut Rng,
) -> Result<(DatasetTable, DatasetTable)> {
    let (train, valid) = split_indices(table.n_rows(), valid_fraction, rng)?;
    Ok((table.select_rows(&train), table.select_rows(&valid)))
}

/// Train-split feature statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeStats {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    /// 0 marks a constant column, which maps to all zeros.
    pub std: Vec<f64>,
}

impl StandardizeStats {
    pub fn fit(table: &DatasetTable) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::invalid("cannot standardize an empty table"));
        }
        let n = table.n_rows() as f64;
        let cols = table.n_features();
        let mut mean = vec![0.0; cols];
        let mut std = vec![0.0; cols];
        for c in 0..cols {
            let col = table.features.column(c);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            mean[c] = m;
            std[c] = if var.sqrt() <= 1e-12 * m.abs().max(1.0) {
                0.0
            } else {
                var.sqrt()
            };
        }
        Ok(Self {
            feature_names: table.feature_names.clone(),
            mean,
            std,
        })
    }

    pub fn apply(&self, table: &DatasetTable) -> Result<DatasetTable> {
        if table.feature_names != self.feature_names {
            return Err(Error::shape(
                format!("stats for {:?}", self.feature_names),
                format!("table with {:?}", table.feature_names),
            ));
        }
        let mut m = table.features.clone();
        let cols = m.cols();
        for (i, v) in m.data_mut().iter_mut().enumerate() {
            let c = i % cols;
            *v = if self.std[c] == 0.0 {
                0.0
            } else {
                (*v - self.mean[c]) / self.std[c]
            };
        }
        Ok(table.with_features(m))
    }
}

/// Fits z-score statistics on `train` and applies them to `train` and every
/// table in `others`.
pub fn standardize(
    train: &DatasetTable,
    others: &[&DatasetTable],
) -> Result<(DatasetTable, Vec<DatasetTable>, StandardizeStats)> {
    let stats = StandardizeStats::fit(train)?;
    let train_std = stats.apply(train)?;
    let others = others
        .iter()
        .map(|t| stats.apply(t))
        .collect::<Result<Vec<_>>>()?;
    Ok((train_std, others, stats))
}
