//! Class-labeled tabular data: ingestion, validation, encoding and
//! one-vs-all partitioning.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VaxError};
use crate::scalar::{cmp, Scalar};

/// Field values treated as missing during ingestion (case-insensitive).
pub const MISSING_TOKENS: &[&str] = &["", "na", "n/a", "nan", "null", "none", "?"];

/// Column name used for instance ids in the canonical CSV export.
pub const CANONICAL_ID_COLUMN: &str = "instance_id";

/// An immutable, validated, ambiguity-free class-labeled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    values: Vec<T>,
    n_rows: usize,
    variable_names: Vec<String>,
    variable_ranges: Vec<(T, T)>,
    labels: Vec<usize>,
    classes: Vec<String>,
    instance_ids: Vec<String>,
    encodings: Vec<Option<Vec<String>>>,
    label_name: String,
    distinct: Vec<Vec<T>>,
}

/// Raw material for [`Dataset::from_parts`]. Optional fields fall back to
/// generated defaults (`v1..vM`, row indices, `class`).
#[derive(Debug, Clone)]
pub struct DatasetParts<T> {
    pub rows: Vec<Vec<T>>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
    pub variable_names: Option<Vec<String>>,
    pub instance_ids: Option<Vec<String>>,
    pub encodings: Option<Vec<Option<Vec<String>>>>,
    pub label_name: Option<String>,
}

impl<T> DatasetParts<T> {
    pub fn new(rows: Vec<Vec<T>>, labels: Vec<usize>, classes: Vec<String>) -> Self {
        DatasetParts {
            rows,
            labels,
            classes,
            variable_names: None,
            instance_ids: None,
            encodings: None,
            label_name: None,
        }
    }
}

/// One-vs-all split of the rows for a single class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    pub class_id: usize,
    pub members: Vec<usize>,
    pub complement: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn from_rows(rows: Vec<Vec<T>>, labels: Vec<usize>, classes: Vec<String>) -> Result<Self> {
        Self::from_parts(DatasetParts::new(rows, labels, classes))
    }

    pub fn from_parts(parts: DatasetParts<T>) -> Result<Self> {
        let DatasetParts {
            rows,
            labels,
            classes,
            variable_names,
            instance_ids,
            encodings,
            label_name,
        } = parts;
        let invalid = |msg: String| Err(VaxError::InvalidDataset(msg));

        let n_rows = rows.len();
        if n_rows < 2 {
            return invalid(format!("need at least 2 rows, got {n_rows}"));
        }
        let n_vars = rows[0].len();
        if n_vars == 0 {
            return invalid("need at least one variable".into());
        }
        if classes.len() < 2 {
            return Err(VaxError::TooFewClasses(classes.len()));
        }
        if labels.len() != n_rows {
            return invalid(format!("{} labels for {n_rows} rows", labels.len()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return invalid(format!("label {bad} references an undeclared class"));
        }
        let mut seen = vec![false; classes.len()];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return invalid(format!("class `{}` has no rows", classes[empty]));
        }

        let mut values = Vec::with_capacity(n_rows * n_vars);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_vars {
                return invalid(format!("row {i} has {} values, expected {n_vars}", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return invalid(format!("row {i} contains a non-finite value"));
            }
            values.extend_from_slice(row);
        }

        let ambiguous = ambiguous_rows(&rows, &labels);
        if !ambiguous.is_empty() {
            return Err(VaxError::AmbiguousRows(ambiguous.len()));
        }

        let variable_names =
            variable_names.unwrap_or_else(|| (1..=n_vars).map(|i| format!("v{i}")).collect());
        if variable_names.len() != n_vars {
            return invalid(format!("{} variable names for {n_vars} variables", variable_names.len()));
        }
        let instance_ids =
            instance_ids.unwrap_or_else(|| (0..n_rows).map(|i| i.to_string()).collect());
        if instance_ids.len() != n_rows {
            return invalid(format!("{} instance ids for {n_rows} rows", instance_ids.len()));
        }
        let unique: HashSet<&String> = instance_ids.iter().collect();
        if unique.len() != n_rows {
            return invalid("instance ids are not unique".into());
        }
        let encodings = encodings.unwrap_or_else(|| vec![None; n_vars]);
        if encodings.len() != n_vars {
            return invalid(format!("{} encodings for {n_vars} variables", encodings.len()));
        }

        let mut variable_ranges = Vec::with_capacity(n_vars);
        let mut distinct = Vec::with_capacity(n_vars);
        for v in 0..n_vars {
            let mut column: Vec<T> = rows.iter().map(|r| r[v]).collect();
            column.sort_by(|a, b| cmp(*a, *b));
            column.dedup();
            variable_ranges.push((column[0], column[column.len() - 1]));
            distinct.push(column);
        }

        Ok(Dataset {
            values,
            n_rows,
            variable_names,
            variable_ranges,
            labels,
            classes,
            instance_ids,
            encodings,
            label_name: label_name.unwrap_or_else(|| "class".to_string()),
            distinct,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_vars(&self) -> usize {
        self.variable_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let m = self.n_vars();
        &self.values[i * m..(i + 1) * m]
    }

    #[inline]
    pub fn value(&self, row: usize, var: usize) -> T {
        self.values[row * self.n_vars() + var]
    }

    pub fn column(&self, var: usize) -> Vec<T> {
        (0..self.n_rows).map(|r| self.value(r, var)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks(self.n_vars())
    }

    #[inline]
    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn variable_range(&self, var: usize) -> (T, T) {
        self.variable_ranges[var]
    }

    pub fn variable_ranges(&self) -> &[(T, T)] {
        &self.variable_ranges
    }

    /// Sorted distinct values observed for `var`.
    pub fn distinct_values(&self, var: usize) -> &[T] {
        &self.distinct[var]
    }

    /// Smallest observed value of `var` strictly greater than `threshold`.
    pub fn next_value_above(&self, var: usize, threshold: T) -> Option<T> {
        let values = &self.distinct[var];
        let idx = values.partition_point(|&v| v <= threshold);
        values.get(idx).copied()
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn instance_index(&self, id: &str) -> Option<usize> {
        self.instance_ids.iter().position(|x| x == id)
    }

    /// Encoding table of a categorical variable (code `i` is entry `i`).
    pub fn encoding(&self, var: usize) -> Option<&[String]> {
        self.encodings[var].as_deref()
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_classes()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// One-vs-all split for `class_id`.
    pub fn partition(&self, class_id: usize) -> Result<ClassPartition> {
        if class_id >= self.n_classes() {
            return Err(VaxError::UnknownClass(class_id.to_string()));
        }
        let (members, complement) = (0..self.n_rows).partition(|&r| self.labels[r] == class_id);
        Ok(ClassPartition {
            class_id,
            members,
            complement,
        })
    }

    /// Stable content hash over names, values, labels and ids.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for name in &self.variable_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        for (i, row) in self.rows().enumerate() {
            h.update(self.instance_ids[i].as_bytes());
            h.update([0u8]);
            for v in row {
                h.update(v.as_f64().to_le_bytes());
            }
            h.update(self.classes[self.labels[i]].as_bytes());
            h.update([0u8]);
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes the canonical CSV: `instance_id`, every variable (categorical
    /// values by their original string), then the label column.
    pub fn write_canonical_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![CANONICAL_ID_COLUMN.to_string()];
        header.extend(self.variable_names.iter().cloned());
        header.push(self.label_name.clone());
        w.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut record = Vec::with_capacity(row.len() + 2);
            record.push(self.instance_ids[i].clone());
            for (v, &x) in row.iter().enumerate() {
                match &self.encodings[v] {
                    Some(table) => {
                        let code = x.to_usize().expect("categorical code");
                        record.push(table[code].clone());
                    }
                    None => record.push(x.to_string()),
                }
            }
            record.push(self.classes[self.labels[i]].clone());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| VaxError::io("<canonical csv>", e))?;
        Ok(())
    }
}

/// Rows whose exact value vector also occurs with a different label.
pub fn ambiguous_rows<T: Scalar>(rows: &[Vec<T>], labels: &[usize]) -> Vec<usize> {
    let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        groups.entry(row_key(row)).or_default().push(i);
    }
    let mut out: Vec<usize> = groups
        .into_values()
        .filter(|members| members.iter().any(|&m| labels[m] != labels[members[0]]))
        .flatten()
        .collect();
    out.sort_unstable();
    out
}

fn row_key<T: Scalar>(row: &[T]) -> Vec<u64> {
    // +0.0 and -0.0 compare equal
    row.iter().map(|v| (v.as_f64() + 0.0).to_bits()).collect()
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub label_column: String,
    /// Column holding stable instance ids; row numbers are used when absent.
    pub id_column: Option<String>,
    /// Equal-width discretization of a numeric label column.
    pub discretize_bins: Option<usize>,
    /// Drop rows that share a value vector with a differently labeled row.
    /// When false such rows are an error.
    pub drop_ambiguous: bool,
}

impl IngestConfig {
    pub fn new(label_column: impl Into<String>) -> Self {
        IngestConfig {
            label_column: label_column.into(),
            id_column: None,
            discretize_bins: None,
            drop_ambiguous: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub dropped_missing: usize,
    pub dropped_ambiguous: usize,
    /// Bin edges when the label column was discretized.
    pub discretization_edges: Option<Vec<f64>>,
}

pub fn ingest_csv<T: Scalar>(path: &Path, config: &IngestConfig) -> Result<(Dataset<T>, IngestReport)> {
    let file = File::open(path).map_err(|e| VaxError::io(path, e))?;
    ingest_reader(file, config)
}

fn is_missing(field: &str) -> bool {
    let lower = field.trim().to_ascii_lowercase();
    MISSING_TOKENS.contains(&lower.as_str())
}

pub fn ingest_reader<T: Scalar, R: Read>(reader: R, config: &IngestConfig) -> Result<(Dataset<T>, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| *h == config.label_column)
        .ok_or_else(|| VaxError::MissingColumn(config.label_column.clone()))?;
    let id_idx = match &config.id_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| VaxError::MissingColumn(name.clone()))?,
        ),
        None => None,
    };
    let var_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != label_idx && Some(c) != id_idx)
        .collect();
    if var_cols.is_empty() {
        return Err(VaxError::InvalidDataset("no variable columns".into()));
    }

    let mut report = IngestReport::default();
    let mut records: Vec<(String, Vec<String>, String)> = Vec::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        report.rows_read += 1;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let missing = is_missing(field(label_idx))
            || var_cols.iter().any(|&c| is_missing(field(c)))
            || id_idx.is_some_and(|c| is_missing(field(c)));
        if missing {
            report.dropped_missing += 1;
            continue;
        }
        let id = match id_idx {
            Some(c) => field(c).to_string(),
            None => row_no.to_string(),
        };
        let vars = var_cols.iter().map(|&c| field(c).to_string()).collect();
        records.push((id, vars, field(label_idx).to_string()));
    }
    if records.is_empty() {
        return Err(VaxError::NoRows);
    }

    // Class names per record, before ambiguity removal.
    let label_names: Vec<String> = match config.discretize_bins {
        Some(bins) => {
            let target = records
                .iter()
                .map(|(_, _, l)| {
                    l.parse::<T>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| VaxError::InvalidDataset(format!("label `{l}` is not numeric")))
                })
                .collect::<Result<Vec<T>>>()?;
            let disc = discretize_target(&target, bins)?;
            report.discretization_edges = Some(disc.edges.iter().map(|e| e.as_f64()).collect());
            disc.labels.iter().map(|b| format!("bin{}", b + 1)).collect()
        }
        None => records.iter().map(|(_, _, l)| l.clone()).collect(),
    };

    let numeric: Vec<bool> = (0..var_cols.len())
        .map(|v| {
            records
                .iter()
                .all(|(_, vals, _)| vals[v].parse::<T>().is_ok_and(|x| x.is_finite()))
        })
        .collect();

    // Ambiguity is decided on exact string equality for categoricals and
    // exact numeric equality otherwise, which is what encoding preserves.
    let (rows, _) = encode_rows::<T>(&records, &numeric);
    let provisional: Vec<usize> = first_appearance_labels(&label_names).1;
    let ambiguous = ambiguous_rows(&rows, &provisional);
    if !ambiguous.is_empty() && !config.drop_ambiguous {
        return Err(VaxError::AmbiguousRows(ambiguous.len()));
    }
    report.dropped_ambiguous = ambiguous.len();
    let drop: HashSet<usize> = ambiguous.into_iter().collect();
    let (records, label_names): (Vec<_>, Vec<_>) = records
        .into_iter()
        .zip(label_names)
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, pair)| pair)
        .unzip();
    if records.is_empty() {
        return Err(VaxError::NoRows);
    }

    let (rows, encodings) = encode_rows::<T>(&records, &numeric);
    let (classes, labels) = first_appearance_labels(&label_names);
    if classes.len() < 2 {
        return Err(VaxError::TooFewClasses(classes.len()));
    }

    let parts = DatasetParts {
        rows,
        labels,
        classes,
        variable_names: Some(var_cols.iter().map(|&c| header[c].clone()).collect()),
        instance_ids: Some(records.iter().map(|(id, _, _)| id.clone()).collect()),
        encodings: Some(encodings),
        label_name: Some(config.label_column.clone()),
    };
    Ok((Dataset::from_parts(parts)?, report))
}

type Encoded<T> = (Vec<Vec<T>>, Vec<Option<Vec<String>>>);

/// Parses numeric columns and integer-encodes categorical ones by sorted
/// distinct string.
fn encode_rows<T: Scalar>(records: &[(String, Vec<String>, String)], numeric: &[bool]) -> Encoded<T> {
    let mut encodings = Vec::with_capacity(numeric.len());
    let mut codes: Vec<Option<HashMap<&str, usize>>> = Vec::with_capacity(numeric.len());
    for (v, &is_numeric) in numeric.iter().enumerate() {
        if is_numeric {
            encodings.push(None);
            codes.push(None);
        } else {
            let mut table: Vec<String> = records.iter().map(|(_, vals, _)| vals[v].clone()).collect();
            table.sort();
            table.dedup();
            encodings.push(Some(table));
            codes.push(Some(HashMap::new()));
        }
    }
    for (v, map) in codes.iter_mut().enumerate() {
        if let (Some(map), Some(table)) = (map.as_mut(), encodings[v].as_ref()) {
            for (i, s) in table.iter().enumerate() {
                map.insert(s.as_str(), i);
            }
        }
    }
    let rows = records
        .iter()
        .map(|(_, vals, _)| {
            vals.iter()
                .enumerate()
                .map(|(v, s)| match &codes[v] {
                    Some(map) => T::from_usize(map[s.as_str()]).expect("code fits scalar"),
                    None => s.parse::<T>().ok().expect("column checked numeric"),
                })
                .collect()
        })
        .collect();
    (rows, encodings)
}

fn first_appearance_labels(names: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut classes: Vec<String> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(names.len());
    for name in names {
        let id = *index.entry(name.as_str()).or_insert_with(|| {
            classes.push(name.clone());
            classes.len() - 1
        });
        labels.push(id);
    }
    (classes, labels)
}

/// Equal-width binning of a continuous target.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization<T> {
    /// Bin id per value, `0..bins`.
    pub labels: Vec<usize>,
    /// `bins + 1` edges from min to max.
    pub edges: Vec<T>,
}

pub fn discretize_target<T: Scalar>(values: &[T], bins: usize) -> Result<Discretization<T>> {
    if bins < 2 {
        return Err(VaxError::InvalidBinCount(bins));
    }
    let Some(&first) = values.first() else {
        return Err(VaxError::NoRows);
    };
    let (min, max) = values
        .iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if min >= max {
        return Err(VaxError::ConstantTarget);
    }
    let n = T::from_usize(bins).expect("bin count fits scalar");
    let width = (max - min) / n;
    let edges: Vec<T> = (0..=bins)
        .map(|i| {
            if i == bins {
                max
            } else {
                min + T::from_usize(i).unwrap() * width
            }
        })
        .collect();
    let labels = values
        .iter()
        .map(|&v| {
            let pos = ((v - min) / width).floor().to_usize().unwrap_or(0);
            pos.min(bins - 1)
        })
        .collect();
    Ok(Discretization { labels, edges })
}
