//! Tabular data: the feature matrix, label vectors, CSV ingestion,
//! preprocessing (one-hot encoding and row deduplication) and seeded
//! train/test splitting.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// How a column's values should be interpreted.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Numeric,
    /// Cells hold the index into `levels` (first-occurrence order).
    Categorical { levels: Vec<String> },
}

/// Immutable `n × d` matrix of finite `f64` values with named columns.
///
/// Values are stored row-major. Negative zero is normalized to positive zero on
/// construction so that bitwise row comparison agrees with numeric comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    kinds: Vec<ColumnKind>,
    values: Vec<f64>,
    n_rows: usize,
}

impl Dataset {
    /// Builds a purely numeric dataset from rows.
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = columns.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow {
                    row: i,
                    found: row.len(),
                    expected: d,
                });
            }
            values.extend_from_slice(row);
        }
        let kinds = vec![ColumnKind::Numeric; d];
        Self::from_parts(columns, kinds, values, rows.len())
    }

    /// Builds a numeric dataset from a row-major buffer.
    pub fn from_row_major(columns: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(Error::NoColumns);
        }
        if values.len() % d != 0 {
            return Err(Error::RaggedRow {
                row: values.len() / d,
                found: values.len() % d,
                expected: d,
            });
        }
        let n = values.len() / d;
        Self::from_parts(columns, vec![ColumnKind::Numeric; d], values, n)
    }

    fn from_parts(
        columns: Vec<String>,
        kinds: Vec<ColumnKind>,
        mut values: Vec<f64>,
        n_rows: usize,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::NoColumns);
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateColumn(c.clone()));
            }
        }
        let d = columns.len();
        for (k, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: k / d,
                    column: columns[k % d].clone(),
                });
            }
            if *v == 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            columns,
            kinds,
            values,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn kind(&self, col: usize) -> &ColumnKind {
        &self.kinds[col]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Dataset {
            columns: self.columns.clone(),
            kinds: self.kinds.clone(),
            values,
            n_rows: rows.len(),
        }
    }

    /// SHA-256 over column names and value bit patterns, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        self.hash_into(&mut h);
        hex::encode(h.finalize())
    }

    pub(crate) fn hash_into(&self, h: &mut Sha256) {
        h.update((self.n_rows as u64).to_le_bytes());
        h.update((self.n_cols() as u64).to_le_bytes());
        for c in &self.columns {
            h.update((c.len() as u64).to_le_bytes());
            h.update(c.as_bytes());
        }
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
    }
}

/// Class ids for one prediction column.
///
/// `classes[id]` is the original string of class `id`. When several label
/// columns are loaded together they share one encoding, so equal ids mean equal
/// predictions across columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    classes: Vec<String>,
}

impl LabelVector {
    /// Labels given directly as dense ids; class names are the ids themselves.
    pub fn from_ids(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let classes = (0..k).map(|c| c.to_string()).collect();
        Self { labels, classes }
    }

    pub fn with_classes(labels: Vec<usize>, classes: Vec<String>) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::Schema(format!(
                "label id {bad} outside {} known classes",
                classes.len()
            )));
        }
        Ok(Self { labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_name(&self, id: usize) -> &str {
        &self.classes[id]
    }

    pub fn select(&self, rows: &[usize]) -> LabelVector {
        LabelVector {
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            classes: self.classes.clone(),
        }
    }
}

/// String-to-id map assigning ids in order of first occurrence.
#[derive(Debug, Default, Clone)]
pub struct ClassEncoding {
    classes: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassEncoding {
    pub fn encode(&mut self, value: &str) -> usize {
        if let Some(&id) = self.index.get(value) {
            return id;
        }
        let id = self.classes.len();
        self.classes.push(value.to_owned());
        self.index.insert(value.to_owned(), id);
        id
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }
}

/// A loaded CSV: features plus one label vector per requested label column.
#[derive(Debug, Clone)]
pub struct LabeledData {
    pub dataset: Dataset,
    pub labels: Vec<LabelVector>,
}

/// Reads a headered CSV file.
///
/// Columns in `label_columns` become [`LabelVector`]s sharing one class
/// encoding; columns in `categorical` are read as strings and stored as level
/// codes for [`preprocess`] to expand; every other column must parse as a
/// finite number.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_columns: &[&str],
    categorical: &[&str],
) -> Result<LabeledData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    read_csv(file, label_columns, categorical).map_err(|e| match e {
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(
    reader: R,
    label_columns: &[&str],
    categorical: &[&str],
) -> Result<LabeledData> {
    let csv_err = |source| Error::Csv {
        path: Default::default(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();

    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let label_idx = label_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    for c in categorical {
        let j = find(c)?;
        if label_idx.contains(&j) {
            return Err(Error::Schema(format!(
                "column `{c}` is declared both as a label and as categorical"
            )));
        }
    }
    let feature_idx: Vec<usize> = (0..header.len()).filter(|j| !label_idx.contains(j)).collect();
    if feature_idx.is_empty() {
        return Err(Error::NoColumns);
    }
    let is_cat: Vec<bool> = feature_idx
        .iter()
        .map(|&j| categorical.contains(&header[j].as_str()))
        .collect();

    let mut levels: Vec<ClassEncoding> = vec![ClassEncoding::default(); feature_idx.len()];
    let mut classes = ClassEncoding::default();
    let mut labels: Vec<Vec<usize>> = vec![Vec::new(); label_idx.len()];
    let mut values = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                found: rec.len(),
                expected: header.len(),
            });
        }
        for (k, &j) in feature_idx.iter().enumerate() {
            let cell = &rec[j];
            if is_cat[k] {
                values.push(levels[k].encode(cell) as f64);
            } else {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    row,
                    column: header[j].clone(),
                    value: cell.to_owned(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row,
                        column: header[j].clone(),
                    });
                }
                values.push(v);
            }
        }
        for (k, &j) in label_idx.iter().enumerate() {
            labels[k].push(classes.encode(rec[j].trim()));
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let columns = feature_idx.iter().map(|&j| header[j].clone()).collect();
    let kinds = is_cat
        .iter()
        .zip(levels)
        .map(|(&c, enc)| {
            if c {
                ColumnKind::Categorical {
                    levels: enc.classes,
                }
            } else {
                ColumnKind::Numeric
            }
        })
        .collect();
    let dataset = Dataset::from_parts(columns, kinds, values, n)?;
    let labels = labels
        .into_iter()
        .map(|l| LabelVector {
            labels: l,
            classes: classes.classes.clone(),
        })
        .collect();
    Ok(LabeledData { dataset, labels })
}

/// Writes features followed by label columns (as their class strings).
pub fn write_csv<W: Write>(
    writer: W,
    dataset: &Dataset,
    labels: &[(&str, &LabelVector)],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.columns().iter().map(String::as_str).collect();
    header.extend(labels.iter().map(|(name, _)| *name));
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..dataset.n_rows() {
        record.clear();
        record.extend(dataset.row(i).iter().map(|v| v.to_string()));
        for (_, lv) in labels {
            record.push(lv.class_name(lv.labels()[i]).to_owned());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Output of [`preprocess`]: the encoded, deduplicated dataset and the
/// original indices of the rows that were kept.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub dataset: Dataset,
    pub kept_rows: Vec<usize>,
}

/// One-hot encodes the `categorical` columns and drops duplicate feature rows.
///
/// Each listed column is replaced in place by one `name=value` indicator column
/// per distinct value, in first-occurrence order. Numeric columns may be listed
/// too; their values are rendered with `f64`'s `Display`. Deduplication runs
/// after encoding, compares full feature rows bitwise and keeps the first
/// occurrence. Every categorical column of `ds` must be listed.
pub fn preprocess(ds: &Dataset, categorical: &[&str]) -> Result<Preprocessed> {
    let mut expand = vec![false; ds.n_cols()];
    for c in categorical {
        let j = ds
            .column_index(c)
            .ok_or_else(|| Error::MissingColumn((*c).to_owned()))?;
        expand[j] = true;
    }
    for (j, kind) in ds.kinds.iter().enumerate() {
        if matches!(kind, ColumnKind::Categorical { .. }) && !expand[j] {
            return Err(Error::Schema(format!(
                "categorical column `{}` must be one-hot encoded",
                ds.columns[j]
            )));
        }
    }

    // Per source column: the list of (output name, matching cell value).
    enum Plan {
        Copy,
        OneHot(Vec<f64>),
    }
    let mut columns = Vec::new();
    let mut plans = Vec::with_capacity(ds.n_cols());
    for j in 0..ds.n_cols() {
        if !expand[j] {
            columns.push(ds.columns[j].clone());
            plans.push(Plan::Copy);
            continue;
        }
        let mut distinct: Vec<f64> = Vec::new();
        for i in 0..ds.n_rows() {
            let v = ds.value(i, j);
            if !distinct.contains(&v) {
                distinct.push(v);
            }
        }
        for &v in &distinct {
            let label = match &ds.kinds[j] {
                ColumnKind::Categorical { levels } => levels[v as usize].clone(),
                ColumnKind::Numeric => v.to_string(),
            };
            columns.push(format!("{}={}", ds.columns[j], label));
        }
        plans.push(Plan::OneHot(distinct));
    }

    let d = columns.len();
    let mut values = Vec::with_capacity(ds.n_rows() * d);
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(ds.n_rows());
    let mut kept_rows = Vec::new();
    let mut row = Vec::with_capacity(d);
    for i in 0..ds.n_rows() {
        row.clear();
        for (j, plan) in plans.iter().enumerate() {
            let v = ds.value(i, j);
            match plan {
                Plan::Copy => row.push(v),
                Plan::OneHot(distinct) => {
                    row.extend(distinct.iter().map(|&u| if u == v { 1.0 } else { 0.0 }))
                }
            }
        }
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            values.extend_from_slice(&row);
            kept_rows.push(i);
        }
    }
    let n = kept_rows.len();
    let dataset = Dataset::from_parts(columns, vec![ColumnKind::Numeric; d], values, n)?;
    Ok(Preprocessed { dataset, kept_rows })
}

/// Train fraction and seed for [`split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    train_fraction: f64,
    seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidFraction(train_fraction));
        }
        Ok(Self {
            train_fraction,
            seed,
        })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// One side of a split. `rows` are indices into the unsplit dataset, ascending.
#[derive(Debug, Clone)]
pub struct Partition {
    pub dataset: Dataset,
    pub labels: Vec<LabelVector>,
    pub rows: Vec<usize>,
}

/// Seeded permutation of `0..n`.
///
/// The generator is SplitMix64 seeded with `seed`. The shuffle is the
/// descending Fisher–Yates: for `i` from `n-1` down to `1`, draw
/// `j = (next_u64() * (i+1)) >> 64` (128-bit product) and swap `i` and `j`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let bound = (i + 1) as u128;
        let j = ((rng.next_u64() as u128 * bound) >> 64) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Splits rows into train and test sides.
///
/// The first `round(train_fraction * n)` entries of [`permutation`] go to
/// train, the rest to test; each side keeps its rows in ascending order.
pub fn split(
    ds: &Dataset,
    labels: &[LabelVector],
    spec: &SplitSpec,
) -> Result<(Partition, Partition)> {
    let n = ds.n_rows();
    for lv in labels {
        if lv.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: lv.len(),
            });
        }
    }
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::DegenerateSplit {
            n,
            fraction: spec.train_fraction,
        });
    }
    let perm = permutation(n, spec.seed);
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    let part = |rows: Vec<usize>| Partition {
        dataset: ds.select_rows(&rows),
        labels: labels.iter().map(|l| l.select(&rows)).collect(),
        rows,
    };
    Ok((part(train), part(test)))
}
