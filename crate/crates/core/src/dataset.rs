//! Datasets, CSV ingestion, stratified splits and k-fold partitions.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: data.len(),
            });
        }
        Ok(Matrix {
            data,
            n_rows,
            n_cols,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            data: vec![0.0; n_rows * n_cols],
            n_rows,
            n_cols,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: n_cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            data,
            n_rows: rows.len(),
            n_cols,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-width matrix still has rows.
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            data,
            n_rows: rows.len(),
            n_cols: self.n_cols,
        }
    }

    /// Column-wise concatenation; all parts must have the same row count.
    pub fn hconcat(parts: &[&Matrix]) -> Result<Matrix> {
        let n_rows = parts.first().map_or(0, |m| m.n_rows);
        if let Some(bad) = parts.iter().find(|m| m.n_rows != n_rows) {
            return Err(Error::DimensionMismatch {
                expected: n_rows,
                found: bad.n_rows,
            });
        }
        let n_cols = parts.iter().map(|m| m.n_cols).sum();
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for m in parts {
                data.extend_from_slice(m.row(i));
            }
        }
        Ok(Matrix {
            data,
            n_rows,
            n_cols,
        })
    }
}

/// Labelled training data.
///
/// `classes` holds the original label strings; `labels[i]` indexes into it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
    pub panel_shape: Option<(usize, usize)>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let classes = (0..n_classes).map(|c| c.to_string()).collect();
        Self::with_classes(features, labels, classes)
    }

    pub fn with_classes(features: Matrix, labels: Vec<usize>, classes: Vec<String>) -> Result<Self> {
        if labels.len() != features.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: features.n_rows(),
                found: labels.len(),
            });
        }
        if classes.is_empty() {
            return Err(Error::InvalidArgument("n_classes must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {} classes",
                classes.len()
            )));
        }
        Ok(Dataset {
            features,
            labels,
            classes,
            panel_shape: None,
        })
    }

    pub fn with_panel_shape(mut self, height: usize, width: usize) -> Result<Self> {
        if height * width != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: height * width,
            });
        }
        self.panel_shape = Some((height, width));
        Ok(self)
    }

    #[inline]
    pub fn n_instances(&self) -> usize {
        self.features.n_rows()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            classes: self.classes.clone(),
            panel_shape: self.panel_shape,
        }
    }

    /// Same labels, different feature matrix (panel shape dropped).
    pub fn with_features(&self, features: Matrix) -> Result<Dataset> {
        Dataset::with_classes(features, self.labels.clone(), self.classes.clone())
    }
}

/// Which column of a CSV file holds the class label, and how to map it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Header name of the label column. `None` means the last column.
    pub label_column: Option<String>,
    /// Fixed class list (e.g. from a trained model). When absent, classes are
    /// assigned dense ids in order of first appearance.
    pub classes: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn label(name: impl Into<String>) -> Self {
        CsvSchema {
            label_column: Some(name.into()),
            classes: None,
        }
    }

    pub fn with_classes(mut self, classes: Vec<String>) -> Self {
        self.classes = Some(classes);
        self
    }
}

struct RawCsv {
    header: Vec<String>,
    records: Vec<csv::StringRecord>,
}

fn read_raw_csv(path: &Path) -> Result<RawCsv> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row: i,
                expected: header.len(),
                found: rec.len(),
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(RawCsv { header, records })
}

fn parse_cell(value: &str, row: usize, column: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::UnparsableCell {
            row,
            column: column.to_string(),
            value: value.to_string(),
        }),
    }
}

/// Load a labelled CSV file (header row required, RFC 4180 quoting).
///
/// Row indices in errors count data rows from 0, excluding the header.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = read_raw_csv(path)?;
    let label_idx = match &schema.label_column {
        Some(name) => raw
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingLabelColumn(name.clone()))?,
        None => raw.header.len() - 1,
    };

    let mut classes: Vec<String> = schema.classes.clone().unwrap_or_default();
    let fixed = schema.classes.is_some();
    let mut index: HashMap<String, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();

    let n_features = raw.header.len() - 1;
    let mut data = Vec::with_capacity(raw.records.len() * n_features);
    let mut labels = Vec::with_capacity(raw.records.len());
    for (row, rec) in raw.records.iter().enumerate() {
        for (j, cell) in rec.iter().enumerate() {
            if j == label_idx {
                let id = match index.get(cell) {
                    Some(&id) => id,
                    None if fixed => return Err(Error::UnknownLabel(cell.to_string())),
                    None => {
                        let id = classes.len();
                        classes.push(cell.to_string());
                        index.insert(cell.to_string(), id);
                        id
                    }
                };
                labels.push(id);
            } else {
                data.push(parse_cell(cell, row, &raw.header[j])?);
            }
        }
    }
    let features = Matrix::new(data, labels.len(), n_features)?;
    Dataset::with_classes(features, labels, classes)
}

/// Load the feature columns of a CSV file, dropping `label_column` if present.
pub fn load_features_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Matrix> {
    let path = path.as_ref();
    let raw = read_raw_csv(path)?;
    let skip = label_column.and_then(|name| raw.header.iter().position(|h| h == name));
    let n_features = raw.header.len() - usize::from(skip.is_some());
    let mut data = Vec::with_capacity(raw.records.len() * n_features);
    for (row, rec) in raw.records.iter().enumerate() {
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) != skip {
                data.push(parse_cell(cell, row, &raw.header[j])?);
            }
        }
    }
    Matrix::new(data, raw.records.len(), n_features)
}

/// Growing/estimating partition of a dataset.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub growing: Dataset,
    pub estimating: Dataset,
    pub growing_rows: Vec<usize>,
    pub estimating_rows: Vec<usize>,
    pub seed: u64,
}

/// Per-class allocation for a stratified split: the total is
/// `round(fraction * n)`, each class gets `floor(fraction * n_c)` plus at most
/// one of the leftover slots (largest remainder first, ties to the lower
/// class), and every class with at least two members keeps one on each side.
fn stratified_allocation(counts: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let target = (fraction * n as f64).round() as usize;
    let mut take: Vec<usize> = counts
        .iter()
        .map(|&c| {
            let t = (fraction * c as f64).floor() as usize;
            if c >= 2 {
                t.clamp(1, c - 1)
            } else {
                t
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    let rem = |c: usize| fraction * counts[c] as f64 - (fraction * counts[c] as f64).floor();
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    let mut assigned: usize = take.iter().sum();
    for &c in &order {
        if assigned >= target {
            break;
        }
        let upper = if counts[c] >= 2 { counts[c] - 1 } else { counts[c] };
        let exact_ceil = (fraction * counts[c] as f64).ceil() as usize;
        if take[c] < upper.min(exact_ceil) {
            take[c] += 1;
            assigned += 1;
        }
    }
    take
}

/// Split row indices into (first, second) parts, stratified by label.
/// Each part is returned in ascending order.
pub fn stratified_split_indices(
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction {fraction} not in (0, 1)"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() == 1 {
            return Err(Error::ClassTooSmall {
                class,
                count: 1,
                required: 2,
            });
        }
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let take = stratified_allocation(&counts, fraction);
    let mut rng = rng_from(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (members, &k) in by_class.iter_mut().zip(&take) {
        members.shuffle(&mut rng);
        first.extend_from_slice(&members[..k]);
        second.extend_from_slice(&members[k..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

pub fn stratified_split(ds: &Dataset, fraction: f64, seed: u64) -> Result<SplitPair> {
    let (g, e) = stratified_split_indices(&ds.labels, ds.n_classes(), fraction, seed)?;
    Ok(SplitPair {
        growing: ds.subset(&g),
        estimating: ds.subset(&e),
        growing_rows: g,
        estimating_rows: e,
        seed,
    })
}

/// `k` disjoint folds over `0..n` with sizes differing by at most one; the
/// first `n % k` folds hold the extra instance. Each fold is sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Label-stratified variant of [`kfold_indices`]: positions `0..labels.len()`
/// are dealt round-robin into folds class by class, so every class is spread
/// as evenly as possible and fold sizes still differ by at most one.
pub fn stratified_kfold_indices(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { n, k });
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng_from(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn labels_are_densified_in_first_seen_order() {
        let f = write_tmp("a,b,label\n1,2,cat\n3,4,dog\n5,6,cat\n");
        let ds = load_csv(f.path(), &CsvSchema::label("label")).unwrap();
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.classes, vec!["cat", "dog"]);
        assert_eq!(ds.features.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn label_column_may_be_anywhere() {
        let f = write_tmp("y,a\n\"x, quoted\",1.5\nz,2\n");
        let ds = load_csv(f.path(), &CsvSchema::label("y")).unwrap();
        assert_eq!(ds.classes, vec!["x, quoted", "z"]);
        assert_eq!(ds.features.as_slice(), &[1.5, 2.0]);
    }

    #[test]
    fn ragged_row_reports_its_index() {
        let mut s = String::from((0..17).map(|i| format!("c{i}")).collect::<Vec<_>>().join(","));
        s.push('\n');
        for r in 0..5 {
            let n = if r == 3 { 15 } else { 17 };
            s.push_str(&vec!["1"; n].join(","));
            s.push('\n');
        }
        let f = write_tmp(&s);
        match load_csv(f.path(), &CsvSchema::default()) {
            Err(Error::RaggedRow { row, expected, found }) => {
                assert_eq!((row, expected, found), (3, 17, 15));
            }
            other => panic!("expected ragged row error, got {other:?}"),
        }
    }

    #[test]
    fn unparsable_and_missing_cells_are_rejected() {
        let f = write_tmp("a,b,y\n1,2,p\n1,oops,q\n");
        match load_csv(f.path(), &CsvSchema::default()) {
            Err(Error::UnparsableCell { row, column, .. }) => assert_eq!((row, column.as_str()), (1, "b")),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("a,b,y\n1,,p\n");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::default()),
            Err(Error::UnparsableCell { .. })
        ));
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_tmp("a,b,y\n");
        assert!(matches!(load_csv(f.path(), &CsvSchema::default()), Err(Error::EmptyFile)));
        let f = write_tmp("");
        assert!(load_csv(f.path(), &CsvSchema::default()).is_err());
    }

    #[test]
    fn fixed_class_list_rejects_unknown_labels() {
        let f = write_tmp("a,y\n1,dog\n2,cat\n");
        let schema = CsvSchema {
            label_column: Some("y".into()),
            classes: Some(vec!["cat".into(), "dog".into()]),
        };
        let ds = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ds.labels, vec![1, 0]);
        let f = write_tmp("a,y\n1,cow\n");
        assert!(matches!(load_csv(f.path(), &schema), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn feature_only_load_drops_label_column() {
        let f = write_tmp("a,y,b\n1,q,2\n3,r,4\n");
        let m = load_features_csv(f.path(), Some("y")).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (2, 2));
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    fn labelled(counts: &[usize]) -> Dataset {
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat(c).take(n))
            .collect();
        let x = Matrix::new((0..labels.len()).map(|i| i as f64).collect(), labels.len(), 1).unwrap();
        Dataset::new(x, labels, counts.len()).unwrap()
    }

    #[test]
    fn balanced_split_is_exact() {
        let ds = labelled(&[50, 50]);
        let sp = stratified_split(&ds, 0.8, 1).unwrap();
        assert_eq!(sp.growing.n_instances(), 80);
        assert_eq!(sp.growing.class_counts(), vec![40, 40]);
        assert_eq!(sp.estimating.class_counts(), vec![10, 10]);
    }

    #[test]
    fn split_is_deterministic() {
        let ds = labelled(&[50, 50]);
        let a = stratified_split(&ds, 0.8, 9).unwrap();
        let b = stratified_split(&ds, 0.8, 9).unwrap();
        assert_eq!(a.growing_rows, b.growing_rows);
        assert_eq!(a.estimating_rows, b.estimating_rows);
    }

    #[test]
    fn unbalanced_split_rounds_per_class() {
        let ds = labelled(&[10, 5]);
        let sp = stratified_split(&ds, 0.8, 3).unwrap();
        assert_eq!(sp.growing.class_counts(), vec![8, 4]);
        assert_eq!(sp.estimating.class_counts(), vec![2, 1]);
    }

    #[test]
    fn singleton_class_cannot_be_split() {
        let ds = labelled(&[10, 1]);
        assert!(matches!(
            stratified_split(&ds, 0.8, 0),
            Err(Error::ClassTooSmall { class: 1, .. })
        ));
    }

    #[test]
    fn kfold_sizes() {
        let f = kfold_indices(9, 3, 0).unwrap();
        assert!(f.iter().all(|f| f.len() == 3));
        let f = kfold_indices(10, 3, 0).unwrap();
        let mut sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert!(matches!(kfold_indices(5, 6, 0), Err(Error::InvalidFoldCount { n: 5, k: 6 })));
    }

    #[test]
    fn stratified_folds_spread_each_class() {
        let labels: Vec<usize> = (0..30).map(|i| usize::from(i >= 24)).collect();
        let folds = stratified_kfold_indices(&labels, 3, 5).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 10);
            assert_eq!(f.iter().filter(|&&i| labels[i] == 1).count(), 2);
        }
    }

    #[test]
    fn hconcat_and_select() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[5.0], [6.0]]).unwrap();
        let c = Matrix::hconcat(&[&a, &b]).unwrap();
        assert_eq!(c.row(1), &[3.0, 4.0, 6.0]);
        assert_eq!(c.select_rows(&[1, 1]).as_slice(), &[3.0, 4.0, 6.0, 3.0, 4.0, 6.0]);
    }
}
