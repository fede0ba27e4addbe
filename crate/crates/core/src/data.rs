//! Datasets: an in-memory dense design matrix, a synthetic imbalanced
//! generator, and loaders for LIBSVM and dense CSV text files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// The label alphabet a dataset declares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelSet {
    /// Binary labels in {−1, +1}.
    Signed,
    /// Class indices in {0, …, K−1}.
    Classes(usize),
}

impl LabelSet {
    pub fn contains(&self, label: i32) -> bool {
        match *self {
            LabelSet::Signed => label == 1 || label == -1,
            LabelSet::Classes(k) => label >= 0 && (label as usize) < k,
        }
    }

    pub fn num_classes(&self) -> usize {
        match *self {
            LabelSet::Signed => 2,
            LabelSet::Classes(k) => k,
        }
    }
}

/// Dense row-major feature matrix with one integer label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<i32>,
    n: usize,
    d: usize,
    label_set: LabelSet,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<i32>,
        d: usize,
        label_set: LabelSet,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(Error::InvalidParameter(
                "feature dimension must be at least 1".into(),
            ));
        }
        if features.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature in row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        if let Some((i, &y)) = labels
            .iter()
            .enumerate()
            .find(|(_, &y)| !label_set.contains(y))
        {
            return Err(Error::UnknownLabel {
                line: i + 1,
                label: y.to_string(),
            });
        }
        Ok(Dataset {
            features,
            labels,
            n,
            d,
            label_set,
        })
    }

    /// Builds a dataset, inferring the label alphabet from the labels present.
    pub fn with_inferred_labels(features: Vec<f64>, labels: Vec<i32>, d: usize) -> Result<Self> {
        let label_set = infer_label_set(&labels)?;
        Dataset::new(features, labels, d, label_set)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn label(&self, i: usize) -> i32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label_set(&self) -> LabelSet {
        self.label_set
    }

    /// Label mapped to ±1 (class 0 maps to −1 for a two-class index alphabet).
    #[inline]
    pub fn signed_label(&self, i: usize) -> f64 {
        match self.label_set {
            LabelSet::Signed => self.labels[i] as f64,
            LabelSet::Classes(_) => {
                if self.labels[i] > 0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Label mapped to a class index (−1 maps to 0, +1 to 1 for signed labels).
    #[inline]
    pub fn class_index(&self, i: usize) -> usize {
        match self.label_set {
            LabelSet::Signed => usize::from(self.labels[i] > 0),
            LabelSet::Classes(_) => self.labels[i] as usize,
        }
    }

    /// Largest Euclidean row norm.
    pub fn max_row_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| crate::linalg::norm(self.row(i)))
            .fold(0.0, f64::max)
    }

    /// Count of rows per label value, ordered by label.
    pub fn label_counts(&self) -> Vec<(i32, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for &y in &self.labels {
            *counts.entry(y).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }

    /// Deterministic shuffled split into `(train, holdout)`.
    pub fn split(&self, holdout_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&holdout_frac) {
            return Err(Error::InvalidParameter(format!(
                "holdout fraction {holdout_frac} not in [0, 1)"
            )));
        }
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_hold = ((self.n as f64) * holdout_frac).round() as usize;
        if n_hold == 0 || n_hold == self.n {
            return Err(Error::InvalidParameter("split leaves an empty part".into()));
        }
        let (hold, train) = idx.split_at(n_hold);
        Ok((self.subset(train)?, self.subset(hold)?))
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(rows.len() * self.d);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    n: self.n,
                });
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(features, labels, self.d, self.label_set)
    }
}

fn infer_label_set(labels: &[i32]) -> Result<LabelSet> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.iter().all(|&y| y == 1 || y == -1) {
        return Ok(LabelSet::Signed);
    }
    if let Some((i, y)) = labels.iter().enumerate().find(|(_, &y)| y < 0) {
        return Err(Error::UnknownLabel {
            line: i + 1,
            label: y.to_string(),
        });
    }
    let k = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    Ok(LabelSet::Classes(k.max(2)))
}

/// Two Gaussian blobs centred at `+separation·e₁` (label +1, `n_major` rows) and
/// `−separation·e₁` (label −1, `n_minor` rows), each with identity covariance.
/// Each label is flipped with probability `noise`.
pub fn gen_imbalanced(
    n_major: usize,
    n_minor: usize,
    d: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_major == 0 || n_minor == 0 {
        return Err(Error::InvalidParameter(
            "class counts must be at least 1".into(),
        ));
    }
    if d < 2 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 2".into(),
        ));
    }
    if !(0.0..=1.0).contains(&noise) || !separation.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise {noise} or separation {separation} out of range"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_major + n_minor;
    let mut classes: Vec<i32> = std::iter::repeat_n(1, n_major)
        .chain(std::iter::repeat_n(-1, n_minor))
        .collect();
    classes.shuffle(&mut rng);

    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for &c in &classes {
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            let centre = if j == 0 { c as f64 * separation } else { 0.0 };
            features.push(centre + z);
        }
        let flip = rng.random::<f64>() < noise;
        labels.push(if flip { -c } else { c });
    }
    Dataset::new(features, labels, d, LabelSet::Signed)
}

/// On-disk dataset formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    /// `label idx:value …` with 1-based feature indices.
    LibSvm,
    /// Comma-separated, label in column 0.
    DenseCsv,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "libsvm" | "libsvm-sparse" => Ok(DataFormat::LibSvm),
            "csv" | "dense-csv" => Ok(DataFormat::DenseCsv),
            other => Err(Error::Config(format!("unknown data format {other:?}"))),
        }
    }
}

impl DataFormat {
    /// Guess from the file extension; anything other than `.csv` is LIBSVM.
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => DataFormat::DenseCsv,
            _ => DataFormat::LibSvm,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, format, None)
}

/// Parses dataset text. For LIBSVM input `dim` fixes the feature dimension;
/// otherwise it is the largest index seen.
pub fn parse_dataset(text: &str, format: DataFormat, dim: Option<usize>) -> Result<Dataset> {
    match format {
        DataFormat::LibSvm => parse_libsvm(text, dim),
        DataFormat::DenseCsv => parse_csv(text),
    }
}

fn parse_label(tok: &str, line: usize) -> Result<i32> {
    let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad label {tok:?}"),
    })?;
    if v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
        return Err(Error::UnknownLabel {
            line,
            label: tok.to_string(),
        });
    }
    Ok(v as i32)
}

fn check_labels(labels: &[i32], lines: &[usize]) -> Result<()> {
    let signed = labels.iter().all(|&y| y == 1 || y == -1);
    if !signed {
        if let Some(k) = labels.iter().position(|&y| y < 0) {
            return Err(Error::UnknownLabel {
                line: lines[k],
                label: labels[k].to_string(),
            });
        }
    }
    Ok(())
}

fn parse_libsvm(text: &str, dim: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut lines = Vec::new();
    let mut max_idx = 0usize;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let label = parse_label(toks.next().unwrap_or(""), line)?;
        let mut row = Vec::new();
        for tok in toks {
            let (i, v) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected index:value, got {tok:?}"),
            })?;
            let i: usize = i.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad index {i:?}"),
            })?;
            let v: f64 = v.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad value {v:?}"),
            })?;
            if i == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value {v}"),
                });
            }
            max_idx = max_idx.max(i);
            row.push((i - 1, v));
        }
        rows.push(row);
        labels.push(label);
        lines.push(line);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_labels(&labels, &lines)?;
    let d = match dim {
        Some(d) if d < max_idx => {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: max_idx,
            });
        }
        Some(d) => d,
        None => max_idx.max(1),
    };
    let mut features = vec![0.0; rows.len() * d];
    for (r, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            features[r * d + j] = v;
        }
    }
    Dataset::with_inferred_labels(features, labels, d)
}

fn parse_csv(text: &str) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut lines = Vec::new();
    let mut d: Option<usize> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let mut fields = content.split(',');
        let label = parse_label(fields.next().unwrap_or(""), line)?;
        let before = features.len();
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad number {f:?}"),
            })?;
            features.push(v);
        }
        let width = features.len() - before;
        match d {
            None => d = Some(width),
            Some(d) if d != width => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {d} features, found {width}"),
                });
            }
            _ => {}
        }
        labels.push(label);
        lines.push(line);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_labels(&labels, &lines)?;
    Dataset::with_inferred_labels(features, labels, d.unwrap_or(0))
}

/// Dense CSV with the label in column 0. Floats use shortest round-trip formatting.
pub fn to_csv_string(data: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..data.n() {
        let _ = write!(out, "{}", data.label(i));
        for v in data.row(i) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

/// LIBSVM text; zero entries are omitted.
pub fn to_libsvm_string(data: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..data.n() {
        let y = data.label(i);
        if data.label_set() == LabelSet::Signed && y > 0 {
            out.push('+');
        }
        let _ = write!(out, "{y}");
        for (j, v) in data.row(i).iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(out, " {}:{v:?}", j + 1);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(data: &Dataset, path: impl AsRef<Path>, format: DataFormat) -> Result<()> {
    let text = match format {
        DataFormat::LibSvm => to_libsvm_string(data),
        DataFormat::DenseCsv => to_csv_string(data),
    };
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn libsvm_line_densifies() {
        let ds = parse_dataset("+1 1:0.5 3:2.0\n", DataFormat::LibSvm, None).unwrap();
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.row(0), &[0.5, 0.0, 2.0]);
        assert_eq!(ds.label(0), 1);
        assert_eq!(ds.label_set(), LabelSet::Signed);
    }

    #[test]
    fn libsvm_explicit_dimension() {
        let ds = parse_dataset("-1 2:1\n+1 1:3\n", DataFormat::LibSvm, Some(4)).unwrap();
        assert_eq!(ds.d(), 4);
        assert_eq!(ds.row(1), &[3.0, 0.0, 0.0, 0.0]);
        assert!(parse_dataset("-1 5:1\n", DataFormat::LibSvm, Some(4)).is_err());
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(
            parse_dataset("", DataFormat::LibSvm, None),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            parse_dataset("\n\n", DataFormat::DenseCsv, None),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_dataset("1,0.5\n1,abc\n", DataFormat::DenseCsv, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("+1 1:0.5\n+1 2-0.5\n", DataFormat::LibSvm, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("1,0.5\n1,0.5,0.7\n", DataFormat::DenseCsv, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn unknown_labels_are_rejected() {
        let err = parse_dataset("1,0.5\n0.5,1\n", DataFormat::DenseCsv, None).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { line: 2, .. }), "{err}");
        let err = parse_dataset("0,1\n-1,1\n", DataFormat::DenseCsv, None).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { line: 2, .. }), "{err}");
    }

    #[test]
    fn class_index_labels() {
        let ds = parse_dataset("0,1\n2,1\n1,0\n", DataFormat::DenseCsv, None).unwrap();
        assert_eq!(ds.label_set(), LabelSet::Classes(3));
        assert_eq!(ds.class_index(1), 2);
    }

    #[test]
    fn generator_class_ratio_is_exact() {
        let ds = gen_imbalanced(900, 100, 5, 1.0, 0.0, 3).unwrap();
        assert_eq!(ds.label_counts(), vec![(-1, 100), (1, 900)]);
    }

    #[test]
    fn separable_generator_is_linearly_separable() {
        let ds = gen_imbalanced(300, 30, 4, 10.0, 0.0, 11).unwrap();
        let correct = (0..ds.n())
            .filter(|&i| ds.row(i)[0].signum() == ds.signed_label(i))
            .count();
        assert_eq!(correct, ds.n());
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_imbalanced(50, 10, 3, 1.0, 0.1, 42).unwrap();
        let b = gen_imbalanced(50, 10, 3, 1.0, 0.1, 42).unwrap();
        assert_eq!(to_csv_string(&a).as_bytes(), to_csv_string(&b).as_bytes());
        let c = gen_imbalanced(50, 10, 3, 1.0, 0.1, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_rejects_bad_counts() {
        assert!(gen_imbalanced(0, 10, 3, 1.0, 0.0, 1).is_err());
        assert!(gen_imbalanced(10, 10, 1, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let ds = gen_imbalanced(80, 20, 3, 1.0, 0.0, 5).unwrap();
        let (tr, ho) = ds.split(0.25, 9).unwrap();
        assert_eq!(tr.n() + ho.n(), 100);
        assert_eq!(ho.n(), 25);
    }
}
