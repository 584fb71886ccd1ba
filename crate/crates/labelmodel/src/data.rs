//! Core data model: label matrices, feature matrices, dependency edges, and
//! labeling-function summary statistics.
//!
//! A labeling function emits `-1`, `+1`, or `0` (abstain) per example. The
//! label matrix stores only the nonzero votes, since real labeling functions
//! abstain on most examples.

use crate::error::{Error, Result};

/// A single labeling-function output: `-1`, `+1`, or `0` for abstain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Label(i8);

impl Label {
    pub const NEG: Label = Label(-1);
    pub const ABSTAIN: Label = Label(0);
    pub const POS: Label = Label(1);

    pub fn new(value: i8) -> Result<Self> {
        match value {
            -1 | 0 | 1 => Ok(Label(value)),
            v => Err(Error::Invalid(format!(
                "label must be -1, 0 or 1, got {v}"
            ))),
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    pub fn is_abstain(self) -> bool {
        self.0 == 0
    }
}

/// Sparse `n x m` matrix of labeling-function votes over `{-1, 0, +1}`,
/// storing only the nonzero entries (CSR layout, sorted by row then column).
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    n: usize,
    m: usize,
    cols: Vec<u32>,
    labels: Vec<i8>,
    row_offsets: Vec<usize>,
}

impl LabelMatrix {
    /// Builds a matrix from `(row, col, label)` triplets. Labels must be
    /// nonzero (abstains are implicit), indices in range, and each cell may
    /// appear at most once.
    pub fn from_entries(n: usize, m: usize, entries: &[(usize, usize, i8)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, i8)> = Vec::with_capacity(entries.len());
        for &(r, c, v) in entries {
            if r >= n {
                return Err(Error::Invalid(format!("row {r} out of range (n={n})")));
            }
            if c >= m {
                return Err(Error::Invalid(format!("column {c} out of range (m={m})")));
            }
            if v != -1 && v != 1 {
                return Err(Error::Invalid(format!(
                    "stored label at ({r},{c}) must be -1 or 1, got {v}"
                )));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::Invalid(format!(
                    "duplicate cell ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }

        let mut cols = Vec::with_capacity(sorted.len());
        let mut labels = Vec::with_capacity(sorted.len());
        let mut row_offsets = vec![0usize; n + 1];
        for &(r, c, v) in &sorted {
            row_offsets[r + 1] += 1;
            cols.push(c as u32);
            labels.push(v);
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(LabelMatrix {
            n,
            m,
            cols,
            labels,
            row_offsets,
        })
    }

    /// Builds a matrix from dense rows over `{-1, 0, 1}`; zeros are dropped.
    pub fn from_dense_rows(m: usize, rows: &[Vec<i8>]) -> Result<Self> {
        let mut entries = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!(
                    "row {r} has length {}, expected m={m}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                if v == 0 {
                    continue;
                }
                entries.push((r, c, v));
            }
        }
        Self::from_entries(rows.len(), m, &entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of stored (nonzero) labels.
    pub fn nnz(&self) -> usize {
        self.labels.len()
    }

    /// The nonzero entries of row `r` as `(col, label)` pairs, ordered by column.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        self.cols[lo..hi]
            .iter()
            .zip(&self.labels[lo..hi])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_offsets[r + 1] - self.row_offsets[r]
    }

    /// Row `r` as a dense `{-1,0,1}` vector of length `m`.
    pub fn row_dense(&self, r: usize) -> Vec<i8> {
        let mut out = vec![0i8; self.m];
        for (c, v) in self.row(r) {
            out[c] = v;
        }
        out
    }

    /// All stored entries as `(row, col, label)`, ordered by row then column.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Returns a copy with one extra column appended on the right; `column`
    /// holds the new labeling function's dense votes.
    pub fn with_column(&self, column: &[i8]) -> Result<Self> {
        if column.len() != self.n {
            return Err(Error::Dimension(format!(
                "new column has length {}, expected n={}",
                column.len(),
                self.n
            )));
        }
        let mut entries: Vec<(usize, usize, i8)> = self.entries().collect();
        for (r, &v) in column.iter().enumerate() {
            if v != 0 {
                entries.push((r, self.m, v));
            }
        }
        Self::from_entries(self.n, self.m + 1, &entries)
    }
}

/// Dense `n x d` real feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(d: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * d);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dimension(format!(
                    "feature row {r} has length {}, expected d={d}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(FeatureMatrix {
            n: rows.len(),
            d,
            data,
        })
    }

    pub(crate) fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * d);
        FeatureMatrix { n, d, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.d..(r + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1))
    }
}

/// Rescales every row whose Euclidean norm exceeds 1 back onto the unit
/// sphere; rows already inside the unit ball are left untouched.
pub fn normalize_features(features: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut data = Vec::with_capacity(features.data.len());
    for (r, row) in features.rows().enumerate() {
        if features.d == 0 {
            break;
        }
        let mut sq = 0.0;
        for &x in row {
            if !x.is_finite() {
                return Err(Error::Invalid(format!(
                    "non-finite feature value {x} in row {r}"
                )));
            }
            sq += x * x;
        }
        let norm = sq.sqrt();
        if norm > 1.0 {
            data.extend(row.iter().map(|x| x / norm));
        } else {
            data.extend_from_slice(row);
        }
    }
    Ok(FeatureMatrix {
        n: features.n,
        d: features.d,
        data,
    })
}

/// The four dependency kinds a user can declare between labeling functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DependencyKind {
    /// The two functions tend to emit the same label.
    Similar,
    /// `j` labels only where `i` does, and corrects `i`'s errors.
    Fixing,
    /// `j` labels only where `i` does, and confirms `i`'s correct labels.
    Reinforcing,
    /// The two functions rarely both fire.
    Exclusive,
}

impl DependencyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DependencyKind::Similar => "similar",
            DependencyKind::Fixing => "fixes",
            DependencyKind::Reinforcing => "reinforces",
            DependencyKind::Exclusive => "excludes",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "similar" => Ok(DependencyKind::Similar),
            "fixes" => Ok(DependencyKind::Fixing),
            "reinforces" => Ok(DependencyKind::Reinforcing),
            "excludes" => Ok(DependencyKind::Exclusive),
            other => Err(Error::Invalid(format!(
                "unknown dependency kind '{other}' (expected similar|fixes|reinforces|excludes)"
            ))),
        }
    }
}

/// A directed dependency edge between labeling functions `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DependencyEdge {
    pub kind: DependencyKind,
    pub i: usize,
    pub j: usize,
}

impl DependencyEdge {
    pub fn new(kind: DependencyKind, i: usize, j: usize) -> Result<Self> {
        if i == j {
            return Err(Error::Invalid(format!(
                "dependency edge must join distinct functions, got ({i},{j})"
            )));
        }
        Ok(DependencyEdge { kind, i, j })
    }

    pub fn check_against(&self, m: usize) -> Result<()> {
        if self.i >= m || self.j >= m {
            return Err(Error::Invalid(format!(
                "dependency edge ({},{}) out of range for m={m}",
                self.i, self.j
            )));
        }
        Ok(())
    }
}

/// Summary statistics of a label matrix.
///
/// `coverage` is the fraction of rows with at least one label, `overlap` the
/// fraction with more than one label (regardless of agreement), `conflict`
/// the fraction carrying two labels of opposite sign.
#[derive(Debug, Clone, PartialEq)]
pub struct LfStats {
    pub coverage: f64,
    pub overlap: f64,
    pub conflict: f64,
    pub per_lf_coverage: Vec<f64>,
}

/// Computes coverage / overlap / conflict plus per-function coverage.
pub fn compute_lf_stats(labels: &LabelMatrix) -> LfStats {
    let n = labels.n();
    let mut covered = 0usize;
    let mut overlapped = 0usize;
    let mut conflicted = 0usize;
    let mut per_lf = vec![0usize; labels.m()];
    for r in 0..n {
        let mut count = 0usize;
        let mut has_pos = false;
        let mut has_neg = false;
        for (c, v) in labels.row(r) {
            count += 1;
            per_lf[c] += 1;
            if v > 0 {
                has_pos = true;
            } else {
                has_neg = true;
            }
        }
        if count >= 1 {
            covered += 1;
        }
        if count >= 2 {
            overlapped += 1;
        }
        if has_pos && has_neg {
            conflicted += 1;
        }
    }
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    LfStats {
        coverage: frac(covered),
        overlap: frac(overlapped),
        conflict: frac(conflicted),
        per_lf_coverage: per_lf.into_iter().map(frac).collect(),
    }
}
