//! Compressed sparse row storage for binary design matrices.
//!
//! Every stored entry has the logical value `scale[j]` of its column, so a
//! matrix without scales is a plain 0/1 indicator matrix. Scales let a block
//! of columns be reweighted without copying or densifying the pattern.

use std::io::{BufRead, Write};

use crate::error::{structural, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseBinaryDesign {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    scales: Option<Vec<f64>>,
}

/// Maps the columns of a sliced matrix back to the columns they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    original: Vec<usize>,
    n_original: usize,
}

impl ColumnMap {
    pub fn identity(n: usize) -> Self {
        ColumnMap {
            original: (0..n).collect(),
            n_original: n,
        }
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    /// Number of columns in the matrix that was sliced.
    pub fn n_original(&self) -> usize {
        self.n_original
    }

    pub fn to_original(&self, new_col: usize) -> usize {
        self.original[new_col]
    }

    pub fn originals(&self) -> &[usize] {
        &self.original
    }

    /// Inverse lookup; `None` when the original column was dropped.
    pub fn to_new(&self, original_col: usize) -> Option<usize> {
        self.original.iter().position(|&c| c == original_col)
    }

    /// Composes two slices: `self` maps B -> A and `inner` maps C -> B.
    pub fn compose(&self, inner: &ColumnMap) -> ColumnMap {
        ColumnMap {
            original: inner.original.iter().map(|&c| self.original[c]).collect(),
            n_original: self.n_original,
        }
    }
}

/// Column-major adjacency of the stored pattern, built once per fit.
#[derive(Debug, Clone)]
pub struct ColumnIndex {
    col_offsets: Vec<usize>,
    row_indices: Vec<usize>,
}

impl ColumnIndex {
    pub fn rows_of(&self, col: usize) -> &[usize] {
        &self.row_indices[self.col_offsets[col]..self.col_offsets[col + 1]]
    }

    pub fn count(&self, col: usize) -> usize {
        self.col_offsets[col + 1] - self.col_offsets[col]
    }
}

impl SparseBinaryDesign {
    /// Builds a matrix from per-row column sets. Each set must be strictly
    /// increasing and bounded by `n_cols`.
    pub fn from_rows<R: AsRef<[usize]>>(rows: &[R], n_cols: usize) -> Result<Self> {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        let nnz = rows.iter().map(|r| r.as_ref().len()).sum();
        let mut col_indices = Vec::with_capacity(nnz);
        for row in rows {
            col_indices.extend_from_slice(row.as_ref());
            row_offsets.push(col_indices.len());
        }
        Self::from_raw_parts(rows.len(), n_cols, row_offsets, col_indices)
    }

    pub fn from_raw_parts(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(structural(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets[n_rows] != col_indices.len() {
            return Err(structural("row_offsets must start at 0 and end at nnz"));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(structural(format!("row_offsets decreases at row {i}")));
            }
            let row = &col_indices[lo..hi];
            for (k, &c) in row.iter().enumerate() {
                if c >= n_cols {
                    return Err(structural(format!(
                        "row {i}: column {c} out of range for {n_cols} columns"
                    )));
                }
                if k > 0 && row[k - 1] >= c {
                    return Err(structural(format!(
                        "row {i}: column ids must be strictly increasing"
                    )));
                }
            }
        }
        Ok(SparseBinaryDesign {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            scales: None,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseBinaryDesign {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            scales: None,
        }
    }

    /// Attaches per-column scale factors; stored entries then take value `scales[j]`.
    pub fn with_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        if scales.len() != self.n_cols {
            return Err(structural(format!(
                "got {} scale factors for {} columns",
                scales.len(),
                self.n_cols
            )));
        }
        if scales.iter().any(|s| !s.is_finite()) {
            return Err(structural("scale factors must be finite"));
        }
        self.scales = Some(scales);
        Ok(self)
    }

    pub fn without_scales(mut self) -> Self {
        self.scales = None;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    #[inline]
    pub fn scale(&self, col: usize) -> f64 {
        match &self.scales {
            Some(s) => s[col],
            None => 1.0,
        }
    }

    pub fn scales(&self) -> Option<&[f64]> {
        self.scales.as_deref()
    }

    /// Logical value of entry (i, j).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.row(i).binary_search(&j).is_ok() {
            self.scale(j)
        } else {
            0.0
        }
    }

    /// Number of rows storing each column (document frequency for bag-of-words data).
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_cols];
        for &c in &self.col_indices {
            counts[c] += 1;
        }
        counts
    }

    pub fn column_index(&self) -> ColumnIndex {
        let counts = self.column_counts();
        let mut col_offsets = Vec::with_capacity(self.n_cols + 1);
        col_offsets.push(0);
        for c in &counts {
            col_offsets.push(col_offsets.last().unwrap() + c);
        }
        let mut cursor = col_offsets[..self.n_cols].to_vec();
        let mut row_indices = vec![0; self.nnz()];
        for i in 0..self.n_rows {
            for &c in self.row(i) {
                row_indices[cursor[c]] = i;
                cursor[c] += 1;
            }
        }
        ColumnIndex {
            col_offsets,
            row_indices,
        }
    }

    /// `out[j] = sum over stored (i, j) of scale[j] * v[i]`.
    pub fn transpose_dot(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_rows {
            return Err(structural(format!(
                "transpose_dot: vector has length {}, matrix has {} rows",
                v.len(),
                self.n_rows
            )));
        }
        let mut out = vec![0.0; self.n_cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for &c in self.row(i) {
                out[c] += vi;
            }
        }
        if let Some(scales) = &self.scales {
            for (o, s) in out.iter_mut().zip(scales) {
                *o *= s;
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `X * beta` for a dense `beta`.
    pub fn dot(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.n_cols {
            return Err(structural(format!(
                "dot: vector has length {}, matrix has {} columns",
                beta.len(),
                self.n_cols
            )));
        }
        Ok((0..self.n_rows)
            .map(|i| self.row(i).iter().map(|&c| self.scale(c) * beta[c]).sum())
            .collect())
    }

    /// Keeps the listed columns, renumbered in the order given.
    pub fn column_slice(&self, keep: &[usize]) -> Result<(Self, ColumnMap)> {
        let mut new_id = vec![usize::MAX; self.n_cols];
        for (k, &c) in keep.iter().enumerate() {
            if c >= self.n_cols {
                return Err(structural(format!(
                    "column_slice: column {c} out of range for {} columns",
                    self.n_cols
                )));
            }
            if new_id[c] != usize::MAX {
                return Err(structural(format!("column_slice: column {c} listed twice")));
            }
            new_id[c] = k;
        }
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut buf = Vec::new();
        for i in 0..self.n_rows {
            buf.clear();
            buf.extend(
                self.row(i)
                    .iter()
                    .map(|&c| new_id[c])
                    .filter(|&c| c != usize::MAX),
            );
            buf.sort_unstable();
            col_indices.extend_from_slice(&buf);
            row_offsets.push(col_indices.len());
        }
        let scales = self
            .scales
            .as_ref()
            .map(|s| keep.iter().map(|&c| s[c]).collect());
        let sliced = SparseBinaryDesign {
            n_rows: self.n_rows,
            n_cols: keep.len(),
            row_offsets,
            col_indices,
            scales,
        };
        let map = ColumnMap {
            original: keep.to_vec(),
            n_original: self.n_cols,
        };
        Ok((sliced, map))
    }

    /// Gathers rows by index; repeated indices are allowed (bootstrap resamples).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        for &i in rows {
            if i >= self.n_rows {
                return Err(structural(format!(
                    "select_rows: row {i} out of range for {} rows",
                    self.n_rows
                )));
            }
            col_indices.extend_from_slice(self.row(i));
            row_offsets.push(col_indices.len());
        }
        Ok(SparseBinaryDesign {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            scales: self.scales.clone(),
        })
    }

    /// Writes the plain-text pattern format: a `n_rows n_cols` header line,
    /// then one line of space-separated column ids per row. Scales are not stored.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.n_rows, self.n_cols)?;
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            for (k, c) in row.iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                line.push_str(&c.to_string());
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::Data(format!("reading design: {e}")))?,
            None => return Err(Error::Data("empty design file".into())),
        };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Data(format!("bad design header {header:?}")))?;
        let [n_rows, n_cols] = dims[..] else {
            return Err(Error::Data(format!("bad design header {header:?}")));
        };
        let mut rows = Vec::with_capacity(n_rows);
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Data(format!("reading design: {e}")))?;
            if k >= n_rows {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Data(format!(
                    "design file has more than {n_rows} rows"
                )));
            }
            let row: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Data(format!("bad column id on design row {k}")))?;
            rows.push(row);
        }
        if rows.len() != n_rows {
            return Err(Error::Data(format!(
                "design file has {} rows, header says {n_rows}",
                rows.len()
            )));
        }
        Self::from_rows(&rows, n_cols)
    }
}
