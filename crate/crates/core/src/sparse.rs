//! Row-compressed complex matrices for modulation-domain channels.
//!
//! Integer-grid channels in the DAFT and DD domains have a handful of nonzeros
//! per row, so the simulator and the message-passing detector keep them in this
//! form. Dense [`CMat`] remains the reference representation in tests.

use crate::error::{Error, Result};
use crate::matrix::{CMat, CVec};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMat { rows, cols, entries: vec![Vec::new(); rows] }
    }

    /// Keeps entries with `|a| > abs_eps`.
    pub fn from_dense(m: &CMat<f64>, abs_eps: f64) -> Self {
        let mut s = SparseMat::zeros(m.rows(), m.cols());
        for r in 0..m.rows() {
            for (c, v) in m.row(r).iter().enumerate() {
                if v.norm() > abs_eps {
                    s.entries[r].push((c, *v));
                }
            }
        }
        s
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[(usize, Complex64)] {
        &self.entries[r]
    }

    /// Adds `v` at `(r, c)`, merging with an existing entry in that cell.
    pub fn push(&mut self, r: usize, c: usize, v: Complex64) {
        debug_assert!(r < self.rows && c < self.cols);
        let row = &mut self.entries[r];
        match row.iter_mut().find(|e| e.0 == c) {
            Some(e) => e.1 += v,
            None => row.push((c, v)),
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn max_row_degree(&self) -> usize {
        self.entries.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().map(|e| e.1.norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> CMat<f64> {
        let mut m = CMat::zeros(self.rows, self.cols);
        for (r, row) in self.entries.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &CVec<f64>) -> CVec<f64> {
        assert_eq!(x.len(), self.cols, "sparse mul_vec dimension mismatch");
        CVec::from_fn(self.rows, |r| self.entries[r].iter().map(|&(c, v)| v * x[c]).sum())
    }

    pub fn matmul(&self, rhs: &SparseMat) -> Result<SparseMat> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension { expected: self.cols, found: rhs.rows });
        }
        let mut out = SparseMat::zeros(self.rows, rhs.cols);
        for (r, row) in self.entries.iter().enumerate() {
            for &(k, a) in row {
                for &(c, b) in &rhs.entries[k] {
                    out.push(r, c, a * b);
                }
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, rhs: &SparseMat) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension { expected: self.rows * self.cols, found: rhs.rows * rhs.cols });
        }
        for (r, row) in rhs.entries.iter().enumerate() {
            for &(c, v) in row {
                self.push(r, c, v);
            }
        }
        Ok(())
    }

    pub fn scale(&self, a: Complex64) -> SparseMat {
        let entries = self
            .entries
            .iter()
            .map(|row| row.iter().map(|&(c, v)| (c, v * a)).collect())
            .collect();
        SparseMat { rows: self.rows, cols: self.cols, entries }
    }

    pub fn vstack(blocks: &[SparseMat]) -> Result<SparseMat> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let mut entries = Vec::new();
        for b in blocks {
            if b.cols != cols {
                return Err(Error::Dimension { expected: cols, found: b.cols });
            }
            entries.extend(b.entries.iter().cloned());
        }
        Ok(SparseMat { rows: entries.len(), cols, entries })
    }

    /// Drops entries smaller than `rel_eps` times the largest magnitude.
    pub fn pruned(&self, rel_eps: f64) -> SparseMat {
        let cut = rel_eps * self.max_abs();
        let entries = self
            .entries
            .iter()
            .map(|row| row.iter().copied().filter(|e| e.1.norm() >= cut && e.1.norm() > 0.0).collect())
            .collect();
        SparseMat { rows: self.rows, cols: self.cols, entries }
    }

    /// Keeps the listed columns, renumbered in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> SparseMat {
        let mut map = vec![usize::MAX; self.cols];
        for (new, &old) in cols.iter().enumerate() {
            map[old] = new;
        }
        let entries = self
            .entries
            .iter()
            .map(|row| row.iter().filter(|e| map[e.0] != usize::MAX).map(|&(c, v)| (map[c], v)).collect())
            .collect();
        SparseMat { rows: self.rows, cols: cols.len(), entries }
    }

    /// Column `c` as a dense vector.
    pub fn column(&self, c: usize) -> CVec<f64> {
        CVec::from_fn(self.rows, |r| self.entries[r].iter().filter(|e| e.0 == c).map(|e| e.1).sum())
    }

    /// Column-wise view: for each column, the `(row, value)` pairs.
    pub fn columns(&self) -> Vec<Vec<(usize, Complex64)>> {
        let mut cols = vec![Vec::new(); self.cols];
        for (r, row) in self.entries.iter().enumerate() {
            for &(c, v) in row {
                cols[c].push((r, v));
            }
        }
        cols
    }
}
