//! Minimal compressed-row matrix for the global operators.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// Adds a dense block with the given global row and column indices.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize], block: &DMatrix<f64>) {
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                self.push(i, j, block[(a, b)]);
            }
        }
    }
}

/// Row-compressed storage; duplicate entries are summed in insertion order,
/// so the result does not depend on thread scheduling upstream.
#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(t: &Triplets) -> Self {
        let mut order: Vec<usize> = (0..t.entries.len()).collect();
        order.sort_by_key(|&n| (t.entries[n].0, t.entries[n].1));
        let mut row_ptr = vec![0; t.nrows + 1];
        let mut col_idx = Vec::with_capacity(t.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.entries.len());
        let mut last = None;
        for n in order {
            let (i, j, v) = t.entries[n];
            if last == Some((i, j)) {
                *values.last_mut().expect("entry present") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..t.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            nrows: t.nrows,
            ncols: t.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols);
        DVector::from_fn(self.nrows, |i, _| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|n| self.values[n] * x[self.col_idx[n]])
                .sum()
        })
    }

    pub fn tr_mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut out = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            for n in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.col_idx[n]] += self.values[n] * x[i];
            }
        }
        out
    }

    /// Entrywise absolute value, used for round-off scales.
    pub fn abs(&self) -> Csr {
        Csr {
            values: self.values.iter().map(|v| v.abs()).collect(),
            ..self.clone()
        }
    }

    /// Dense copy of the submatrix with the given rows and columns.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for n in self.row_ptr[i]..self.row_ptr[i + 1] {
                if let Some(b) = cols.iter().position(|&j| j == self.col_idx[n]) {
                    out[(a, b)] += self.values[n];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for n in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[n])] += self.values[n];
            }
        }
        m
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |n| (i, self.col_idx[n], self.values[n]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_products_agree_with_dense() {
        let mut t = Triplets::new(3, 2);
        t.push(2, 1, 1.5);
        t.push(0, 0, 1.0);
        t.push(2, 1, 0.5);
        t.push(1, 0, -3.0);
        let a = Csr::from_triplets(&t);
        assert_eq!(a.nnz(), 3);
        let d = a.to_dense();
        assert_eq!(d[(2, 1)], 2.0);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(a.mul_vec(&x), &d * &x);
        let y = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        assert_eq!(a.tr_mul_vec(&y), d.transpose() * &y);
    }
}
