//! Dense Gaussian elimination over F_p.

use crate::prime_field::PrimeContext;

/// Row-major square or rectangular matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u64>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    /// Matrix whose `j`-th column is `columns[j]` (each of length `rows`).
    pub fn from_columns(rows: usize, columns: &[Vec<u64>]) -> Self {
        let mut m = Matrix::zero(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate().take(rows) {
                m.data[i * m.cols + j] = v;
            }
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    /// Reduces to row echelon form in place; returns the pivot columns.
    fn echelon(&mut self, ctx: &PrimeContext, pivot_cols: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..pivot_cols {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            self.swap_rows(r, pr);
            let inv = ctx.inv(self.get(r, c)).expect("pivot is nonzero");
            for j in c..self.cols {
                let v = ctx.mul(self.data[r * self.cols + j], inv);
                self.data[r * self.cols + j] = v;
            }
            for i in 0..self.rows {
                let f = self.get(i, c);
                if i == r || f == 0 {
                    continue;
                }
                for j in c..self.cols {
                    let v = ctx.sub(self.get(i, j), ctx.mul(f, self.get(r, j)));
                    self.data[i * self.cols + j] = v;
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }
}

pub(crate) fn rank(ctx: &PrimeContext, m: &Matrix) -> usize {
    let mut m = m.clone();
    let cols = m.cols;
    m.echelon(ctx, cols).len()
}

/// Solves `a x = b_k` for each right-hand side; `None` when `a` is singular.
pub(crate) fn solve(ctx: &PrimeContext, a: &Matrix, rhs: &[Vec<u64>]) -> Option<Vec<Vec<u64>>> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut aug = Matrix::zero(n, n + rhs.len());
    for i in 0..n {
        for j in 0..n {
            aug.data[i * aug.cols + j] = a.get(i, j);
        }
        for (k, b) in rhs.iter().enumerate() {
            aug.data[i * aug.cols + n + k] = b[i];
        }
    }
    if aug.echelon(ctx, n).len() < n {
        return None;
    }
    Some(
        (0..rhs.len())
            .map(|k| (0..n).map(|i| aug.get(i, n + k)).collect())
            .collect(),
    )
}
