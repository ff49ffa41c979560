//! Dense matrices, rank and linear solves over a [`Scalar`].
//!
//! Exact mode uses Gaussian elimination over rationals. Float rank uses the
//! singular values from `nalgebra`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, S::one());
        }
        m
    }

    /// Builds from nested rows; all rows must have the same length.
    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    /// Builds from columns; all columns must have the same length.
    pub fn from_columns(columns: &[Vec<S>]) -> Self {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged columns");
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut S {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(l, j);
                    if !b.is_zero() {
                        let prod = a.clone() * b;
                        *out.get_mut(i, j) += &prod;
                    }
                }
            }
        }
        out
    }

    /// Row vector times matrix, `v * self`.
    pub fn left_mul(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.rows, "dimension mismatch");
        let mut out = vec![S::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                let a = self.get(i, j);
                if !a.is_zero() {
                    *o += &(vi.clone() * a);
                }
            }
        }
        out
    }

    /// Entrywise conversion to floats.
    pub fn to_f64(&self) -> Matrix<f64> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(Scalar::to_f64).collect() }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix<S>) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.clone() - b).abs().to_f64())
            .fold(0.0, f64::max)
    }
}

/// Rank of the matrix whose rows are `rows` (each of length `ncols`).
///
/// Float mode counts singular values above `rel_tol * sigma_max`.
pub fn rank<S: Scalar>(rows: &[Vec<S>], ncols: usize, rel_tol: f64) -> usize {
    if rows.is_empty() || ncols == 0 {
        return 0;
    }
    if S::EXACT {
        exact_rank(rows.to_vec(), ncols)
    } else {
        svd_rank(rows, ncols, rel_tol)
    }
}

fn svd_rank<S: Scalar>(rows: &[Vec<S>], ncols: usize, rel_tol: f64) -> usize {
    let m = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j].to_f64());
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

fn exact_rank<S: Scalar>(mut rows: Vec<Vec<S>>, ncols: usize) -> usize {
    let mut rank = 0;
    for c in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank][c].clone();
        for r in rank + 1..rows.len() {
            if rows[r][c].is_zero() {
                continue;
            }
            let factor = rows[r][c].clone() / &pivot;
            let (head, tail) = rows.split_at_mut(r);
            let prow = &head[rank];
            let row = &mut tail[0];
            for k in c..ncols {
                if !prow[k].is_zero() {
                    row[k] -= &(factor.clone() * &prow[k]);
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Reduced row echelon form (exact arithmetic). Returns the non-zero rows and
/// their pivot columns.
pub fn rref<S: Scalar>(mut rows: Vec<Vec<S>>, ncols: usize) -> (Vec<Vec<S>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut rank = 0;
    for c in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = S::one() / &rows[rank][c];
        for k in c..ncols {
            rows[rank][k] *= &inv;
        }
        let prow = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == rank || row[c].is_zero() {
                continue;
            }
            let factor = row[c].clone();
            for k in c..ncols {
                if !prow[k].is_zero() {
                    row[k] -= &(factor.clone() * &prow[k]);
                }
            }
        }
        pivots.push(c);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rows.truncate(rank);
    (rows, pivots)
}

/// Solves `a x = b` for `x` when the solution exists and is unique.
///
/// `a` may have more rows than columns provided the system is consistent.
/// Returns `None` when the columns are dependent or the system is
/// inconsistent. Float mode uses partial pivoting with absolute tolerance `tol`.
pub fn solve_unique<S: Scalar>(a: &[Vec<S>], b: &[S], ncols: usize, tol: f64) -> Option<Vec<S>> {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    let t = S::tol(tol);
    let mut rows: Vec<Vec<S>> = a
        .iter()
        .zip(b)
        .map(|(r, v)| {
            let mut row = r.clone();
            row.push(v.clone());
            row
        })
        .collect();
    let m = rows.len();
    let mut pivots = Vec::with_capacity(ncols);
    let mut rank = 0;
    for c in 0..ncols {
        let p = if S::EXACT {
            (rank..m).find(|&r| !rows[r][c].is_zero())
        } else {
            (rank..m)
                .filter(|&r| rows[r][c].abs() > t)
                .max_by(|&x, &y| rows[x][c].abs().partial_cmp(&rows[y][c].abs()).unwrap())
        };
        rows.swap(rank, p?);
        let prow = rows[rank].clone();
        let pivot = prow[c].clone();
        for r in 0..m {
            if r == rank || rows[r][c].is_zero() {
                continue;
            }
            let factor = rows[r][c].clone() / &pivot;
            let row = &mut rows[r];
            for k in c..=ncols {
                if !prow[k].is_zero() {
                    row[k] -= &(factor.clone() * &prow[k]);
                }
            }
        }
        pivots.push(c);
        rank += 1;
    }
    for row in rows.iter().skip(rank) {
        if row[ncols].abs() > t {
            return None;
        }
    }
    let mut x = vec![S::zero(); ncols];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = rows[r][ncols].clone() / &rows[r][c];
    }
    Some(x)
}
