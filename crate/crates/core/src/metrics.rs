//! Error weights, expected count error and distances between distributions.

use serde::{Deserialize, Serialize};

use crate::counts::TransitionMatrix;
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Which count error a weight matrix measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Expected absolute deviation: `w_ij = z_i |i - j|`.
    Ead,
    /// Mean squared error: `w_ij = z_i (i - j)^2`.
    Mse,
}

impl std::str::FromStr for ErrorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ead" => Ok(ErrorKind::Ead),
            "mse" => Ok(ErrorKind::Mse),
            other => invalid(format!("unknown error kind {other:?}")),
        }
    }
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Ead => "ead",
            ErrorKind::Mse => "mse",
        }
    }
}

/// Weight matrix `W` for the chosen error and input distribution `z`.
pub fn build_weight_matrix<S: Scalar>(kind: ErrorKind, z: &[S]) -> Matrix<S> {
    let n = z.len();
    let mut w = Matrix::zeros(n, n);
    for (i, zi) in z.iter().enumerate() {
        for j in 0..n {
            let d = i.abs_diff(j) as i64;
            let f = match kind {
                ErrorKind::Ead => d,
                ErrorKind::Mse => d * d,
            };
            if f != 0 {
                w.set(i, j, zi.clone() * &S::from_int(f));
            }
        }
    }
    w
}

/// Expected count error `<W, T> = sum_ij w_ij t_ij`.
pub fn count_error<S: Scalar>(w: &Matrix<S>, t: &TransitionMatrix<S>) -> Result<S> {
    let m = t.matrix();
    if (w.rows(), w.cols()) != (m.rows(), m.cols()) {
        return invalid("weight and transition matrices differ in size");
    }
    let mut total = S::zero();
    for (a, b) in w.data().iter().zip(m.data()) {
        if !a.is_zero() && !b.is_zero() {
            total += &(a.clone() * b);
        }
    }
    Ok(total)
}

/// Relative slack for the float-mode weight checks.
const WEIGHT_TOL: f64 = 1e-12;

fn row_slack<S: Scalar>(row: &[S]) -> S {
    S::tol(WEIGHT_TOL) * &crate::scalar::max_abs(row)
}

/// Each row is non-decreasing in `|i - j|`: an entry never exceeds any entry
/// that is strictly farther from the diagonal.
pub fn is_rowwise_concentrating<S: Scalar>(w: &Matrix<S>) -> bool {
    let n = w.cols();
    for i in 0..w.rows() {
        let slack = row_slack(w.row(i));
        // Largest entry within distance < d, compared with entries at distance d.
        let mut closer_max = w.get(i, i.min(n - 1)).clone();
        for d in 1..n {
            let mut ring_max: Option<S> = None;
            for j in [i.checked_sub(d), i.checked_add(d).filter(|&j| j < n)].into_iter().flatten() {
                let v = w.get(i, j);
                if !crate::scalar::le_tol(&closer_max, v, &slack) {
                    return false;
                }
                if ring_max.as_ref().is_none_or(|m| v > m) {
                    ring_max = Some(v.clone());
                }
            }
            if let Some(m) = ring_max {
                if m > closer_max {
                    closer_max = m;
                }
            }
        }
    }
    true
}

/// Each row has non-decreasing increments `w_{i,j+1} - w_{i,j}`.
pub fn is_rowwise_convex<S: Scalar>(w: &Matrix<S>) -> bool {
    (0..w.rows()).all(|i| {
        let row = w.row(i);
        let slack = row_slack(row);
        row.windows(3).all(|t| crate::scalar::le_tol(&(t[1].clone() - &t[0]), &(t[2].clone() - &t[1]), &slack))
    })
}

/// Variance of `hat z_j` under the mechanism:
/// `(1/N) sum_l zeta_l t_lj (1 - t_lj)` for each output `j`.
pub fn analytic_output_variance(zeta: &[f64], t: &TransitionMatrix<f64>, n_records: u64) -> Vec<f64> {
    let n = t.n();
    (0..n)
        .map(|j| {
            zeta.iter()
                .enumerate()
                .map(|(l, zl)| {
                    let tl = *t.get(l, j);
                    zl * tl * (1.0 - tl)
                })
                .sum::<f64>()
                / n_records as f64
        })
        .collect()
}

/// Distances between two distributions on `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionDistances {
    pub wasserstein1: f64,
    pub ks: f64,
    pub tv: f64,
}

/// Wasserstein-1 (sum of absolute CDF gaps), Kolmogorov-Smirnov (largest CDF
/// gap) and total variation (half the L1 distance).
pub fn distribution_distance(a: &[f64], b: &[f64]) -> Result<DistributionDistances> {
    if a.len() != b.len() {
        return invalid("distributions differ in length");
    }
    let mut ca = 0.0;
    let mut cb = 0.0;
    let mut w = 0.0;
    let mut ks: f64 = 0.0;
    let mut l1 = 0.0;
    for (x, y) in a.iter().zip(b) {
        ca += x;
        cb += y;
        let gap = (ca - cb).abs();
        w += gap;
        ks = ks.max(gap);
        l1 += (x - y).abs();
    }
    Ok(DistributionDistances { wasserstein1: w, ks, tv: 0.5 * l1 })
}
