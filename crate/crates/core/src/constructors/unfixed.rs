//! Optimal mechanism over `U` for concentrating, convex error weights.
//!
//! The optimum is `sum_l omega_l Sigma_l e_{col(l)}^T`: each weighted
//! single-peaked scale is placed in one column, and the placement is monotone
//! in `l`. A single left-to-right sweep finds it in `O(n^2)`.

use crate::counts::{PrivacyParam, TransitionMatrix};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::metrics::{is_rowwise_concentrating, is_rowwise_convex};
use crate::scalar::{self, Scalar};
use crate::scales::{row_weights_closed_form, scale_from_pattern, single_peaked_pattern};

/// Optimal matrix and the column each weighted scale was placed in.
#[derive(Clone, Debug, PartialEq)]
pub struct UnfixedOutput<S> {
    pub matrix: TransitionMatrix<S>,
    pub placement: Vec<usize>,
}

/// Minimizes `<W, T>` over `U`.
///
/// `W` must be row-wise concentrating and row-wise convex.
pub fn unfixed_optimum_constructor<S: Scalar>(w: &Matrix<S>, p: &PrivacyParam<S>) -> Result<UnfixedOutput<S>> {
    let n = w.rows();
    if n == 0 || w.cols() != n {
        return invalid("weight matrix must be square and non-empty");
    }
    if !is_rowwise_concentrating(w) {
        return invalid("weight matrix is not row-wise concentrating");
    }
    if !is_rowwise_convex(w) {
        return invalid("weight matrix is not row-wise convex");
    }
    let omega = row_weights_closed_form(n, p)?;
    let columns: Vec<Vec<S>> = (0..n).map(|j| w.column(j)).collect();
    let mut a = Matrix::zeros(n, n);
    let mut placement = Vec::with_capacity(n);
    let mut j = 0;
    let mut l = 0;
    let mut sigma = scale_from_pattern(&single_peaked_pattern(0, n)?, p);
    while l < n {
        let sv = sigma.values();
        let cur = omega[l].clone() * &scalar::dot(&columns[j], sv);
        let next_is_worse = j + 1 == n || omega[l].clone() * &scalar::dot(&columns[j + 1], sv) > cur;
        if next_is_worse {
            for (i, s) in sv.iter().enumerate() {
                *a.get_mut(i, j) += &(omega[l].clone() * s);
            }
            placement.push(j);
            l += 1;
            if l < n {
                sigma = scale_from_pattern(&single_peaked_pattern(l, n)?, p);
            }
        } else {
            j += 1;
        }
    }
    Ok(UnfixedOutput { matrix: TransitionMatrix::new(a)?, placement })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{build_weight_matrix, ErrorKind};
    use crate::scalar::{rat, Rational};

    #[test]
    fn uniform_n3_example() {
        let p = PrivacyParam::from_lambda(rat(2, 1)).unwrap();
        let w = build_weight_matrix(ErrorKind::Ead, &[rat(1, 3), rat(1, 3), rat(1, 3)]);
        let out = unfixed_optimum_constructor(&w, &p).unwrap();
        let want: Vec<Vec<Rational>> = vec![
            vec![rat(2, 3), rat(1, 6), rat(1, 6)],
            vec![rat(1, 3), rat(1, 3), rat(1, 3)],
            vec![rat(1, 6), rat(1, 6), rat(2, 3)],
        ];
        assert_eq!(out.matrix.matrix().to_rows(), want);
        assert_eq!(out.placement, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_invalid_weights() {
        let p = PrivacyParam::from_epsilon(1.0).unwrap();
        let w = Matrix::from_rows(vec![vec![0.0, 2.0, 1.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]);
        let err = unfixed_optimum_constructor(&w, &p).unwrap_err().to_string();
        assert!(err.contains("concentrating"));
        let w = Matrix::from_rows(vec![vec![0.0, 2.0, 3.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]);
        let err = unfixed_optimum_constructor(&w, &p).unwrap_err().to_string();
        assert!(err.contains("convex"));
    }
}
