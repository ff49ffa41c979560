//! Optimal mechanisms by linear programming over `F` and `U`.

use crate::counts::{CountDistribution, PrivacyParam, TransitionMatrix};
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::simplex::{solve_lp, LinearProgram};

/// Largest `n` accepted by the LP constructors by default.
pub const LP_MAX_N: usize = 32;

fn base_program<S: Scalar>(w: &Matrix<S>, p: &PrivacyParam<S>) -> LinearProgram<S> {
    let n = w.rows();
    let idx = |i: usize, j: usize| i * n + j;
    let mut lp = LinearProgram::new(n * n);
    lp.objective = w.data().to_vec();
    for i in 0..n {
        let mut row = vec![S::zero(); n * n];
        for j in 0..n {
            row[idx(i, j)] = S::one();
        }
        lp.add_eq(row, S::one());
    }
    let neg_lambda = -p.lambda().clone();
    for j in 0..n {
        for i in 0..n.saturating_sub(1) {
            for (hi, lo) in [(i, i + 1), (i + 1, i)] {
                let mut row = vec![S::zero(); n * n];
                row[idx(hi, j)] = S::one();
                row[idx(lo, j)] = neg_lambda.clone();
                lp.add_le(row, S::zero());
            }
        }
    }
    lp
}

fn check_size(n: usize, w: &Matrix<impl Scalar>, max_n: usize) -> Result<()> {
    if w.rows() != n || w.cols() != n {
        return invalid(format!("weight matrix must be {n}x{n}"));
    }
    if n > max_n {
        return Err(Error::Capacity(format!(
            "LP constructor limited to n <= {max_n} (got {n}); use the heuristic constructor"
        )));
    }
    Ok(())
}

fn to_matrix<S: Scalar>(x: Vec<S>, n: usize) -> Result<TransitionMatrix<S>> {
    let x = x.into_iter().map(|v| if v.is_negative() { S::zero() } else { v }).collect::<Vec<_>>();
    TransitionMatrix::from_rows(x.chunks(n).map(<[S]>::to_vec).collect())
}

/// Member of `F` minimizing `<W, T>`.
pub fn lp_fixed_point_constructor<S: Scalar>(
    z: &CountDistribution<S>,
    p: &PrivacyParam<S>,
    w: &Matrix<S>,
) -> Result<TransitionMatrix<S>> {
    lp_fixed_point_constructor_capped(z, p, w, LP_MAX_N)
}

/// [`lp_fixed_point_constructor`] with an explicit size cap.
pub fn lp_fixed_point_constructor_capped<S: Scalar>(
    z: &CountDistribution<S>,
    p: &PrivacyParam<S>,
    w: &Matrix<S>,
    max_n: usize,
) -> Result<TransitionMatrix<S>> {
    let n = z.n();
    check_size(n, w, max_n)?;
    let mut lp = base_program(w, p);
    // Fixed-point rows; the last one follows from the row sums and is omitted.
    for j in 0..n - 1 {
        let mut row = vec![S::zero(); n * n];
        for (i, zi) in z.probs().iter().enumerate() {
            row[i * n + j] = zi.clone();
        }
        lp.add_eq(row, z.probs()[j].clone());
    }
    let mut x = solve_lp(&lp)?.x;
    // A column with `z_j = 0` must vanish: the fixed-point row zeroes it
    // wherever `z_i > 0`, and neighbor indistinguishability spreads the zero.
    // Clear the rounding noise float pivoting leaves there.
    for (j, zj) in z.probs().iter().enumerate() {
        if zj.is_zero() {
            for i in 0..n {
                x[i * n + j] = S::zero();
            }
        }
    }
    to_matrix(x, n)
}

/// Member of `U` minimizing `<W, T>`.
pub fn lp_unfixed_constructor<S: Scalar>(n: usize, p: &PrivacyParam<S>, w: &Matrix<S>) -> Result<TransitionMatrix<S>> {
    if n == 0 {
        return invalid("n must be positive");
    }
    check_size(n, w, LP_MAX_N)?;
    to_matrix(solve_lp(&base_program(w, p))?.x, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::membership::{in_f, in_u};
    use crate::metrics::{build_weight_matrix, count_error, ErrorKind};
    use crate::scalar::rat;

    #[test]
    fn uniform_n3_optimum() {
        let p = PrivacyParam::from_lambda(rat(2, 1)).unwrap();
        let z = CountDistribution::new(vec![rat(1, 3); 3]).unwrap();
        let w = build_weight_matrix(ErrorKind::Ead, z.probs());
        let t = lp_fixed_point_constructor(&z, &p, &w).unwrap();
        assert!(in_f(&t, z.probs(), &p, 0.0));
        let u = lp_unfixed_constructor(3, &p, &w).unwrap();
        assert!(in_u(&u, &p, 0.0));
        // Uniform z: the unfixed optimum is the truncated geometric, error 5/9.
        assert_eq!(count_error(&w, &u).unwrap(), rat(5, 9));
        assert!(count_error(&w, &t).unwrap() >= rat(5, 9));
    }

    #[test]
    fn guard_points_to_heuristic() {
        let p = PrivacyParam::from_epsilon(1.0).unwrap();
        let z = CountDistribution::new(vec![1.0 / 40.0; 40]).unwrap();
        let w = build_weight_matrix(ErrorKind::Ead, z.probs());
        let err = lp_fixed_point_constructor(&z, &p, &w).unwrap_err();
        assert!(matches!(err, Error::Capacity(ref m) if m.contains("heuristic")));
    }
}
