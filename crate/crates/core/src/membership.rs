//! Membership and extremeness tests for the mechanism polytopes.
//!
//! `U` is the set of row-stochastic matrices whose columns are neighbor
//! indistinguishable; `F` adds the fixed-point condition `z T = z`.

use crate::counts::{PrivacyParam, TransitionMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{self, Scalar};

/// Float tolerances; ignored in exact mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    /// Relative slack for membership checks.
    pub membership: f64,
    /// Singular values below `rank * sigma_max` count as zero.
    pub rank: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { membership: 1e-9, rank: 1e-8 }
    }
}

impl Tolerance {
    pub const EXACT: Tolerance = Tolerance { membership: 0.0, rank: 0.0 };
}

/// Which polytope a matrix is tested against.
#[derive(Clone, Copy, Debug)]
pub enum Polytope<'a, S> {
    U,
    F { z: &'a [S] },
}

impl<S> Polytope<'_, S> {
    fn name(&self) -> &'static str {
        match self {
            Polytope::U => "U",
            Polytope::F { .. } => "F",
        }
    }
}

/// `lambda^-1 v[i+1] <= v[i] <= lambda v[i+1]` for all `i`, with relative slack.
///
/// The slack is `tol * max|v|`, so the zero vector always passes.
pub fn neighbor_indistinguishable<S: Scalar>(v: &[S], p: &PrivacyParam<S>, tol: f64) -> bool {
    let slack = S::tol(tol) * &scalar::max_abs(v);
    let neg = -slack.clone();
    if v.iter().any(|x| *x < neg) {
        return false;
    }
    let lambda = p.lambda();
    v.windows(2).all(|w| {
        scalar::le_tol(&w[0], &(lambda.clone() * &w[1]), &slack)
            && scalar::le_tol(&w[1], &(lambda.clone() * &w[0]), &slack)
    })
}

/// Membership in `U`.
pub fn in_u<S: Scalar>(t: &TransitionMatrix<S>, p: &PrivacyParam<S>, tol: f64) -> bool {
    let n = t.n();
    let m = t.matrix();
    let abs_tol = S::tol(tol);
    let neg = -abs_tol.clone();
    for i in 0..n {
        let row = m.row(i);
        if row.iter().any(|x| *x < neg) {
            return false;
        }
        if !scalar::eq_tol(&scalar::sum(row), &S::one(), &abs_tol) {
            return false;
        }
    }
    (0..n).all(|j| neighbor_indistinguishable(&m.column(j), p, tol))
}

/// Membership in `F` for fixed point `z`.
pub fn in_f<S: Scalar>(t: &TransitionMatrix<S>, z: &[S], p: &PrivacyParam<S>, tol: f64) -> bool {
    if z.len() != t.n() || !in_u(t, p, tol) {
        return false;
    }
    let abs_tol = S::tol(tol);
    let image = t.push_forward(z);
    image.iter().zip(z).all(|(a, b)| scalar::eq_tol(a, b, &abs_tol))
}

fn member<S: Scalar>(t: &TransitionMatrix<S>, poly: &Polytope<'_, S>, p: &PrivacyParam<S>, tol: f64) -> bool {
    match poly {
        Polytope::U => in_u(t, p, tol),
        Polytope::F { z } => in_f(t, z, p, tol),
    }
}

/// Whether `t` is a vertex of the polytope.
///
/// Collects the constraints binding at `t` (row sums, fixed-point columns,
/// zero entries and tight neighbor ratios) and tests whether they have rank
/// `n^2`. Returns [`Error::NotMember`] if `t` is outside the polytope.
pub fn is_extreme<S: Scalar>(
    t: &TransitionMatrix<S>,
    poly: &Polytope<'_, S>,
    p: &PrivacyParam<S>,
    tol: Tolerance,
) -> Result<bool> {
    if !member(t, poly, p, tol.membership) {
        return Err(Error::NotMember(poly.name().to_string()));
    }
    let n = t.n();
    let blocks: Vec<Vec<Vec<S>>> = (0..n).map(|j| binding_block(t, j, poly, p, tol.membership)).collect();
    if S::EXACT {
        Ok(block_rank(&blocks, n) == n * n)
    } else {
        let full = assemble(&blocks, n);
        Ok(linalg::rank(&full, n * n, tol.rank) == n * n)
    }
}

/// Binding constraints local to column `j`, as vectors over rows `0..n`.
fn binding_block<S: Scalar>(
    t: &TransitionMatrix<S>,
    j: usize,
    poly: &Polytope<'_, S>,
    p: &PrivacyParam<S>,
    tol: f64,
) -> Vec<Vec<S>> {
    let n = t.n();
    let lambda = p.lambda();
    let unit = |i: usize| {
        let mut e = vec![S::zero(); n];
        e[i] = S::one();
        e
    };
    let mut rows = Vec::new();
    if let Polytope::F { z } = poly {
        rows.push(z.to_vec());
    }
    let zero_tol = S::tol(tol);
    for i in 0..n {
        if t.get(i, j).abs() <= zero_tol {
            rows.push(unit(i));
        }
    }
    for i in 0..n.saturating_sub(1) {
        let a = t.get(i, j);
        let b = t.get(i + 1, j);
        for (hi, lo, a, b) in [(i, i + 1, a, b), (i + 1, i, b, a)] {
            let scaled = lambda.clone() * b;
            let bound = if a.abs() > scaled.abs() { a.abs() } else { scaled.abs() };
            if scalar::eq_tol(a, &scaled, &(S::tol(tol) * &bound)) {
                let mut row = vec![S::zero(); n];
                row[hi] = S::one();
                row[lo] = -lambda.clone();
                rows.push(row);
            }
        }
    }
    rows
}

/// Full binding matrix over variables indexed `j * n + i`.
fn assemble<S: Scalar>(blocks: &[Vec<Vec<S>>], n: usize) -> Vec<Vec<S>> {
    let mut full = Vec::new();
    for i in 0..n {
        let mut row = vec![S::zero(); n * n];
        for j in 0..n {
            row[j * n + i] = S::one();
        }
        full.push(row);
    }
    for (j, block) in blocks.iter().enumerate() {
        for b in block {
            let mut row = vec![S::zero(); n * n];
            row[j * n..(j + 1) * n].clone_from_slice(b);
            full.push(row);
        }
    }
    full
}

/// Rank of the binding matrix using its block structure: the column-local
/// rows are reduced per block, then the row-sum rows are reduced modulo them.
fn block_rank<S: Scalar>(blocks: &[Vec<Vec<S>>], n: usize) -> usize {
    let mut local_rank = 0;
    let mut reduced: Vec<Vec<S>> = vec![Vec::new(); n];
    for block in blocks {
        let (basis, pivots) = linalg::rref(block.clone(), n);
        local_rank += basis.len();
        let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
        for (i, out) in reduced.iter_mut().enumerate() {
            match pivots.iter().position(|&c| c == i) {
                Some(r) => out.extend(free.iter().map(|&f| -basis[r][f].clone())),
                None => out.extend(free.iter().map(|&f| if f == i { S::one() } else { S::zero() })),
            }
        }
    }
    let width = reduced[0].len();
    local_rank + linalg::rank(&reduced, width, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};

    fn p2() -> PrivacyParam<Rational> {
        PrivacyParam::from_lambda(rat(2, 1)).unwrap()
    }

    fn tm(rows: Vec<Vec<Rational>>) -> TransitionMatrix<Rational> {
        TransitionMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn indistinguishability_examples() {
        let p = p2();
        assert!(neighbor_indistinguishable(&[rat(4, 7), rat(2, 7), rat(1, 7)], &p, 0.0));
        assert!(!neighbor_indistinguishable(&[rat(1, 1), rat(0, 1)], &p, 0.0));
        assert!(neighbor_indistinguishable(&[rat(0, 1), rat(0, 1), rat(0, 1)], &p, 0.0));
        assert!(neighbor_indistinguishable(&[rat(1, 1)], &p, 0.0));
    }

    #[test]
    fn constant_matrix_is_member_not_vertex() {
        let p = p2();
        let z = vec![rat(1, 3); 3];
        let t = tm(vec![vec![rat(1, 3); 3]; 3]);
        assert!(in_f(&t, &z, &p, 0.0));
        let poly = Polytope::F { z: &z };
        assert!(!is_extreme(&t, &poly, &p, Tolerance::EXACT).unwrap());
    }

    #[test]
    fn one_column_matrix_is_vertex_of_u() {
        let p = p2();
        let t = tm(vec![vec![rat(1, 1), rat(0, 1), rat(0, 1)]; 3]);
        assert!(is_extreme(&t, &Polytope::U, &p, Tolerance::EXACT).unwrap());
    }

    #[test]
    fn identity_is_not_member() {
        let p = p2();
        let t = TransitionMatrix::new(linalg::Matrix::<Rational>::identity(3)).unwrap();
        assert!(matches!(is_extreme(&t, &Polytope::U, &p, Tolerance::EXACT), Err(Error::NotMember(_))));
    }

    #[test]
    fn block_rank_agrees_with_full_rank() {
        let p = p2();
        let z = vec![rat(1, 3); 3];
        let candidates = vec![
            tm(vec![
                vec![rat(2, 5), rat(1, 4), rat(7, 20)],
                vec![rat(1, 5), rat(1, 2), rat(3, 10)],
                vec![rat(2, 5), rat(1, 4), rat(7, 20)],
            ]),
            tm(vec![vec![rat(1, 3); 3]; 3]),
        ];
        for t in candidates {
            let poly = Polytope::F { z: &z };
            let blocks: Vec<_> = (0..3).map(|j| binding_block(&t, j, &poly, &p, 0.0)).collect();
            let full = assemble(&blocks, 3);
            assert_eq!(block_rank(&blocks, 3), linalg::rank(&full, 9, 0.0));
        }
    }

    #[test]
    fn float_and_exact_agree_on_vertex() {
        let p = PrivacyParam::from_epsilon(2f64.ln()).unwrap();
        let z = vec![1.0 / 3.0; 3];
        let t = TransitionMatrix::from_rows(vec![
            vec![0.4, 0.25, 0.35],
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.25, 0.35],
        ])
        .unwrap();
        assert!(is_extreme(&t, &Polytope::F { z: &z }, &p, Tolerance::default()).unwrap());
    }
}
