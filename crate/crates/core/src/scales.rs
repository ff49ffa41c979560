//! Scales: the extreme points of the neighbor-indistinguishable simplex slice.
//!
//! A scale is a probability vector whose consecutive ratios are all `lambda`
//! or `1/lambda`; it is determined by its sign pattern. The matrix `Psi` holds
//! all `2^(n-1)` scales as columns, ordered by reading the pattern as a binary
//! number with the first sign most significant and `+1` as bit one.

use crate::counts::PrivacyParam;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::{self, Scalar};

/// Default cap on `n` for [`enumerate_scales`].
pub const MAX_ENUMERATE_N: usize = 20;

/// Sign pattern of length `n - 1`; `+1` means the next entry is `lambda` times larger.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern(Vec<i8>);

impl Pattern {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return invalid("pattern entries must be +1 or -1");
        }
        Ok(Pattern(signs))
    }

    /// Pattern at position `index` in the canonical order for size `n`.
    pub fn from_index(index: usize, n: usize) -> Self {
        let len = n.saturating_sub(1);
        Pattern((0..len).map(|i| if (index >> (len - 1 - i)) & 1 == 1 { 1 } else { -1 }).collect())
    }

    /// Position in the canonical order.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &s| (acc << 1) | usize::from(s > 0))
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    /// Size `n` of the scales this pattern describes.
    pub fn n(&self) -> usize {
        self.0.len() + 1
    }
}

/// Single-peaked pattern with its mode at `j`: rising before `j`, falling after.
pub fn single_peaked_pattern(j: usize, n: usize) -> Result<Pattern> {
    if n == 0 || j >= n {
        return invalid(format!("peak {j} out of range for n = {n}"));
    }
    Ok(Pattern((0..n - 1).map(|i| if i < j { 1 } else { -1 }).collect()))
}

/// A scale and the pattern that generated it.
#[derive(Clone, Debug, PartialEq)]
pub struct Scale<S> {
    pattern: Pattern,
    values: Vec<S>,
}

impl<S: Scalar> Scale<S> {
    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// Builds the scale for a pattern: `s[i+1] = s[i] * lambda^pattern[i]`, normalized.
pub fn scale_from_pattern<S: Scalar>(pattern: &Pattern, p: &PrivacyParam<S>) -> Scale<S> {
    Scale { pattern: pattern.clone(), values: S::scale_from_signs(pattern.signs(), p.lambda()) }
}

/// The matrix `Psi` of all scales, stored by column.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleMatrix<S> {
    n: usize,
    columns: Vec<Scale<S>>,
}

impl<S: Scalar> ScaleMatrix<S> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of scales, `2^(n-1)`.
    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, u: usize) -> &Scale<S> {
        &self.columns[u]
    }

    pub fn columns(&self) -> &[Scale<S>] {
        &self.columns
    }

    /// `Psi` as an `n x k` matrix.
    pub fn to_matrix(&self) -> Matrix<S> {
        let cols: Vec<Vec<S>> = self.columns.iter().map(|c| c.values.clone()).collect();
        Matrix::from_columns(&cols)
    }

    /// The product `Psi B` for a `k x m` representation `B`.
    pub fn apply(&self, b: &Matrix<S>) -> Result<Matrix<S>> {
        if b.rows() != self.k() {
            return invalid(format!("representation has {} rows, expected {}", b.rows(), self.k()));
        }
        Ok(self.to_matrix().mul(b))
    }

    /// `z . Psi_u` for every scale `u`.
    pub fn weights(&self, z: &[S]) -> Vec<S> {
        self.columns.iter().map(|c| scalar::dot(z, &c.values)).collect()
    }
}

/// All scales of size `n` in canonical order; `n` is capped at [`MAX_ENUMERATE_N`].
pub fn enumerate_scales<S: Scalar>(n: usize, p: &PrivacyParam<S>) -> Result<ScaleMatrix<S>> {
    enumerate_scales_capped(n, p, MAX_ENUMERATE_N)
}

/// [`enumerate_scales`] with an explicit cap.
pub fn enumerate_scales_capped<S: Scalar>(n: usize, p: &PrivacyParam<S>, max_n: usize) -> Result<ScaleMatrix<S>> {
    if n == 0 {
        return invalid("n must be positive");
    }
    if n > max_n {
        return Err(Error::Capacity(format!("enumerating scales for n = {n} exceeds the cap {max_n}")));
    }
    let k = 1usize << (n - 1);
    let columns = (0..k).map(|u| scale_from_pattern(&Pattern::from_index(u, n), p)).collect();
    Ok(ScaleMatrix { n, columns })
}

/// Single-peaked scales `Sigma_0, ..., Sigma_{n-1}`.
pub fn single_peaked_scales<S: Scalar>(n: usize, p: &PrivacyParam<S>) -> Result<Vec<Scale<S>>> {
    (0..n).map(|j| Ok(scale_from_pattern(&single_peaked_pattern(j, n)?, p))).collect()
}

/// Weights `omega` with `sum_l omega_l Sigma_l = 1`, by a dense linear solve.
pub fn solve_row_weights<S: Scalar>(n: usize, p: &PrivacyParam<S>) -> Result<Vec<S>> {
    let sp = single_peaked_scales(n, p)?;
    let a: Vec<Vec<S>> = (0..n).map(|i| sp.iter().map(|s| s.values[i].clone()).collect()).collect();
    let ones = vec![S::one(); n];
    linalg::solve_unique(&a, &ones, n, 1e-14)
        .ok_or_else(|| Error::Invariant("single-peaked scales are linearly dependent".into()))
}

/// Closed form of the row weights.
///
/// With `alpha = 1/lambda` and `S_l = sum_i alpha^|i-l|`, interior weights are
/// `S_l (1-alpha)/(1+alpha)` and the two boundary weights are `S_l / (1+alpha)`.
pub fn row_weights_closed_form<S: Scalar>(n: usize, p: &PrivacyParam<S>) -> Result<Vec<S>> {
    if n == 0 {
        return invalid("n must be positive");
    }
    if n == 1 {
        return Ok(vec![S::one()]);
    }
    let alpha = p.alpha();
    let mut powers = vec![S::one(); n];
    for d in 1..n {
        powers[d] = powers[d - 1].clone() * &alpha;
    }
    // prefix[d] = sum_{e <= d} alpha^e
    let mut prefix = powers.clone();
    for d in 1..n {
        let prev = prefix[d - 1].clone();
        prefix[d] += &prev;
    }
    let one_plus = S::one() + &alpha;
    let interior = (S::one() - &alpha) / &one_plus;
    Ok((0..n)
        .map(|l| {
            let mut total = prefix[l].clone() + &prefix[n - 1 - l];
            total -= &S::one();
            if l == 0 || l == n - 1 {
                total / &one_plus
            } else {
                total * &interior
            }
        })
        .collect())
}

fn positive<S: Scalar>(x: &S, tol: &S) -> bool {
    *x > *tol
}

/// Whether the additive union of the affine difference sets of `B`'s columns is
/// linearly independent (the representation is "affinely simplified").
///
/// For a column `x` with positive support `u_0 < u_1 < ...`, the differences are
/// `Psi_u / (z . Psi_u) - Psi_{u_0} / (z . Psi_{u_0})` for `u != u_0`.
pub fn psi_affinely_simplified<S: Scalar>(b: &Matrix<S>, z: &[S], psi: &ScaleMatrix<S>, tol: f64) -> Result<bool> {
    if b.rows() != psi.k() || z.len() != psi.n() {
        return invalid("representation and scale matrix dimensions disagree");
    }
    let w = psi.weights(z);
    let t = S::tol(tol);
    let mut vectors: Vec<Vec<S>> = Vec::new();
    for j in 0..b.cols() {
        let support: Vec<usize> = (0..psi.k()).filter(|&u| positive(b.get(u, j), &t)).collect();
        let Some((&v, rest)) = support.split_first() else {
            continue;
        };
        if w[v].is_zero() {
            return invalid("z is orthogonal to a scale");
        }
        let base: Vec<S> = psi.column(v).values.iter().map(|x| x.clone() / &w[v]).collect();
        for &u in rest {
            vectors.push(
                psi.column(u).values.iter().zip(&base).map(|(x, b0)| x.clone() / &w[u] - b0).collect(),
            );
        }
    }
    Ok(linalg::rank(&vectors, psi.n(), 1e-8) == vectors.len())
}

/// Whether the multiset `{Psi_u : B[u][j] > 0}` is linearly independent.
pub fn psi_linearly_simplified<S: Scalar>(b: &Matrix<S>, psi: &ScaleMatrix<S>, tol: f64) -> Result<bool> {
    if b.rows() != psi.k() {
        return invalid("representation and scale matrix dimensions disagree");
    }
    let t = S::tol(tol);
    let mut vectors: Vec<Vec<S>> = Vec::new();
    for j in 0..b.cols() {
        for u in 0..psi.k() {
            if positive(b.get(u, j), &t) {
                vectors.push(psi.column(u).values.clone());
            }
        }
    }
    Ok(linalg::rank(&vectors, psi.n(), 1e-8) == vectors.len())
}
