//! Greedy construction of a vertex of `F`.
//!
//! The matrix is filled one column at a time. Within a column, each step adds
//! a multiple `q` of a scale whose pattern starts single-peaked at the column
//! index and is flipped wherever the remaining row budget `r` has a tight
//! neighbor ratio. `q` is the largest step that keeps `r` neighbor
//! indistinguishable and does not exceed the column's remaining capacity.

use serde::{Deserialize, Serialize};

use crate::counts::{CountDistribution, PrivacyParam, TransitionMatrix};
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::membership::neighbor_indistinguishable;
use crate::scalar::{self, Scalar};
use crate::scales::{scale_from_pattern, single_peaked_pattern, Pattern, Scale};

/// Relative tolerance used to detect tight ratios in float mode.
const RATIO_TOL: f64 = 1e-9;
/// Relative gap under which two candidate steps count as tied in float mode.
const TIE_TOL: f64 = 1e-12;
/// A column counts as filled once its capacity drops below this fraction of `z_j`.
const CAPACITY_TOL: f64 = 1e-13;
/// A column also counts as filled once the step that would exhaust it moves
/// `r` by less than this; what is left is rounding noise.
const STEP_TOL: f64 = 1e-14;
/// Largest remaining capacity a float run may drop when no positive step is
/// left; accumulated rounding over many additions reaches this order.
const STALL_CAPACITY_TOL: f64 = 1e-8;

/// Order in which columns are filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    /// Largest `z_j` first.
    Max,
    /// Smallest `z_j` first.
    Min,
    /// Outside in: `0, n-1, 1, n-2, ...`.
    Sandwich,
}

impl Selector {
    pub const ALL: [Selector; 3] = [Selector::Max, Selector::Min, Selector::Sandwich];

    pub fn name(self) -> &'static str {
        match self {
            Selector::Max => "max",
            Selector::Min => "min",
            Selector::Sandwich => "sandwich",
        }
    }
}

impl std::str::FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Selector::Max),
            "min" => Ok(Selector::Min),
            "sandwich" => Ok(Selector::Sandwich),
            other => invalid(format!("unknown selector {other:?}")),
        }
    }
}

/// Working state: partial matrix `a`, row budget `r` and column capacities `c`.
///
/// Throughout the run `a 1 + r = 1`, `z a + c = z` and `sum(c) = z . r`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstructorState<S> {
    pub a: Matrix<S>,
    pub r: Vec<S>,
    pub c: Vec<S>,
}

impl<S: Scalar> ConstructorState<S> {
    /// Fresh state: `a = 0`, `r = 1`, `c = z`.
    pub fn new(z: &[S]) -> Self {
        let n = z.len();
        ConstructorState { a: Matrix::zeros(n, n), r: vec![S::one(); n], c: z.to_vec() }
    }
}

fn exhausted<S: Scalar>(c: &S, z: &S) -> bool {
    if S::EXACT {
        !scalar::positive(c)
    } else {
        *c <= S::tol(CAPACITY_TOL) * z
    }
}

/// Next column to fill, or `None` when every column is full.
///
/// Ties under `Max` and `Min` go to the smaller index.
pub fn select_column<S: Scalar>(state: &ConstructorState<S>, z: &[S], selector: Selector) -> Option<usize> {
    let n = z.len();
    let open = |j: usize| scalar::positive(&z[j]) && !exhausted(&state.c[j], &z[j]);
    match selector {
        Selector::Max => (0..n).filter(|&j| open(j)).fold(None, |best: Option<usize>, j| match best {
            Some(b) if z[b] >= z[j] => Some(b),
            _ => Some(j),
        }),
        Selector::Min => (0..n).filter(|&j| open(j)).fold(None, |best: Option<usize>, j| match best {
            Some(b) if z[b] <= z[j] => Some(b),
            _ => Some(j),
        }),
        Selector::Sandwich => sandwich_order(n).find(|&j| open(j)),
    }
}

fn sandwich_order(n: usize) -> impl Iterator<Item = usize> {
    (0..n).map(move |k| if k % 2 == 0 { k / 2 } else { n - 1 - k / 2 })
}

fn ratio_tight<S: Scalar>(lhs: &S, rhs: &S) -> bool {
    if S::EXACT {
        return lhs == rhs;
    }
    if lhs.is_zero() && rhs.is_zero() {
        return false;
    }
    let scale = if lhs.abs() > rhs.abs() { lhs.abs() } else { rhs.abs() };
    (lhs.clone() - rhs).abs() <= S::tol(RATIO_TOL) * &scale
}

/// Flips `pattern[i]` wherever `r[i+1] = lambda^(-pattern[i]) r[i]`.
///
/// Moving along a tight ratio in the pattern's direction would break
/// indistinguishability of `r` for any positive step.
pub fn adjust_pattern<S: Scalar>(pattern: &mut Pattern, r: &[S], p: &PrivacyParam<S>) {
    let lambda = p.lambda();
    for i in 0..pattern.signs().len() {
        let tight = if pattern.signs()[i] > 0 {
            ratio_tight(&(lambda.clone() * &r[i + 1]), &r[i])
        } else {
            ratio_tight(&r[i + 1], &(lambda.clone() * &r[i]))
        };
        if tight {
            pattern.flip(i);
        }
    }
}

/// Candidate step sizes for one addition.
struct Step<S> {
    /// The chosen step, the minimum of all bounds.
    q: S,
    /// `c_j / (z . s)`.
    capacity: S,
    /// Bound from each neighbor ratio, when that ratio constrains the step.
    ratios: Vec<Option<S>>,
}

/// Largest `q` with `r - q s` neighbor indistinguishable and `q (z . s) <= c_j`.
pub fn compute_q<S: Scalar>(r: &[S], c_j: &S, s: &Scale<S>, z: &[S], p: &PrivacyParam<S>) -> Result<S> {
    if r.len() != s.n() || z.len() != s.n() {
        return invalid("dimension mismatch in compute_q");
    }
    if !neighbor_indistinguishable(r, p, RATIO_TOL) {
        return invalid("remaining budget r is not neighbor indistinguishable");
    }
    step(r, c_j, s, z, p, None).map(|st| st.q)
}

/// With `tight` given, ratios already known to be tight are preserved by the
/// scale and skipped.
fn step<S: Scalar>(
    r: &[S],
    c_j: &S,
    s: &Scale<S>,
    z: &[S],
    p: &PrivacyParam<S>,
    tight: Option<&[Option<i8>]>,
) -> Result<Step<S>> {
    let lambda = p.lambda();
    let sv = s.values();
    let zs = scalar::dot(z, sv);
    if !scalar::positive(&zs) {
        return Err(Error::Invariant("z . s is not positive".into()));
    }
    let capacity = c_j.clone() / &zs;
    let mut q = capacity.clone();
    let mut ratios = Vec::with_capacity(sv.len().saturating_sub(1));
    for (i, &sign) in s.pattern().signs().iter().enumerate() {
        if tight.is_some_and(|t| t[i].is_some()) {
            ratios.push(None);
            continue;
        }
        let (num, den) = if sign > 0 {
            (lambda.clone() * &r[i + 1] - &r[i], lambda.clone() * &sv[i + 1] - &sv[i])
        } else {
            (r[i].clone() - &(r[i + 1].clone() / lambda), sv[i].clone() - &(sv[i + 1].clone() / lambda))
        };
        if !scalar::positive(&den) {
            if S::EXACT {
                return Err(Error::Invariant(format!("non-positive denominator at ratio {i}")));
            }
            ratios.push(None);
            continue;
        }
        let num = if num.is_negative() && !S::EXACT { S::zero() } else { num };
        let qi = num / &den;
        if qi < q {
            q = qi.clone();
        }
        ratios.push(Some(qi));
    }
    Ok(Step { q, capacity, ratios })
}

/// Whether candidate `b` ties with the minimum `q` (exactly, or within a
/// relative tolerance in float mode).
fn ties<S: Scalar>(b: &S, q: &S) -> bool {
    if S::EXACT {
        b == q
    } else {
        *b <= q.clone() * &(S::one() + &S::tol(TIE_TOL))
    }
}

/// Re-imposes the tight ratios on `r`. A flag `t` at `i` means
/// `r[i] = lambda^-t r[i+1]`. Each run of tight ratios is rebuilt from its
/// largest entry, which float cancellation disturbs least in relative terms.
fn enforce_tight<S: Scalar>(r: &mut [S], tight: &[Option<i8>], lambda: &S) {
    let step = |v: &S, up: bool| if up { v.clone() * lambda } else { v.clone() / lambda };
    let mut start = 0;
    while start < tight.len() {
        if tight[start].is_none() {
            start += 1;
            continue;
        }
        let mut end = start;
        while end < tight.len() && tight[end].is_some() {
            end += 1;
        }
        // Ratios start..end link entries start..=end.
        let anchor = (start..=end).max_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap()).unwrap();
        if scalar::positive(&r[anchor]) {
            for i in (start..anchor).rev() {
                r[i] = step(&r[i + 1], tight[i] == Some(-1));
            }
            for i in anchor..end {
                r[i + 1] = step(&r[i], tight[i] == Some(1));
            }
        }
        start = end;
    }
}

/// Result of the greedy constructor.
#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicOutput<S> {
    pub matrix: TransitionMatrix<S>,
    /// Number of scale additions performed.
    pub additions: usize,
    /// Columns in the order they were filled.
    pub order: Vec<usize>,
}

/// Builds a vertex of `F` for fixed point `z`.
pub fn heuristic_constructor<S: Scalar>(
    z: &CountDistribution<S>,
    p: &PrivacyParam<S>,
    selector: Selector,
) -> Result<HeuristicOutput<S>> {
    heuristic_constructor_with_hook(z, p, selector, |_, _| {})
}

/// [`heuristic_constructor`] that calls `hook(state, column)` after every addition.
pub fn heuristic_constructor_with_hook<S: Scalar, H>(
    z: &CountDistribution<S>,
    p: &PrivacyParam<S>,
    selector: Selector,
    mut hook: H,
) -> Result<HeuristicOutput<S>>
where
    H: FnMut(&ConstructorState<S>, usize),
{
    let zv = z.probs();
    let n = zv.len();
    let max_additions = if S::EXACT { 2 * n - 1 } else { 4 * n + 16 };
    let mut state = ConstructorState::new(zv);
    let mut additions = 0;
    let mut order = Vec::new();
    // Float mode tracks tight neighbor ratios combinatorially: a ratio that
    // becomes tight stays tight, with a fixed direction, for the rest of the
    // run. Exact mode detects them from `r` directly.
    let mut tight: Vec<Option<i8>> = vec![None; n.saturating_sub(1)];
    while let Some(j) = select_column(&state, zv, selector) {
        order.push(j);
        while !exhausted(&state.c[j], &zv[j]) {
            if additions == max_additions {
                return Err(Error::Invariant(format!(
                    "exceeded {max_additions} additions; r = {:?}, c = {:?}",
                    state.r, state.c
                )));
            }
            let mut pattern = single_peaked_pattern(j, n)?;
            if S::EXACT {
                adjust_pattern(&mut pattern, &state.r, p);
            } else {
                for (i, t) in tight.iter().enumerate() {
                    if let Some(sign) = *t {
                        if pattern.signs()[i] != sign {
                            pattern.flip(i);
                        }
                    }
                }
            }
            let s = scale_from_pattern(&pattern, p);
            let Step { q, capacity, ratios } = step(&state.r, &state.c[j], &s, zv, p, (!S::EXACT).then_some(&tight[..]))?;
            if !S::EXACT && capacity <= S::tol(STEP_TOL) {
                state.c[j] = S::zero();
                continue;
            }
            if !S::EXACT && !scalar::positive(&q) && state.c[j] <= S::tol(STALL_CAPACITY_TOL) {
                state.c[j] = S::zero();
                continue;
            }
            if !scalar::positive(&q) {
                return Err(Error::Invariant(format!(
                    "non-positive step {q:?} in column {j}; pattern = {:?}, r = {:?}, c = {:?}",
                    pattern.signs(),
                    state.r,
                    state.c
                )));
            }
            let zs = scalar::dot(zv, s.values());
            for (i, si) in s.values().iter().enumerate() {
                let add = q.clone() * si;
                *state.a.get_mut(i, j) += &add;
                state.r[i] -= &add;
            }
            for (i, qi) in ratios.iter().enumerate() {
                if qi.as_ref().is_some_and(|qi| ties(qi, &q)) {
                    tight[i] = Some(-pattern.signs()[i]);
                }
            }
            if ties(&capacity, &q) {
                state.c[j] = S::zero();
            } else {
                state.c[j] -= &(q * &zs);
            }
            if !S::EXACT {
                enforce_tight(&mut state.r, &tight, p.lambda());
            }
            additions += 1;
            hook(&state, j);
        }
    }
    Ok(HeuristicOutput { matrix: TransitionMatrix::new(state.a)?, additions, order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::membership::{in_f, is_extreme, Polytope, Tolerance};
    use crate::scalar::{rat, Rational};
    use num_traits::Zero;

    fn p2() -> PrivacyParam<Rational> {
        PrivacyParam::from_lambda(rat(2, 1)).unwrap()
    }

    #[test]
    fn selector_examples() {
        let z = [0.2, 0.5, 0.3];
        let st = ConstructorState::new(&z);
        assert_eq!(select_column(&st, &z, Selector::Max), Some(1));
        let mut st = ConstructorState::new(&[0.3, 0.1, 0.2]);
        st.c = vec![0.0, 0.1, 0.2];
        assert_eq!(select_column(&st, &[0.3, 0.1, 0.2], Selector::Min), Some(1));
    }

    #[test]
    fn sandwich_visits_outside_in() {
        let z = [0.25; 4];
        let mut st = ConstructorState::new(&z);
        let mut seen = Vec::new();
        while let Some(j) = select_column(&st, &z, Selector::Sandwich) {
            seen.push(j);
            st.c[j] = 0.0;
        }
        assert_eq!(seen, vec![0, 3, 1, 2]);
    }

    #[test]
    fn ties_go_to_smaller_index() {
        let z = [0.25; 4];
        let st = ConstructorState::new(&z);
        assert_eq!(select_column(&st, &z, Selector::Max), Some(0));
        assert_eq!(select_column(&st, &z, Selector::Min), Some(0));
    }

    #[test]
    fn adjust_examples() {
        let p = p2();
        let mut pat = Pattern::new(vec![-1, -1]).unwrap();
        adjust_pattern(&mut pat, &[rat(1, 1), rat(1, 1), rat(1, 1)], &p);
        assert_eq!(pat.signs(), &[-1, -1]);
        adjust_pattern(&mut pat, &[rat(1, 1), rat(2, 1), rat(4, 1)], &p);
        assert_eq!(pat.signs(), &[1, 1]);
    }

    #[test]
    fn compute_q_examples() {
        let p = p2();
        let s = scale_from_pattern(&Pattern::new(vec![-1, -1]).unwrap(), &p);
        let r = vec![rat(1, 1); 3];
        let z = vec![rat(1, 3); 3];
        assert_eq!(compute_q(&r, &rat(1, 3), &s, &z, &p).unwrap(), rat(1, 1));
        assert_eq!(compute_q(&r, &rat(10, 1), &s, &z, &p).unwrap(), rat(7, 6));
        let bad = vec![rat(1, 1), rat(0, 1), rat(1, 1)];
        assert!(compute_q(&bad, &rat(1, 3), &s, &z, &p).is_err());
    }

    #[test]
    fn uniform_n3_is_vertex() {
        let p = p2();
        let z = CountDistribution::new(vec![rat(1, 3); 3]).unwrap();
        for sel in Selector::ALL {
            let out = heuristic_constructor(&z, &p, sel).unwrap();
            assert!(in_f(&out.matrix, z.probs(), &p, 0.0));
            assert!(is_extreme(&out.matrix, &Polytope::F { z: z.probs() }, &p, Tolerance::EXACT).unwrap());
            assert!(out.additions <= 5);
        }
    }

    #[test]
    fn zero_columns_stay_zero() {
        let p = p2();
        let z = CountDistribution::new(vec![rat(1, 2), rat(0, 1), rat(1, 2)]).unwrap();
        let out = heuristic_constructor(&z, &p, Selector::Sandwich).unwrap();
        for i in 0..3 {
            assert!(out.matrix.get(i, 1).is_zero());
        }
        assert!(in_f(&out.matrix, z.probs(), &p, 0.0));
    }

    #[test]
    fn single_category() {
        let p = p2();
        let z = CountDistribution::new(vec![rat(1, 1)]).unwrap();
        let out = heuristic_constructor(&z, &p, Selector::Max).unwrap();
        assert_eq!(*out.matrix.get(0, 0), rat(1, 1));
    }
}
