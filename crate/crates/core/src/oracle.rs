//! Exact vertex enumeration for small instances, used to verify the
//! constructors and the scale representation.
//!
//! Representation polytopes describe mechanisms through `T = Psi B`, where `B`
//! is a non-negative `k x n` matrix of scale weights. `R_F` keeps the row-sum
//! and fixed-point conditions, `R_U` only the row sums. Vertices of `F` and `U`
//! are obtained by mapping representation vertices through `Psi` and keeping
//! the extreme images; a direct enumeration in matrix space serves as a
//! cross-check.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::counts::{PrivacyParam, TransitionMatrix};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Matrix};
use crate::membership::{is_extreme, Polytope, Tolerance};
use crate::scalar::{format_rational, Rational};
use crate::scales::{enumerate_scales, psi_affinely_simplified, psi_linearly_simplified, ScaleMatrix};

/// Largest `n` for representation polytopes.
pub const MAX_N_REPRESENTATION: usize = 3;
/// Largest `n` for mechanism polytopes.
pub const MAX_N_MECHANISM: usize = 4;
/// Largest `n` for the direct matrix-space enumeration.
pub const MAX_N_DIRECT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolytopeKind {
    F,
    U,
    RF,
    RU,
}

impl std::str::FromStr for PolytopeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(PolytopeKind::F),
            "U" => Ok(PolytopeKind::U),
            "RF" => Ok(PolytopeKind::RF),
            "RU" => Ok(PolytopeKind::RU),
            other => invalid(format!("unknown polytope {other:?}")),
        }
    }
}

impl PolytopeKind {
    pub fn name(self) -> &'static str {
        match self {
            PolytopeKind::F => "F",
            PolytopeKind::U => "U",
            PolytopeKind::RF => "RF",
            PolytopeKind::RU => "RU",
        }
    }

    fn fixed(self) -> bool {
        matches!(self, PolytopeKind::F | PolytopeKind::RF)
    }
}

/// A polytope instance. `z` is only used by the fixed-point kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeDescriptor {
    pub kind: PolytopeKind,
    pub n: usize,
    pub lambda: Rational,
    pub z: Vec<Rational>,
}

impl PolytopeDescriptor {
    /// Descriptor with uniform `z`.
    pub fn uniform(kind: PolytopeKind, n: usize, lambda: Rational) -> Self {
        let z = vec![Rational::new(1.into(), (n as i64).into()); n];
        PolytopeDescriptor { kind, n, lambda, z }
    }

    fn validate(&self) -> Result<PrivacyParam<Rational>> {
        if self.n == 0 {
            return invalid("n must be positive");
        }
        let cap = match self.kind {
            PolytopeKind::RF | PolytopeKind::RU => MAX_N_REPRESENTATION,
            PolytopeKind::F | PolytopeKind::U => MAX_N_MECHANISM,
        };
        if self.n > cap {
            return Err(Error::Capacity(format!(
                "vertex enumeration for {} is limited to n <= {cap}",
                self.kind.name()
            )));
        }
        if self.z.len() != self.n {
            return invalid("z has the wrong length");
        }
        if self.z.iter().any(|v| v < &Rational::zero()) || self.z.iter().sum::<Rational>() != Rational::one() {
            return invalid("z must be a probability vector");
        }
        PrivacyParam::from_lambda(self.lambda.clone())
    }
}

/// Vertices of the described polytope, in a deterministic order.
///
/// Representation vertices are `k x n`; mechanism vertices are `n x n`.
pub fn enumerate_vertices(desc: &PolytopeDescriptor) -> Result<Vec<Matrix<Rational>>> {
    let p = desc.validate()?;
    let psi = enumerate_scales(desc.n, &p)?;
    match desc.kind {
        PolytopeKind::RF => Ok(representation_vertices(&psi, Some(&desc.z))),
        PolytopeKind::RU => Ok(representation_vertices(&psi, None)),
        PolytopeKind::F => {
            let reps = representation_vertices(&psi, Some(&desc.z));
            extreme_images(&reps, &psi, &Polytope::F { z: &desc.z }, &p)
        }
        PolytopeKind::U => {
            let reps = representation_vertices(&psi, None);
            extreme_images(&reps, &psi, &Polytope::U, &p)
        }
    }
}

fn extreme_images(
    reps: &[Matrix<Rational>],
    psi: &ScaleMatrix<Rational>,
    poly: &Polytope<'_, Rational>,
    p: &PrivacyParam<Rational>,
) -> Result<Vec<Matrix<Rational>>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for b in reps {
        let t = psi.apply(b)?;
        if !seen.insert(t.data().to_vec()) {
            continue;
        }
        if is_extreme(&TransitionMatrix::new(t.clone())?, poly, p, Tolerance::EXACT)? {
            out.push(t);
        }
    }
    Ok(out)
}

/// Equality system of the representation polytope over variables `j * k + u`.
fn representation_system(psi: &ScaleMatrix<Rational>, z: Option<&[Rational]>) -> (Vec<Vec<Rational>>, Vec<Rational>) {
    let n = psi.n();
    let k = psi.k();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let mut row = vec![Rational::zero(); k * n];
        for j in 0..n {
            for u in 0..k {
                row[j * k + u] = psi.column(u).values()[i].clone();
            }
        }
        a.push(row);
        b.push(Rational::one());
    }
    if let Some(z) = z {
        let w = psi.weights(z);
        for (j, zj) in z.iter().enumerate() {
            let mut row = vec![Rational::zero(); k * n];
            for u in 0..k {
                row[j * k + u] = w[u].clone();
            }
            a.push(row);
            b.push(zj.clone());
        }
    }
    (a, b)
}

/// Basic feasible solution on `support`, if the support columns are
/// independent and the unique solution is strictly positive.
fn vertex_on_support(a: &[Vec<Rational>], b: &[Rational], support: &[usize], k: usize, n: usize) -> Option<Matrix<Rational>> {
    let sub: Vec<Vec<Rational>> = a.iter().map(|row| support.iter().map(|&v| row[v].clone()).collect()).collect();
    let x = linalg::solve_unique(&sub, b, support.len(), 0.0)?;
    if x.iter().any(|v| v <= &Rational::zero()) {
        return None;
    }
    let mut m = Matrix::zeros(k, n);
    for (&v, val) in support.iter().zip(x) {
        m.set(v % k, v / k, val);
    }
    Some(m)
}

/// All vertices of `R_F` (with `z`) or `R_U` (without), using the support
/// bounds of basic solutions to prune the search.
fn representation_vertices(psi: &ScaleMatrix<Rational>, z: Option<&[Rational]>) -> Vec<Matrix<Rational>> {
    let n = psi.n();
    let k = psi.k();
    let (a, b) = representation_system(psi, z);
    let rank = linalg::rank(&a, k * n, 0.0);
    let mut out = Vec::new();
    match z {
        Some(z) => {
            // Every column with z_j > 0 needs at least one scale; columns with
            // z_j = 0 carry none.
            let active: Vec<usize> = (0..n).filter(|&j| !z[j].is_zero()).collect();
            let max_size = rank.min(active.len() + n - 1);
            let mut support = Vec::new();
            fixed_supports(&active, 0, k, max_size, &mut support, &mut |s| {
                if let Some(m) = vertex_on_support(&a, &b, s, k, n) {
                    out.push(m);
                }
            });
        }
        None => {
            // At most n positive entries, each scale used in at most one column.
            for size in 1..=n.min(rank) {
                for scales in (0..k).combinations(size) {
                    for cols in std::iter::repeat_n(0..n, size).multi_cartesian_product() {
                        let mut support: Vec<usize> = scales.iter().zip(&cols).map(|(&u, &j)| j * k + u).collect();
                        support.sort_unstable();
                        if let Some(m) = vertex_on_support(&a, &b, &support, k, n) {
                            out.push(m);
                        }
                    }
                }
            }
        }
    }
    out
}

fn fixed_supports<F: FnMut(&[usize])>(
    active: &[usize],
    pos: usize,
    k: usize,
    budget: usize,
    support: &mut Vec<usize>,
    visit: &mut F,
) {
    if pos == active.len() {
        visit(support);
        return;
    }
    let remaining_columns = active.len() - pos - 1;
    let j = active[pos];
    for size in 1..=k.min(budget.saturating_sub(remaining_columns)) {
        for scales in (0..k).combinations(size) {
            let before = support.len();
            support.extend(scales.iter().map(|&u| j * k + u));
            fixed_supports(active, pos + 1, k, budget - size, support, visit);
            support.truncate(before);
        }
    }
}

/// Vertices of `R_F` or `R_U` by testing every subset of variables, with no
/// pruning. Exponential in `k n`; intended for cross-checks at `n <= 3`.
pub fn enumerate_representation_unpruned(desc: &PolytopeDescriptor) -> Result<Vec<Matrix<Rational>>> {
    let p = desc.validate()?;
    if !matches!(desc.kind, PolytopeKind::RF | PolytopeKind::RU) {
        return invalid("unpruned enumeration applies to RF and RU");
    }
    let psi = enumerate_scales(desc.n, &p)?;
    let n = psi.n();
    let k = psi.k();
    let z = desc.kind.fixed().then_some(&desc.z[..]);
    let (a, b) = representation_system(&psi, z);
    let mut out = Vec::new();
    for size in 1..=k * n {
        for support in (0..k * n).combinations(size) {
            if let Some(m) = vertex_on_support(&a, &b, &support, k, n) {
                out.push(m);
            }
        }
    }
    Ok(out)
}

/// Vertices of `F` or `U` by intersecting constraint hyperplanes directly in
/// matrix space, independent of the scale representation.
pub fn enumerate_mechanism_vertices_direct(desc: &PolytopeDescriptor) -> Result<Vec<Matrix<Rational>>> {
    let p = desc.validate()?;
    if !matches!(desc.kind, PolytopeKind::F | PolytopeKind::U) {
        return invalid("direct enumeration applies to F and U");
    }
    let n = desc.n;
    if n > MAX_N_DIRECT {
        return Err(Error::Capacity(format!("direct enumeration is limited to n <= {MAX_N_DIRECT}")));
    }
    let nn = n * n;
    let idx = |i: usize, j: usize| i * n + j;
    let mut eq: Vec<Vec<Rational>> = Vec::new();
    let mut eq_b = Vec::new();
    for i in 0..n {
        let mut row = vec![Rational::zero(); nn];
        for j in 0..n {
            row[idx(i, j)] = Rational::one();
        }
        eq.push(row);
        eq_b.push(Rational::one());
    }
    if desc.kind.fixed() {
        for j in 0..n {
            let mut row = vec![Rational::zero(); nn];
            for i in 0..n {
                row[idx(i, j)] = desc.z[i].clone();
            }
            eq.push(row);
            eq_b.push(desc.z[j].clone());
        }
    }
    // Inequalities as `g . t >= 0`; a vertex makes some of them tight.
    let mut ineq: Vec<Vec<Rational>> = Vec::new();
    for v in 0..nn {
        let mut row = vec![Rational::zero(); nn];
        row[v] = Rational::one();
        ineq.push(row);
    }
    let lambda = p.lambda().clone();
    for j in 0..n {
        for i in 0..n.saturating_sub(1) {
            for (hi, lo) in [(i, i + 1), (i + 1, i)] {
                let mut row = vec![Rational::zero(); nn];
                row[idx(lo, j)] = lambda.clone();
                row[idx(hi, j)] = -Rational::one();
                ineq.push(row);
            }
        }
    }
    let eq_rank = linalg::rank(&eq, nn, 0.0);
    let need = nn - eq_rank;
    let mut found = BTreeSet::new();
    for tight in (0..ineq.len()).combinations(need) {
        let mut a = eq.clone();
        let mut b = eq_b.clone();
        for &t in &tight {
            a.push(ineq[t].clone());
            b.push(Rational::zero());
        }
        let Some(x) = linalg::solve_unique(&a, &b, nn, 0.0) else {
            continue;
        };
        let feasible = ineq.iter().all(|g| g.iter().zip(&x).map(|(gi, xi)| gi * xi).sum::<Rational>() >= Rational::zero());
        if feasible {
            found.insert(x);
        }
    }
    Ok(found.into_iter().map(|x| Matrix::from_rows(x.chunks(n).map(<[Rational]>::to_vec).collect())).collect())
}

/// Outcome of checking the representation theorems on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub kind: PolytopeKind,
    pub n: usize,
    /// Vertices of the mechanism polytope (direct enumeration).
    pub mechanism_vertices: usize,
    /// Vertices of the representation polytope.
    pub representation_vertices: usize,
    /// Every mechanism vertex is the image of a representation vertex.
    pub every_vertex_represented: bool,
    /// Representation vertices whose image is not a vertex.
    pub non_extreme_images: usize,
    /// Mechanism vertices with more than one representation vertex.
    pub shared_images: usize,
    /// Every representation vertex passes the simplification test.
    pub all_simplified: bool,
}

/// Checks on one instance that (a) every vertex of `F` (or `U`) is `Psi B` for
/// a vertex `B` of the representation polytope, and counts the representation
/// vertices with non-extreme images and the images shared by several vertices.
///
/// Errors with [`Error::Invariant`] if (a) or the simplification property fails.
pub fn verify_representation_theorems(desc: &PolytopeDescriptor) -> Result<TheoremReport> {
    let p = desc.validate()?;
    let (fixed, rep_kind) = match desc.kind {
        PolytopeKind::F | PolytopeKind::RF => (true, PolytopeKind::RF),
        PolytopeKind::U | PolytopeKind::RU => (false, PolytopeKind::RU),
    };
    let mech_kind = if fixed { PolytopeKind::F } else { PolytopeKind::U };
    let psi = enumerate_scales(desc.n, &p)?;
    let reps = enumerate_vertices(&PolytopeDescriptor { kind: rep_kind, ..desc.clone() })?;
    let direct = enumerate_mechanism_vertices_direct(&PolytopeDescriptor { kind: mech_kind, ..desc.clone() })?;

    let mut all_simplified = true;
    let mut images: BTreeMap<Vec<Rational>, usize> = BTreeMap::new();
    for b in &reps {
        let ok = if fixed {
            psi_affinely_simplified(b, &desc.z, &psi, 0.0)?
        } else {
            psi_linearly_simplified(b, &psi, 0.0)?
        };
        all_simplified &= ok;
        *images.entry(psi.apply(b)?.data().to_vec()).or_default() += 1;
    }
    let vertex_set: BTreeSet<Vec<Rational>> = direct.iter().map(|m| m.data().to_vec()).collect();
    let missing: Vec<&Vec<Rational>> = vertex_set.iter().filter(|v| !images.contains_key(*v)).collect();
    let non_extreme_images = images.iter().filter(|(t, _)| !vertex_set.contains(*t)).map(|(_, c)| c).sum();
    let shared_images = images.iter().filter(|(t, c)| **c > 1 && vertex_set.contains(*t)).count();

    if !missing.is_empty() {
        let dump: Vec<Vec<String>> = missing.iter().map(|v| v.iter().map(format_rational).collect()).collect();
        return Err(Error::Invariant(format!("vertices without a representation: {dump:?}")));
    }
    if !all_simplified {
        return Err(Error::Invariant("a representation vertex is not simplified".into()));
    }
    Ok(TheoremReport {
        kind: mech_kind,
        n: desc.n,
        mechanism_vertices: vertex_set.len(),
        representation_vertices: reps.len(),
        every_vertex_represented: true,
        non_extreme_images,
        shared_images,
        all_simplified,
    })
}
