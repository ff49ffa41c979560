//! Dense two-phase simplex method over a [`Scalar`].
//!
//! The solver works on a dictionary (condensed tableau): one row per basic
//! variable, one column per non-basic variable. Pricing is Dantzig's rule,
//! falling back to Bland's rule after a run of degenerate pivots. In float
//! mode rows are normalized, the ratio test follows Harris, and the
//! dictionary is periodically rebuilt from the original system with an LU
//! factorization so rounding does not accumulate.
//! Variable bounds are removed by substitution before solving.

use crate::error::{invalid, Error, Result};
use crate::scalar::{self, Scalar};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
/// Infeasibility a Harris ratio test may trade for a larger pivot.
const HARRIS_TOL: f64 = 1e-12;
const DEGENERATE_STREAK: usize = 50;
/// Float mode rebuilds the dictionary after this many pivots.
const REFACTOR_EVERY: usize = 200;
/// Rebuilds allowed when confirming optimality before giving up on rounding.
const MAX_FINAL_REFACTORS: usize = 5;
/// Negative basic values below this are repaired after a rebuild.
const REPAIR_TOL: f64 = 1e-15;
/// Entries below this are treated as zero after a rebuild.
const ROUND_OFF: f64 = 1e-14;

/// Lower and upper bound of a variable; `None` is unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct VarBounds<S> {
    pub lower: Option<S>,
    pub upper: Option<S>,
}

/// `minimize c.x` subject to equalities, `<=` inequalities and bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<S> {
    pub objective: Vec<S>,
    pub equalities: Vec<(Vec<S>, S)>,
    pub inequalities: Vec<(Vec<S>, S)>,
    pub bounds: Vec<VarBounds<S>>,
}

impl<S: Scalar> LinearProgram<S> {
    /// Program with `n` variables, zero objective and bounds `x >= 0`.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![S::zero(); n],
            equalities: Vec::new(),
            inequalities: Vec::new(),
            bounds: vec![VarBounds { lower: Some(S::zero()), upper: None }; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, a: Vec<S>, b: S) {
        self.equalities.push((a, b));
    }

    pub fn add_le(&mut self, a: Vec<S>, b: S) {
        self.inequalities.push((a, b));
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<S>, upper: Option<S>) {
        self.bounds[var] = VarBounds { lower, upper };
    }
}

/// Optimal point and objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<S> {
    pub x: Vec<S>,
    pub objective: S,
}

/// `x_k = offset + sum(sign * y)` over the non-negative standard-form variables.
struct VarMap<S> {
    offset: S,
    terms: Vec<(usize, bool)>,
}

/// Solves the program; errors are [`Error::Infeasible`] or [`Error::Unbounded`].
pub fn solve_lp<S: Scalar>(lp: &LinearProgram<S>) -> Result<LpSolution<S>> {
    let n = lp.n_vars();
    if lp.bounds.len() != n {
        return invalid("bounds length differs from variable count");
    }
    for (a, _) in lp.equalities.iter().chain(&lp.inequalities) {
        if a.len() != n {
            return invalid("constraint length differs from variable count");
        }
    }

    let mut maps = Vec::with_capacity(n);
    let mut ny = 0;
    let mut extra_le: Vec<(Vec<(usize, S)>, S)> = Vec::new();
    for b in &lp.bounds {
        match (&b.lower, &b.upper) {
            (Some(l), upper) => {
                if let Some(u) = upper {
                    if u < l {
                        return Err(Error::Infeasible);
                    }
                    extra_le.push((vec![(ny, S::one())], u.clone() - l));
                }
                maps.push(VarMap { offset: l.clone(), terms: vec![(ny, true)] });
                ny += 1;
            }
            (None, Some(u)) => {
                maps.push(VarMap { offset: u.clone(), terms: vec![(ny, false)] });
                ny += 1;
            }
            (None, None) => {
                maps.push(VarMap { offset: S::zero(), terms: vec![(ny, true), (ny + 1, false)] });
                ny += 2;
            }
        }
    }

    let substitute = |a: &[S], b: &S| -> (Vec<S>, S) {
        let mut row = vec![S::zero(); ny];
        let mut rhs = b.clone();
        for (k, ak) in a.iter().enumerate() {
            if ak.is_zero() {
                continue;
            }
            rhs -= &(ak.clone() * &maps[k].offset);
            for &(y, pos) in &maps[k].terms {
                if pos {
                    row[y] += ak;
                } else {
                    row[y] -= ak;
                }
            }
        }
        (row, rhs)
    };

    let (cost, _) = substitute(&lp.objective, &S::zero());
    let eqs: Vec<(Vec<S>, S)> = lp.equalities.iter().map(|(a, b)| substitute(a, b)).collect();
    let mut les: Vec<(Vec<S>, S)> = lp.inequalities.iter().map(|(a, b)| substitute(a, b)).collect();
    for (terms, b) in extra_le {
        let mut row = vec![S::zero(); ny];
        for (y, v) in terms {
            row[y] = v;
        }
        les.push((row, b));
    }

    let y = solve_standard(&cost, &eqs, &les, ny)?;

    let x: Vec<S> = maps
        .iter()
        .map(|m| {
            let mut v = m.offset.clone();
            for &(k, pos) in &m.terms {
                if pos {
                    v += &y[k];
                } else {
                    v -= &y[k];
                }
            }
            v
        })
        .collect();
    let mut objective = S::zero();
    for (c, xv) in lp.objective.iter().zip(&x) {
        objective += &(c.clone() * xv);
    }
    Ok(LpSolution { x, objective })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

/// The constraint system `M x = b` over every variable, kept in float mode so
/// the dictionary can be rebuilt from scratch.
struct Original {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// `(row, value)` for variables whose column has a single nonzero.
    unit: Vec<Option<(usize, f64)>>,
}

struct Dictionary<S> {
    /// `x_B[r] + sum_k a[r][k] x_N[k] = beta[r]`.
    a: Vec<Vec<S>>,
    beta: Vec<S>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    /// Objective `z0 + sum_k d[k] x_N[k]`.
    d: Vec<S>,
    z0: S,
    kinds: Vec<Kind>,
    /// Cost of every variable in the current phase.
    cost: Vec<S>,
    original: Option<Original>,
}

impl<S: Scalar> Dictionary<S> {
    fn pivot(&mut self, r: usize, k: usize) {
        let piv = self.a[r][k].clone();
        let inv = S::one() / &piv;
        for v in self.a[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        self.a[r][k] = inv.clone();
        self.beta[r] *= &inv;
        let prow = self.a[r].clone();
        let pbeta = self.beta[r].clone();
        let update = |row: &mut Vec<S>, rhs: &mut S, sign_plus: bool| {
            let f = row[k].clone();
            if f.is_zero() {
                return;
            }
            for (kk, pv) in prow.iter().enumerate() {
                if kk != k && !pv.is_zero() {
                    row[kk] -= &(f.clone() * pv);
                }
            }
            row[k] = -(f.clone() * &inv);
            if sign_plus {
                *rhs += &(f * &pbeta);
            } else {
                *rhs -= &(f * &pbeta);
            }
        };
        for i in 0..self.a.len() {
            if i != r {
                let mut row = std::mem::take(&mut self.a[i]);
                let mut rhs = std::mem::replace(&mut self.beta[i], S::zero());
                update(&mut row, &mut rhs, false);
                self.a[i] = row;
                self.beta[i] = rhs;
            }
        }
        let mut d = std::mem::take(&mut self.d);
        let mut z0 = std::mem::replace(&mut self.z0, S::zero());
        // The objective row reads `obj - sum d x_N = z0`, hence the sign flip.
        let f = d[k].clone();
        if !f.is_zero() {
            for (kk, pv) in prow.iter().enumerate() {
                if kk != k && !pv.is_zero() {
                    d[kk] -= &(f.clone() * pv);
                }
            }
            d[k] = -(f.clone() * &inv);
            z0 += &(f * &pbeta);
        }
        self.d = d;
        self.z0 = z0;
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[k]);
    }

    fn remove_column(&mut self, k: usize) {
        for row in &mut self.a {
            row.remove(k);
        }
        self.d.remove(k);
        self.nonbasic.remove(k);
    }

    /// Reduced costs and objective from `cost` and the current `a`, `beta`.
    fn price(&mut self) {
        let mut z0 = S::zero();
        for (r, &b) in self.basic.iter().enumerate() {
            if !self.cost[b].is_zero() {
                z0 += &(self.cost[b].clone() * &self.beta[r]);
            }
        }
        self.z0 = z0;
        self.d = (0..self.nonbasic.len())
            .map(|k| {
                let mut d = self.cost[self.nonbasic[k]].clone();
                for r in 0..self.a.len() {
                    let cb = &self.cost[self.basic[r]];
                    if !cb.is_zero() && !self.a[r][k].is_zero() {
                        d -= &(cb.clone() * &self.a[r][k]);
                    }
                }
                d
            })
            .collect();
    }

    /// Float mode: recomputes `B^-1 N` and `B^-1 b` from the original system,
    /// discarding the rounding accumulated by successive pivots. Returns
    /// `false` when the basis matrix is numerically singular.
    ///
    /// Slack and artificial columns are signed unit vectors, so only the
    /// block of rows not covered by them needs a dense factorization.
    fn refactor(&mut self) -> bool {
        let Some(orig) = &self.original else {
            self.price();
            return true;
        };
        let m = self.basic.len();
        let mut covered = vec![None; m];
        let mut dense = Vec::new();
        for (r, &v) in self.basic.iter().enumerate() {
            match orig.unit[v] {
                Some((row, sign)) if covered[row].is_none() => covered[row] = Some((r, sign)),
                _ => dense.push(r),
            }
        }
        let free_rows: Vec<usize> = (0..m).filter(|&i| covered[i].is_none()).collect();
        if free_rows.len() != dense.len() {
            return false;
        }
        let k = dense.len();
        let width = self.nonbasic.len() + 1;
        let column = |i: usize, c: usize| {
            if c < width - 1 {
                orig.rows[i][self.nonbasic[c]]
            } else {
                orig.rhs[i]
            }
        };
        // Values of the dense basics, then of the unit basics by substitution.
        let xk = if k > 0 {
            let bk = nalgebra::DMatrix::from_fn(k, k, |a, b| orig.rows[free_rows[a]][self.basic[dense[b]]]);
            let rk = nalgebra::DMatrix::from_fn(k, width, |a, c| column(free_rows[a], c));
            match bk.lu().solve(&rk) {
                Some(x) if x.iter().all(|v| v.is_finite()) => x,
                _ => return false,
            }
        } else {
            nalgebra::DMatrix::zeros(0, width)
        };
        let mut sol = vec![vec![0.0; width]; m];
        for (a, &r) in dense.iter().enumerate() {
            for c in 0..width {
                sol[r][c] = xk[(a, c)];
            }
        }
        for i in 0..m {
            let Some((r, sign)) = covered[i] else { continue };
            let coupling: Vec<(usize, f64)> = dense
                .iter()
                .enumerate()
                .map(|(a, &rd)| (a, orig.rows[i][self.basic[rd]]))
                .filter(|&(_, v)| v != 0.0)
                .collect();
            for c in 0..width {
                let mut v = column(i, c);
                for &(a, coef) in &coupling {
                    v -= coef * xk[(a, c)];
                }
                sol[r][c] = v / sign;
            }
        }
        for r in 0..m {
            for c in 0..width - 1 {
                let v = sol[r][c];
                self.a[r][c] = if v.abs() < ROUND_OFF { S::zero() } else { S::from_f64(v) };
            }
            let v = sol[r][width - 1];
            self.beta[r] = if v < 0.0 && v > -HARRIS_TOL { S::zero() } else { S::from_f64(v) };
        }
        self.price();
        true
    }

    /// Dual simplex pivots that remove negative basic values uncovered by a
    /// rebuild while keeping the reduced costs non-negative. Uses a two-pass
    /// ratio test so dual degeneracy does not force tiny pivots, and rolls the
    /// dictionary back if the repair does not settle. Returns the number of
    /// pivots kept.
    fn dual_repair(&mut self) -> usize {
        let floor = -S::tol(REPAIR_TOL);
        if !self.beta.iter().any(|b| *b < floor) {
            return 0;
        }
        let piv_tol = S::tol(PIVOT_TOL);
        let relax = S::tol(COST_TOL);
        let snapshot =
            (self.a.clone(), self.beta.clone(), self.basic.clone(), self.nonbasic.clone(), self.d.clone(), self.z0.clone());
        let limit = 4 * self.a.len() + 100;
        let mut since = 0;
        for pivots in 0..limit {
            if since >= REFACTOR_EVERY {
                if !self.refactor() {
                    break;
                }
                since = 0;
            }
            let mut worst: Option<usize> = None;
            for r in 0..self.beta.len() {
                if self.beta[r] < floor && worst.is_none_or(|w| self.beta[r] < self.beta[w]) {
                    worst = Some(r);
                }
            }
            let Some(r) = worst else {
                return pivots;
            };
            let mut bound: Option<S> = None;
            for k in 0..self.nonbasic.len() {
                let ark = &self.a[r][k];
                if *ark >= -piv_tol.clone() {
                    continue;
                }
                let dk = if self.d[k].is_negative() { S::zero() } else { self.d[k].clone() };
                let ratio = (dk + &relax) / &(-ark.clone());
                if bound.as_ref().is_none_or(|b| ratio < *b) {
                    bound = Some(ratio);
                }
            }
            let Some(bound) = bound else {
                break;
            };
            let mut best: Option<usize> = None;
            for k in 0..self.nonbasic.len() {
                let ark = &self.a[r][k];
                if *ark >= -piv_tol.clone() {
                    continue;
                }
                let dk = if self.d[k].is_negative() { S::zero() } else { self.d[k].clone() };
                if dk / &(-ark.clone()) <= bound && best.is_none_or(|b| *ark < self.a[r][b]) {
                    best = Some(k);
                }
            }
            let Some(k) = best else {
                break;
            };
            self.pivot(r, k);
            since += 1;
        }
        (self.a, self.beta, self.basic, self.nonbasic, self.d, self.z0) = snapshot;
        0
    }

    /// Leaving row for entering column `k`, or `None` if the step is unbounded.
    fn ratio_test(&self, k: usize, bland: bool) -> Option<(usize, S)> {
        let piv_tol = S::tol(PIVOT_TOL);
        let mut leave: Option<(usize, S)> = None;
        if S::EXACT {
            for r in 0..self.a.len() {
                let ark = &self.a[r][k];
                if *ark <= piv_tol {
                    continue;
                }
                let ratio = self.beta[r].clone() / ark;
                let better = match &leave {
                    None => true,
                    Some((lr, lratio)) => ratio < *lratio || (ratio == *lratio && self.basic[r] < self.basic[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            return leave;
        }
        // Harris two-pass test: bound the step with every row relaxed by the
        // feasibility tolerance, then take the largest pivot within that bound.
        let relax = S::tol(HARRIS_TOL);
        let mut bound: Option<S> = None;
        for r in 0..self.a.len() {
            let ark = &self.a[r][k];
            if *ark > piv_tol {
                let t = (self.beta[r].clone() + &relax) / ark;
                if bound.as_ref().is_none_or(|b| t < *b) {
                    bound = Some(t);
                }
            }
        }
        let bound = bound?;
        for r in 0..self.a.len() {
            let ark = &self.a[r][k];
            if *ark <= piv_tol {
                continue;
            }
            let ratio = self.beta[r].clone() / ark;
            if ratio > bound {
                continue;
            }
            let better = match &leave {
                None => true,
                Some((lr, _)) => {
                    if bland {
                        self.basic[r] < self.basic[*lr]
                    } else {
                        *ark > self.a[*lr][k]
                    }
                }
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        leave.map(|(r, ratio)| (r, if ratio.is_negative() { S::zero() } else { ratio }))
    }

    /// Runs the simplex loop on the current objective.
    fn optimize(&mut self, allow_unbounded_error: bool) -> Result<()> {
        let cost_tol = S::tol(COST_TOL);
        let neg_cost = -cost_tol;
        let max_iter = 50 * (self.a.len() + self.nonbasic.len()) + 1000;
        let mut degenerate = 0;
        let mut since_refactor = 0;
        let mut refactors = 0;
        for _ in 0..max_iter {
            if self.original.is_some() && since_refactor >= REFACTOR_EVERY {
                self.refactor();
                since_refactor = 0;
            }
            let bland = degenerate >= DEGENERATE_STREAK;
            let entering = if bland {
                (0..self.d.len()).filter(|&k| self.d[k] < neg_cost).min_by_key(|&k| self.nonbasic[k])
            } else {
                let mut best: Option<usize> = None;
                for k in 0..self.d.len() {
                    if self.d[k] < neg_cost && best.is_none_or(|b| self.d[k] < self.d[b]) {
                        best = Some(k);
                    }
                }
                best
            };
            let Some(k) = entering else {
                // Confirm optimality on a freshly factored dictionary.
                if self.original.is_some() && since_refactor > 0 && refactors < MAX_FINAL_REFACTORS {
                    refactors += 1;
                    if self.refactor() {
                        since_refactor = self.dual_repair();
                        continue;
                    }
                }
                return Ok(());
            };
            let Some((r, ratio)) = self.ratio_test(k, bland) else {
                return if allow_unbounded_error {
                    Err(Error::Unbounded)
                } else {
                    Err(Error::Invariant("phase one is unbounded".into()))
                };
            };
            if ratio <= S::tol(1e-12) {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, k);
            since_refactor += 1;
            if !S::EXACT {
                for b in &mut self.beta {
                    if b.is_negative() {
                        *b = S::zero();
                    }
                }
            }
        }
        Err(Error::Invariant(format!("simplex exceeded {max_iter} iterations")))
    }
}

/// Divides a constraint by its largest coefficient so that pivot and
/// feasibility tolerances mean the same thing on every row.
fn normalize_row<S: Scalar>(row: &mut [S], rhs: &mut S) {
    let m = row.iter().fold(S::zero(), |m, v| if v.abs() > m { v.abs() } else { m });
    if scalar::positive(&m) {
        for v in row.iter_mut() {
            *v /= &m;
        }
        *rhs /= &m;
    }
}

/// Solves `min c.y` s.t. `E y = e`, `G y <= g`, `y >= 0`; returns `y`.
fn solve_standard<S: Scalar>(c: &[S], eqs: &[(Vec<S>, S)], les: &[(Vec<S>, S)], ny: usize) -> Result<Vec<S>> {
    let mut kinds = vec![Kind::Structural; ny];
    let mut a = Vec::new();
    let mut beta = Vec::new();
    let mut basic = Vec::new();
    let mut nonbasic: Vec<usize> = (0..ny).collect();
    let mut surplus_cols: Vec<(usize, usize)> = Vec::new();
    let add_var = |kinds: &mut Vec<Kind>, kind: Kind| {
        kinds.push(kind);
        kinds.len() - 1
    };
    let prepared = |row: &Vec<S>, rhs: &S| {
        let (mut row, mut rhs) = (row.clone(), rhs.clone());
        if !S::EXACT {
            normalize_row(&mut row, &mut rhs);
        }
        (row, rhs)
    };
    for (row, rhs) in les {
        let (row, rhs) = prepared(row, rhs);
        if rhs.is_negative() {
            let s = add_var(&mut kinds, Kind::Slack);
            let art = add_var(&mut kinds, Kind::Artificial);
            nonbasic.push(s);
            surplus_cols.push((a.len(), s));
            a.push(row.iter().map(|v| -v.clone()).collect::<Vec<S>>());
            beta.push(-rhs);
            basic.push(art);
        } else {
            let s = add_var(&mut kinds, Kind::Slack);
            a.push(row);
            beta.push(rhs);
            basic.push(s);
        }
    }
    for (row, rhs) in eqs {
        let (row, rhs) = prepared(row, rhs);
        let art = add_var(&mut kinds, Kind::Artificial);
        if rhs.is_negative() {
            a.push(row.iter().map(|v| -v.clone()).collect());
            beta.push(-rhs);
        } else {
            a.push(row);
            beta.push(rhs);
        }
        basic.push(art);
    }
    let width = nonbasic.len();
    for row in a.iter_mut() {
        row.resize(width, S::zero());
    }
    for (r, s) in surplus_cols {
        let k = nonbasic.iter().position(|&v| v == s).unwrap();
        a[r][k] = -S::one();
    }

    let original = (!S::EXACT).then(|| {
        let nvars = kinds.len();
        let rows = a
            .iter()
            .zip(&basic)
            .map(|(row, &b)| {
                let mut full = vec![0.0; nvars];
                for (k, v) in row.iter().enumerate() {
                    full[nonbasic[k]] = v.to_f64();
                }
                full[b] = 1.0;
                full
            })
            .collect();
        let rows: Vec<Vec<f64>> = rows;
        let unit = (0..nvars)
            .map(|v| {
                let mut nz = rows.iter().enumerate().filter(|(_, row)| row[v] != 0.0);
                match (nz.next(), nz.next()) {
                    (Some((i, row)), None) => Some((i, row[v])),
                    _ => None,
                }
            })
            .collect();
        Original { rows, rhs: beta.iter().map(Scalar::to_f64).collect(), unit }
    });
    let cost = kinds.iter().map(|&k| if k == Kind::Artificial { S::one() } else { S::zero() }).collect();
    let mut dict = Dictionary {
        a,
        beta,
        basic,
        nonbasic,
        d: vec![S::zero(); width],
        z0: S::zero(),
        kinds,
        cost,
        original,
    };

    let has_artificial = dict.basic.iter().any(|&b| dict.kinds[b] == Kind::Artificial);
    if has_artificial {
        dict.price();
        dict.optimize(false)?;
        let scale = dict.beta.iter().fold(S::one(), |m, b| if b.abs() > m { b.abs() } else { m });
        if dict.z0 > S::tol(FEAS_TOL) * &scale {
            return Err(Error::Infeasible);
        }
        // Drive remaining artificials out of the basis. One that cannot leave
        // marks a redundant constraint and stays basic at zero.
        let piv_tol = S::tol(PIVOT_TOL);
        let mut stuck = Vec::new();
        for r in 0..dict.a.len() {
            if dict.kinds[dict.basic[r]] != Kind::Artificial {
                continue;
            }
            let k = (0..dict.nonbasic.len())
                .filter(|&k| dict.kinds[dict.nonbasic[k]] != Kind::Artificial && dict.a[r][k].abs() > piv_tol)
                .max_by(|&x, &y| dict.a[r][x].abs().partial_cmp(&dict.a[r][y].abs()).unwrap());
            match k {
                Some(k) => dict.pivot(r, k),
                None => stuck.push(r),
            }
        }
        let mut k = 0;
        while k < dict.nonbasic.len() {
            if dict.kinds[dict.nonbasic[k]] == Kind::Artificial {
                dict.remove_column(k);
            } else {
                k += 1;
            }
        }
        // A stuck row has no usable entries; clear the noise so it never pivots.
        for r in stuck {
            dict.a[r].iter_mut().for_each(|v| *v = S::zero());
            dict.beta[r] = S::zero();
        }
    }

    for v in 0..dict.kinds.len() {
        dict.cost[v] = if v < ny { c[v].clone() } else { S::zero() };
    }
    if !dict.refactor() {
        dict.price();
    }
    dict.optimize(true)?;

    let mut y = vec![S::zero(); ny];
    for (r, &b) in dict.basic.iter().enumerate() {
        if b < ny {
            y[b] = if dict.beta[r].is_negative() { S::zero() } else { dict.beta[r].clone() };
        }
    }
    Ok(y)
}
