//! Count tables, histograms, distributions and transition matrices.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::scalar::{self, Scalar};

/// Privacy level `epsilon` with `lambda = e^epsilon` stored alongside.
///
/// In exact mode `lambda` is a rational and `epsilon` is `ln(lambda)` as a float.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivacyParam<S> {
    epsilon: f64,
    lambda: S,
}

impl PrivacyParam<f64> {
    pub fn from_epsilon(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return invalid(format!("epsilon must be positive and finite, got {epsilon}"));
        }
        Ok(PrivacyParam { epsilon, lambda: epsilon.exp() })
    }
}

impl<S: Scalar> PrivacyParam<S> {
    /// Builds from `lambda > 1`.
    pub fn from_lambda(lambda: S) -> Result<Self> {
        if lambda <= S::one() {
            return invalid(format!("lambda must exceed 1, got {lambda:?}"));
        }
        Ok(PrivacyParam { epsilon: lambda.to_f64().ln(), lambda })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda(&self) -> &S {
        &self.lambda
    }

    /// `1 / lambda`.
    pub fn alpha(&self) -> S {
        S::one() / &self.lambda
    }
}

/// One record of a count table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub category: String,
    pub count: u64,
}

/// A table of `(category, count)` rows with counts in `0..n`.
///
/// Counts at or above `n - 1` are top-coded to `n - 1` on construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    rows: Vec<CountRow>,
    n: usize,
}

impl CountTable {
    pub fn new(rows: Vec<CountRow>, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("n must be positive");
        }
        let cap = (n - 1) as u64;
        let rows = rows
            .into_iter()
            .map(|r| CountRow { count: r.count.min(cap), ..r })
            .collect();
        Ok(CountTable { rows, n })
    }

    /// Table with generated category names `c0, c1, ...`.
    pub fn from_counts(counts: &[u64], n: usize) -> Result<Self> {
        let rows = counts
            .iter()
            .enumerate()
            .map(|(i, &count)| CountRow { category: format!("c{i}"), count })
            .collect();
        Self::new(rows, n)
    }

    pub fn rows(&self) -> &[CountRow] {
        &self.rows
    }

    pub fn counts(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.count).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reads CSV with header `category,count`.
    pub fn read_csv<R: Read>(reader: R, n: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "category" || &headers[1] != "count" {
            return invalid(format!("expected header `category,count`, got {headers:?}"));
        }
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let category = record[0].to_string();
            let raw = &record[1];
            let count: i128 = raw
                .parse()
                .map_err(|_| Error::InvalidInput(format!("row {}: count {raw:?} is not an integer", line + 1)))?;
            if count < 0 {
                return invalid(format!("row {}: negative count {count}", line + 1));
            }
            let count = u64::try_from(count).unwrap_or(u64::MAX);
            rows.push(CountRow { category, count });
        }
        Self::new(rows, n)
    }

    pub fn read_csv_path(path: &std::path::Path, n: usize) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, n)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["category", "count"])?;
        for r in &self.rows {
            wtr.write_record([r.category.as_str(), &r.count.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &std::path::Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Histogram of a table over `0..n`; counts above `n - 1` land in the last bin.
pub fn histogram_of(table: &CountTable, n: usize) -> Result<Vec<u64>> {
    if n == 0 {
        return invalid("n must be positive");
    }
    let mut h = vec![0u64; n];
    for r in table.rows() {
        let bin = (r.count as usize).min(n - 1);
        h[bin] += 1;
    }
    Ok(h)
}

/// Probability vector over the count values `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountDistribution<S> {
    probs: Vec<S>,
}

impl<S: Scalar> CountDistribution<S> {
    /// Validates non-negativity and unit sum (within `1e-9` in float mode).
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.is_empty() {
            return invalid("distribution must be non-empty");
        }
        if probs.iter().any(|p| p.is_negative()) {
            return invalid("distribution has a negative entry");
        }
        let total = scalar::sum(&probs);
        if !scalar::eq_tol(&total, &S::one(), &S::tol(1e-9)) {
            return invalid(format!("distribution sums to {total:?}"));
        }
        Ok(CountDistribution { probs })
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn to_f64(&self) -> CountDistribution<f64> {
        CountDistribution { probs: self.probs.iter().map(Scalar::to_f64).collect() }
    }
}

/// Normalizes a histogram into a distribution.
pub fn distribution_of<S: Scalar>(hist: &[u64]) -> Result<CountDistribution<S>> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return invalid("histogram is empty");
    }
    let probs = hist.iter().map(|&h| S::from_ratio(h as i64, total as i64)).collect();
    CountDistribution::new(probs)
}

/// Square row-stochastic matrix; entry `(i, j)` is `P(output j | input i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix<S> {
    m: Matrix<S>,
}

impl<S: Scalar> TransitionMatrix<S> {
    /// Wraps a square matrix. Stochasticity is checked by the membership tests.
    pub fn new(m: Matrix<S>) -> Result<Self> {
        if m.rows() != m.cols() || m.rows() == 0 {
            return invalid(format!("transition matrix must be square and non-empty, got {}x{}", m.rows(), m.cols()));
        }
        Ok(TransitionMatrix { m })
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let len = rows.len();
        if rows.iter().any(|r| r.len() != len) {
            return invalid("transition matrix must be square");
        }
        Self::new(Matrix::from_rows(rows))
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix<S> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        self.m.get(i, j)
    }

    /// Distribution of the output when the input is distributed as `z`.
    pub fn push_forward(&self, z: &[S]) -> Vec<S> {
        self.m.left_mul(z)
    }

    pub fn to_f64(&self) -> TransitionMatrix<f64> {
        TransitionMatrix { m: self.m.to_f64() }
    }
}

/// Replaces each count `d` with an independent draw from row `d` of `t`.
///
/// Row `r` of the table uses sub-stream `r` of `seed`, so output is
/// deterministic and independent of processing order.
pub fn apply_mechanism<S: Scalar>(table: &CountTable, t: &TransitionMatrix<S>, seed: u64) -> Result<CountTable> {
    let n = t.n();
    if table.n() != n {
        return invalid(format!("table has n = {} but matrix has n = {n}", table.n()));
    }
    let cumulative: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            (0..n)
                .map(|j| {
                    acc += t.get(i, j).to_f64().max(0.0);
                    acc
                })
                .collect()
        })
        .collect();
    for (i, c) in cumulative.iter().enumerate() {
        if !(c[n - 1] > 0.0) {
            return invalid(format!("row {i} of the transition matrix has no mass"));
        }
    }
    let rows = table
        .rows()
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let cdf = &cumulative[row.count as usize];
            let u: f64 = rng::stream(seed, r as u64).random::<f64>() * cdf[n - 1];
            CountRow { category: row.category.clone(), count: sample_cdf(cdf, u) as u64 }
        })
        .collect();
    CountTable::new(rows, n)
}

/// Index of the first cumulative value exceeding `u`, skipping zero-mass cells.
pub(crate) fn sample_cdf(cdf: &[f64], u: f64) -> usize {
    let idx = cdf.partition_point(|&c| c <= u);
    if idx < cdf.len() {
        return idx;
    }
    let last = cdf[cdf.len() - 1];
    cdf.iter().position(|&c| c >= last).unwrap_or(cdf.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};

    #[test]
    fn histogram_example() {
        let t = CountTable::from_counts(&[0, 2, 2, 1, 7], 5).unwrap();
        assert_eq!(histogram_of(&t, 5).unwrap(), vec![1, 1, 2, 0, 1]);
        let z: CountDistribution<Rational> = distribution_of(&[1, 1, 2, 0, 1]).unwrap();
        assert_eq!(z.probs(), &[rat(1, 5), rat(1, 5), rat(2, 5), rat(0, 1), rat(1, 5)]);
    }

    #[test]
    fn top_coding_on_ingest() {
        let t = CountTable::from_counts(&[0, 9], 3).unwrap();
        assert_eq!(t.counts(), vec![0, 2]);
    }

    #[test]
    fn csv_round_trip() {
        let t = CountTable::from_counts(&[3, 0, 1], 4).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("category,count\n"));
        let back = CountTable::read_csv(&buf[..], 4).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_rejects_negative_and_bad_header() {
        assert!(CountTable::read_csv("category,count\na,-1\n".as_bytes(), 3).is_err());
        assert!(CountTable::read_csv("name,value\na,1\n".as_bytes(), 3).is_err());
        assert!(CountTable::read_csv("category,count\na,x\n".as_bytes(), 3).is_err());
    }

    #[test]
    fn privacy_param_checks() {
        assert!(PrivacyParam::from_epsilon(0.0).is_err());
        let p = PrivacyParam::from_lambda(rat(2, 1)).unwrap();
        assert!((p.epsilon() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(p.alpha(), rat(1, 2));
        assert!(PrivacyParam::from_lambda(rat(1, 1)).is_err());
    }

    #[test]
    fn identity_mechanism_is_identity() {
        let t = CountTable::from_counts(&[0, 1, 2, 2, 1], 3).unwrap();
        let id = TransitionMatrix::new(Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(apply_mechanism(&t, &id, 5).unwrap(), t);
    }

    #[test]
    fn apply_is_deterministic_and_checks_dimension() {
        let t = CountTable::from_counts(&[0, 1, 2, 2, 1, 0, 0], 3).unwrap();
        let m = TransitionMatrix::from_rows(vec![vec![1.0 / 3.0; 3]; 3]).unwrap();
        assert_eq!(apply_mechanism(&t, &m, 11).unwrap(), apply_mechanism(&t, &m, 11).unwrap());
        let small = TransitionMatrix::new(Matrix::<f64>::identity(2)).unwrap();
        assert!(apply_mechanism(&t, &small, 1).is_err());
    }

    #[test]
    fn sample_cdf_skips_empty_cells() {
        let cdf = [0.0, 0.5, 0.5, 1.0];
        assert_eq!(sample_cdf(&cdf, 0.0), 1);
        assert_eq!(sample_cdf(&cdf, 0.6), 3);
        assert_eq!(sample_cdf(&cdf, 1.0), 3);
    }
}
