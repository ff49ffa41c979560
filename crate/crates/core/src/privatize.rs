//! Stage one: noisy release of the count distribution.
//!
//! The cyclic mechanisms add `L_i - L_{i+1}` (indices mod `n`) to each entry,
//! so the noisy vector still sums to one. The classic mechanism adds
//! independent noise to every entry.

use rand::Rng;
use rand_distr::{Distribution, Normal, Open01};

use crate::counts::CountDistribution;
use crate::error::{invalid, Result};

/// Noisy distribution before projection; may have negative entries.
#[derive(Clone, Debug, PartialEq)]
pub struct RawPrivatizedDistribution {
    pub values: Vec<f64>,
}

/// Draws from a Laplace distribution with scale `b` by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    let u: f64 = Open01.sample(rng);
    let u = u - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn check(zeta: &CountDistribution<f64>, n_records: u64, epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return invalid(format!("epsilon must be positive and finite, got {epsilon}"));
    }
    if n_records == 0 {
        return invalid("record count must be positive");
    }
    if zeta.n() == 0 {
        return invalid("empty distribution");
    }
    Ok(())
}

/// Cyclic Laplace mechanism with per-coordinate scale `1 / (N epsilon)`.
pub fn cyclic_laplace<R: Rng + ?Sized>(
    zeta: &CountDistribution<f64>,
    n_records: u64,
    epsilon: f64,
    rng: &mut R,
) -> Result<RawPrivatizedDistribution> {
    check(zeta, n_records, epsilon)?;
    let b = 1.0 / (n_records as f64 * epsilon);
    let noise: Vec<f64> = (0..zeta.n()).map(|_| sample_laplace(rng, b)).collect();
    Ok(cyclic_combine(zeta.probs(), &noise))
}

/// Classic Laplace mechanism with independent scale `2 / (N epsilon)` noise.
pub fn classic_laplace<R: Rng + ?Sized>(
    zeta: &CountDistribution<f64>,
    n_records: u64,
    epsilon: f64,
    rng: &mut R,
) -> Result<RawPrivatizedDistribution> {
    check(zeta, n_records, epsilon)?;
    let b = 2.0 / (n_records as f64 * epsilon);
    let values = zeta.probs().iter().map(|&p| p + sample_laplace(rng, b)).collect();
    Ok(RawPrivatizedDistribution { values })
}

/// Cyclic Gaussian mechanism with per-coordinate standard deviation `sigma`.
pub fn cyclic_gaussian<R: Rng + ?Sized>(
    zeta: &CountDistribution<f64>,
    sigma: f64,
    rng: &mut R,
) -> Result<RawPrivatizedDistribution> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return invalid(format!("sigma must be positive and finite, got {sigma}"));
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let noise: Vec<f64> = (0..zeta.n()).map(|_| normal.sample(rng)).collect();
    Ok(cyclic_combine(zeta.probs(), &noise))
}

fn cyclic_combine(probs: &[f64], noise: &[f64]) -> RawPrivatizedDistribution {
    let n = probs.len();
    let values = (0..n).map(|i| probs[i] + noise[i] - noise[(i + 1) % n]).collect();
    RawPrivatizedDistribution { values }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &RawPrivatizedDistribution) -> Result<CountDistribution<f64>> {
    let x = &v.values;
    if x.is_empty() || x.iter().any(|a| !a.is_finite()) {
        return invalid("cannot project an empty or non-finite vector");
    }
    let mut u = x.clone();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        acc += uj;
        let t = (acc - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = x.iter().map(|&a| (a - theta).max(0.0)).collect();
    let total: f64 = out.iter().sum();
    for o in &mut out {
        *o /= total;
    }
    CountDistribution::new(out)
}

/// Clamps every entry to at least `floor`, then renormalizes.
pub fn floor_distribution(z: &CountDistribution<f64>, floor: f64) -> Result<CountDistribution<f64>> {
    let raised: Vec<f64> = z.probs().iter().map(|&p| p.max(floor)).collect();
    let total: f64 = raised.iter().sum();
    CountDistribution::new(raised.into_iter().map(|p| p / total).collect())
}
