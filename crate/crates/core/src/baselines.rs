//! Baseline mechanisms: truncated geometric, staircase and discrete Gaussian.

use rand::Rng;
use rand_distr::{Distribution, Open01};

use crate::counts::{PrivacyParam, TransitionMatrix};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Truncated geometric mechanism on `0..n`.
///
/// With `alpha = 1/lambda`, interior columns are `(1-alpha)/(1+alpha) alpha^|i-j|`
/// and the two boundary columns are `alpha^|i-j| / (1+alpha)`.
pub fn truncated_geometric_matrix<S: Scalar>(p: &PrivacyParam<S>, n: usize) -> Result<TransitionMatrix<S>> {
    if n == 0 {
        return invalid("n must be positive");
    }
    if n == 1 {
        return TransitionMatrix::new(Matrix::identity(1));
    }
    let alpha = p.alpha();
    let mut powers = vec![S::one(); n];
    for d in 1..n {
        powers[d] = powers[d - 1].clone() * &alpha;
    }
    let one_plus = S::one() + &alpha;
    let interior = (S::one() - &alpha) / &one_plus;
    let boundary = S::one() / &one_plus;
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let f = if j == 0 || j == n - 1 { &boundary } else { &interior };
            m.set(i, j, f.clone() * &powers[i.abs_diff(j)]);
        }
    }
    TransitionMatrix::new(m)
}

/// Staircase shape parameter `1 / (1 + e^(epsilon/2))`.
pub fn default_staircase_gamma(epsilon: f64) -> f64 {
    1.0 / (1.0 + (epsilon / 2.0).exp())
}

/// One draw of staircase noise for sensitivity one.
///
/// Sampled as a mixture: random sign, geometric step index, a choice between
/// the inner part `[0, gamma)` and outer part `[gamma, 1)` of the step, and a
/// uniform position within that part.
pub fn staircase_sampler<R: Rng + ?Sized>(epsilon: f64, gamma: f64, rng: &mut R) -> f64 {
    let b = (-epsilon).exp();
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let u: f64 = Open01.sample(rng);
    let g = (u.ln() / b.ln()).floor();
    let p_inner = gamma / (gamma + (1.0 - gamma) * b);
    let inner = rng.random::<f64>() < p_inner;
    let w: f64 = rng.random();
    let mag = if inner { g + gamma * w } else { g + gamma + (1.0 - gamma) * w };
    sign * mag
}

/// Rounds half away from zero.
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

fn clamp_count(v: f64, n: usize) -> u64 {
    v.max(0.0).min((n - 1) as f64) as u64
}

/// Staircase-perturbed count, rounded and clamped to `0..n`.
pub fn staircase_mechanism<R: Rng + ?Sized>(count: u64, epsilon: f64, gamma: f64, n: usize, rng: &mut R) -> u64 {
    clamp_count(round_half_away(count as f64 + staircase_sampler(epsilon, gamma, rng)), n)
}

/// `sigma = sqrt(2 ln(1.25/delta)) / epsilon`.
pub fn calibrate_sigma(epsilon: f64, delta: f64) -> Result<f64> {
    if !(epsilon > 0.0 && delta > 0.0 && delta < 1.0) {
        return invalid(format!("need epsilon > 0 and 0 < delta < 1, got {epsilon}, {delta}"));
    }
    Ok((2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

/// Discrete Laplace draw with `P(y) ∝ exp(-|y| / t)`.
fn discrete_laplace<R: Rng + ?Sized>(t: f64, rng: &mut R) -> i64 {
    let b = (-1.0 / t).exp();
    loop {
        let u: f64 = Open01.sample(rng);
        let g = (u.ln() / b.ln()).floor() as i64;
        let negative = rng.random::<bool>();
        if negative && g == 0 {
            continue;
        }
        return if negative { -g } else { g };
    }
}

/// Discrete Gaussian draw by rejection from a discrete Laplace proposal.
pub fn sample_discrete_gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> i64 {
    let t = sigma.floor() + 1.0;
    let s2 = sigma * sigma;
    loop {
        let y = discrete_laplace(t, rng);
        let d = (y.abs() as f64) - s2 / t;
        if rng.random::<f64>() < (-d * d / (2.0 * s2)).exp() {
            return y;
        }
    }
}

/// Discrete-Gaussian-perturbed count, clamped to `0..n`.
pub fn discrete_gaussian_mechanism<R: Rng + ?Sized>(count: u64, sigma: f64, n: usize, rng: &mut R) -> u64 {
    clamp_count(count as f64 + sample_discrete_gaussian(sigma, rng) as f64, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::scalar::{rat, Rational};

    #[test]
    fn truncated_geometric_n3() {
        let p = PrivacyParam::from_lambda(rat(2, 1)).unwrap();
        let t = truncated_geometric_matrix(&p, 3).unwrap();
        let want: Vec<Vec<Rational>> = vec![
            vec![rat(2, 3), rat(1, 6), rat(1, 6)],
            vec![rat(1, 3), rat(1, 3), rat(1, 3)],
            vec![rat(1, 6), rat(1, 6), rat(2, 3)],
        ];
        assert_eq!(t.matrix().to_rows(), want);
    }

    #[test]
    fn truncated_geometric_large_epsilon_is_identity() {
        let p = PrivacyParam::from_epsilon(50.0).unwrap();
        let t = truncated_geometric_matrix(&p, 5).unwrap();
        assert!(t.matrix().max_abs_diff(&Matrix::identity(5)) < 1e-12);
    }

    #[test]
    fn gamma_default() {
        assert!((default_staircase_gamma(1.0) - 0.3775406687981454).abs() < 1e-12);
    }

    #[test]
    fn rounding() {
        assert_eq!(round_half_away(2.5), 3.0);
        assert_eq!(round_half_away(-2.5), -3.0);
        assert_eq!(round_half_away(0.49), 0.0);
    }

    #[test]
    fn sigma_calibration() {
        let s = calibrate_sigma(1.0, 1e-5).unwrap();
        assert!((s - (2.0 * 125_000f64.ln()).sqrt()).abs() < 1e-12);
        assert!(calibrate_sigma(1.0, 0.0).is_err());
    }

    #[test]
    fn tiny_sigma_returns_input() {
        let mut r = rng::seeded(4);
        for _ in 0..1000 {
            assert_eq!(discrete_gaussian_mechanism(7, 0.01, 20, &mut r), 7);
        }
    }

    #[test]
    fn mechanisms_stay_in_range() {
        let mut r = rng::seeded(8);
        for _ in 0..2000 {
            assert!(staircase_mechanism(0, 0.1, 0.3, 5, &mut r) < 5);
            assert!(discrete_gaussian_mechanism(4, 10.0, 5, &mut r) < 5);
        }
    }
}
