//! Monte Carlo checks of the samplers and mechanisms against closed forms.

use countmech::baselines::{
    calibrate_sigma, default_staircase_gamma, discrete_gaussian_mechanism, sample_discrete_gaussian,
    staircase_mechanism, staircase_sampler,
};
use countmech::constructors::{heuristic_constructor, Selector};
use countmech::counts::{apply_mechanism, distribution_of, histogram_of, CountDistribution, PrivacyParam, TransitionMatrix};
use countmech::membership::in_f;
use countmech::metrics::analytic_output_variance;
use countmech::pipeline::synthetic::Synthetic;
use countmech::privatize::{classic_laplace, cyclic_gaussian, cyclic_laplace, floor_distribution};
use countmech::rng;

fn binomial_zeta(seed: u64) -> (countmech::counts::CountTable, CountDistribution<f64>) {
    let table = Synthetic::preset("binomial").unwrap().generate(seed).unwrap();
    let zeta = distribution_of(&histogram_of(&table, 21).unwrap()).unwrap();
    (table, zeta)
}

fn fixed_point_mechanism(zeta: &CountDistribution<f64>, eps: f64) -> TransitionMatrix<f64> {
    let p = PrivacyParam::from_epsilon(eps).unwrap();
    let t = heuristic_constructor(zeta, &p, Selector::Sandwich).unwrap().matrix;
    assert!(in_f(&t, zeta.probs(), &p, 1e-9));
    t
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

#[test]
fn released_distribution_is_unbiased_for_a_fixed_point() {
    let (table, zeta) = binomial_zeta(1);
    let t = fixed_point_mechanism(&zeta, 0.5);
    let reps = 200;
    let n = zeta.n();
    let mut samples = vec![Vec::with_capacity(reps); n];
    for rep in 0..reps {
        let out = apply_mechanism(&table, &t, rep as u64).unwrap();
        let d: CountDistribution<f64> = distribution_of(&histogram_of(&out, n).unwrap()).unwrap();
        for (j, v) in d.probs().iter().enumerate() {
            samples[j].push(*v);
        }
    }
    let var = analytic_output_variance(zeta.probs(), &t, table.len() as u64);
    for j in 0..n {
        let (m, _) = mean_var(&samples[j]);
        let se = (var[j] / reps as f64).sqrt();
        assert!((m - zeta.probs()[j]).abs() <= 3.0 * se + 1e-12, "bin {j}: mean {m}, target {}, se {se}", zeta.probs()[j]);
    }
}

#[test]
fn released_variance_matches_closed_form() {
    let (table, zeta) = binomial_zeta(2);
    let t = fixed_point_mechanism(&zeta, 0.5);
    let reps = 1000;
    let n = zeta.n();
    let mut samples = vec![Vec::with_capacity(reps); n];
    for rep in 0..reps {
        let out = apply_mechanism(&table, &t, 10_000 + rep as u64).unwrap();
        let d: CountDistribution<f64> = distribution_of(&histogram_of(&out, n).unwrap()).unwrap();
        for (j, v) in d.probs().iter().enumerate() {
            samples[j].push(*v);
        }
    }
    let records = table.len() as f64;
    for j in 0..n {
        let quoted = (zeta.probs()[j] - (0..n).map(|l| zeta.probs()[l] * t.get(l, j).powi(2)).sum::<f64>()) / records;
        let (_, v) = mean_var(&samples[j]);
        // Bins whose variance is tiny carry little information; compare where it matters.
        if quoted > 1e-7 {
            assert!((v - quoted).abs() <= 0.2 * quoted, "bin {j}: empirical {v}, closed form {quoted}");
        }
    }
}

#[test]
fn constant_rows_reproduce_their_law() {
    let z = vec![0.1, 0.2, 0.3, 0.4];
    let t = TransitionMatrix::from_rows(vec![z.clone(); 4]).unwrap();
    let counts: Vec<u64> = (0..200_000).map(|i| i % 4).collect();
    let table = countmech::counts::CountTable::from_counts(&counts, 4).unwrap();
    let out = apply_mechanism(&table, &t, 5).unwrap();
    let d: CountDistribution<f64> = distribution_of(&histogram_of(&out, 4).unwrap()).unwrap();
    for (a, b) in d.probs().iter().zip(&z) {
        assert!((a - b).abs() < 0.005, "{a} vs {b}");
    }
}

#[test]
fn laplace_privatizers_are_unbiased() {
    let (_, zeta) = binomial_zeta(3);
    let reps = 10_000;
    let records = 10_000u64;
    let eps = 0.5;
    let mut rng = rng::seeded(31);
    let n = zeta.n();
    let mut cyc = vec![0.0; n];
    let mut cla = vec![0.0; n];
    for _ in 0..reps {
        for (a, v) in cyc.iter_mut().zip(cyclic_laplace(&zeta, records, eps, &mut rng).unwrap().values) {
            *a += v;
        }
        for (a, v) in cla.iter_mut().zip(classic_laplace(&zeta, records, eps, &mut rng).unwrap().values) {
            *a += v;
        }
    }
    let b = 1.0 / (records as f64 * eps);
    // Per-entry standard deviations: cyclic is a difference of two Laplace(b), classic is Laplace(2b).
    let se_cyc = (4.0 * b * b / reps as f64).sqrt();
    let se_cla = (8.0 * b * b / reps as f64).sqrt();
    for i in 0..n {
        let z = zeta.probs()[i];
        assert!((cyc[i] / reps as f64 - z).abs() <= 4.0 * se_cyc, "cyclic bin {i}");
        assert!((cla[i] / reps as f64 - z).abs() <= 4.0 * se_cla, "classic bin {i}");
    }
}

#[test]
fn cumulative_sum_variances() {
    let zeta = CountDistribution::new(vec![0.25; 4]).unwrap();
    let (records, eps) = (1000u64, 1.0);
    let unit = 1.0 / (records as f64 * eps).powi(2);
    let reps = 100_000;
    let mut rng = rng::seeded(32);
    let mut cyc: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(reps)).collect();
    let mut cla: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(reps)).collect();
    for _ in 0..reps {
        let c = cyclic_laplace(&zeta, records, eps, &mut rng).unwrap().values;
        let l = classic_laplace(&zeta, records, eps, &mut rng).unwrap().values;
        let (mut sc, mut sl) = (0.0, 0.0);
        for i in 0..3 {
            sc += c[i];
            sl += l[i];
            cyc[i].push(sc);
            cla[i].push(sl);
        }
    }
    for i in 0..3 {
        let vc = mean_var(&cyc[i]).1;
        let vl = mean_var(&cla[i]).1;
        assert!((vc - 4.0 * unit).abs() <= 0.1 * 4.0 * unit, "cyclic index {i}: {vc}");
        let classic = 8.0 * (i + 1) as f64 * unit;
        assert!((vl - classic).abs() <= 0.1 * classic, "classic index {i}: {vl}");
        // The two closed forms differ by 2(i + 1).
        let target = 2.0 * (i + 1) as f64;
        let ratio = vl / vc;
        assert!((ratio - target).abs() <= 0.2 * target, "index {i}: ratio {ratio}, target {target}");
    }
}

#[test]
fn cyclic_gaussian_variance() {
    let zeta = CountDistribution::new(vec![0.2; 5]).unwrap();
    let sigma = 0.01;
    let mut rng = rng::seeded(33);
    let reps = 100_000;
    let mut first = Vec::with_capacity(reps);
    for _ in 0..reps {
        let v = cyclic_gaussian(&zeta, sigma, &mut rng).unwrap().values;
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        first.push(v[2]);
    }
    let (_, var) = mean_var(&first);
    let target = 2.0 * sigma * sigma;
    assert!((var - target).abs() <= 0.1 * target, "variance {var}, target {target}");
}

#[test]
fn staircase_at_half_matches_two_sided_geometric() {
    let eps: f64 = 1.0;
    let a = (-eps).exp();
    let mut rng = rng::seeded(34);
    let reps = 100_000;
    let mut hist = std::collections::BTreeMap::new();
    for _ in 0..reps {
        let k = staircase_sampler(eps, 0.5, &mut rng).round() as i64;
        *hist.entry(k).or_insert(0usize) += 1;
    }
    let geometric = |k: i64| (1.0 - a) / (1.0 + a) * a.powi(k.abs() as i32);
    let mut tv = 0.0;
    let mut covered = 0.0;
    for k in -40..=40 {
        let emp = *hist.get(&k).unwrap_or(&0) as f64 / reps as f64;
        tv += (emp - geometric(k)).abs();
        covered += geometric(k);
    }
    tv = 0.5 * (tv + (1.0 - covered));
    assert!(tv <= 0.02, "total variation {tv}");
}

#[test]
fn staircase_noise_is_centered_and_outputs_are_in_range() {
    let eps = 1.0;
    let gamma = default_staircase_gamma(eps);
    assert!((gamma - 1.0 / (1.0 + 0.5f64.exp())).abs() < 1e-15);
    let mut rng = rng::seeded(35);
    let reps = 100_000;
    let draws: Vec<f64> = (0..reps).map(|_| staircase_sampler(eps, gamma, &mut rng)).collect();
    let (m, v) = mean_var(&draws);
    assert!(m.abs() <= 4.0 * (v / reps as f64).sqrt(), "mean {m}");
    for c in 0..10 {
        let out = staircase_mechanism(c, eps, gamma, 10, &mut rng);
        assert!(out < 10);
    }
}

#[test]
fn discrete_gaussian_variance_and_range() {
    let mut rng = rng::seeded(36);
    let sigma = 20.0;
    let draws: Vec<f64> = (0..100_000).map(|_| sample_discrete_gaussian(sigma, &mut rng) as f64).collect();
    let (m, v) = mean_var(&draws);
    assert!((v - sigma * sigma).abs() <= 0.05 * sigma * sigma, "variance {v}");
    assert!(m.abs() <= 4.0 * (v / draws.len() as f64).sqrt());
    for c in [0u64, 3, 9] {
        for _ in 0..100 {
            assert!(discrete_gaussian_mechanism(c, sigma, 10, &mut rng) < 10);
        }
    }
    let same = (0..10_000).filter(|_| discrete_gaussian_mechanism(4, 0.01, 10, &mut rng) == 4).count();
    assert!(same as f64 / 10_000.0 > 0.999);
    let sigmas: Vec<f64> = [0.1, 0.5, 1.0, 2.0].iter().map(|&e| calibrate_sigma(e, 1e-4).unwrap()).collect();
    assert!(sigmas.windows(2).all(|w| w[0] > w[1]));
}

#[test]
fn float_heuristic_stays_accurate_at_scale() {
    for (n, seed) in [(200usize, 1u64), (1000, 2), (2000, 3)] {
        let table = Synthetic::Binomial { size: (n - 1) as u64, p: 0.5, records: 10_000 }.generate(seed).unwrap();
        let zeta: CountDistribution<f64> = distribution_of(&histogram_of(&table, n).unwrap()).unwrap();
        let z = floor_distribution(&zeta, 1e-5).unwrap();
        let p = PrivacyParam::from_epsilon(0.8).unwrap();
        for sel in Selector::ALL {
            let out = heuristic_constructor(&z, &p, sel).unwrap();
            assert!(out.additions < 2 * n, "n = {n}, {sel:?}: {} additions", out.additions);
            let image = out.matrix.push_forward(z.probs());
            let worst = image.iter().zip(z.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst <= 1e-9, "n = {n}, {sel:?}: fixed-point residual {worst}");
            assert!(in_f(&out.matrix, z.probs(), &p, 1e-9), "n = {n}, {sel:?}");
        }
    }
}
