//! Property tests for the structural invariants, with independent oracles.

use countmech::baselines::truncated_geometric_matrix;
use countmech::constructors::{
    compute_q, heuristic_constructor, heuristic_constructor_with_hook, lp_fixed_point_constructor,
    unfixed_optimum_constructor, ConstructorState, Selector,
};
use countmech::counts::{CountDistribution, PrivacyParam, TransitionMatrix};
use countmech::linalg::Matrix;
use countmech::membership::{in_f, in_u, neighbor_indistinguishable};
use countmech::metrics::{analytic_output_variance, build_weight_matrix, count_error, distribution_distance, ErrorKind};
use countmech::privatize::{project_to_simplex, RawPrivatizedDistribution};
use countmech::scalar::{rat, Rational};
use countmech::scales::{enumerate_scales, scale_from_pattern, single_peaked_scales, solve_row_weights, Pattern};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn lambda_choice() -> impl Strategy<Value = Rational> {
    prop_oneof![Just(rat(3, 2)), Just(rat(2, 1)), Just(rat(3, 1))]
}

/// Rational distribution from integer weights; at least one weight is positive.
fn rational_z(n: std::ops::RangeInclusive<usize>, allow_zero: bool) -> impl Strategy<Value = Vec<Rational>> {
    let lo = if allow_zero { 0i64 } else { 1 };
    proptest::collection::vec(lo..=9i64, n)
        .prop_filter("needs mass", |w| w.iter().sum::<i64>() > 0)
        .prop_map(|w| {
            let t: i64 = w.iter().sum();
            w.iter().map(|&x| rat(x, t)).collect()
        })
}

fn float_z(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let t: f64 = w.iter().sum();
        w.iter().map(|x| x / t).collect()
    })
}

/// Euclidean projection onto the simplex by trying every support and keeping
/// the feasible candidate closest to `v`.
fn projection_oracle(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let shift = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        for &i in &support {
            x[i] = v[i] - shift;
        }
        if x.iter().any(|&e| e < -1e-12) {
            continue;
        }
        let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.unwrap().1
}

/// Largest `q` in `[0, hi]` keeping `r - q s` indistinguishable and
/// `q (z . s) <= c`, by exact bisection to 2^-60.
fn q_oracle(r: &[Rational], c: &Rational, s: &[Rational], z: &[Rational], p: &PrivacyParam<Rational>) -> f64 {
    let zs: Rational = z.iter().zip(s).map(|(a, b)| a * b).sum();
    let ok = |q: &Rational| {
        let rest: Vec<Rational> = r.iter().zip(s).map(|(a, b)| a - q * b).collect();
        q * &zs <= *c && neighbor_indistinguishable(&rest, p, 0.0)
    };
    let mut lo = Rational::zero();
    let mut hi = rat(64, 1);
    for _ in 0..70 {
        let mid = (&lo + &hi) / rat(2, 1);
        if ok(&mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    countmech::scalar::Scalar::to_f64(&lo)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_propagation(v in proptest::collection::vec(0u8..4, 2..7), lam in lambda_choice()) {
        let p = PrivacyParam::from_lambda(lam).unwrap();
        let v: Vec<Rational> = v.iter().map(|&x| rat(x as i64, 1)).collect();
        if neighbor_indistinguishable(&v, &p, 0.0) && v.iter().any(Rational::is_zero) {
            prop_assert!(v.iter().all(Rational::is_zero));
        }
    }

    #[test]
    fn every_scale_is_exact(n in 1usize..7, lam in lambda_choice()) {
        let p = PrivacyParam::from_lambda(lam.clone()).unwrap();
        let psi = enumerate_scales(n, &p).unwrap();
        prop_assert_eq!(psi.k(), 1 << (n - 1));
        for s in psi.columns() {
            let v = s.values();
            prop_assert!(neighbor_indistinguishable(v, &p, 0.0));
            prop_assert_eq!(v.iter().sum::<Rational>(), Rational::one());
            for (i, &sign) in s.pattern().signs().iter().enumerate() {
                let expected = if sign > 0 { &v[i + 1] / &lam } else { &v[i + 1] * &lam };
                prop_assert_eq!(&v[i], &expected);
            }
        }
    }

    #[test]
    fn conic_combinations_of_scales_are_indistinguishable(
        n in 2usize..6,
        coeffs in proptest::collection::vec(0u8..5, 16),
        lam in lambda_choice(),
    ) {
        let p = PrivacyParam::from_lambda(lam).unwrap();
        let psi = enumerate_scales(n, &p).unwrap();
        let mut v = vec![Rational::zero(); n];
        for (u, s) in psi.columns().iter().enumerate() {
            let c = rat(coeffs[u % coeffs.len()] as i64, 1);
            for (vi, si) in v.iter_mut().zip(s.values()) {
                *vi += &(&c * si);
            }
        }
        prop_assert!(neighbor_indistinguishable(&v, &p, 0.0));
    }

    #[test]
    fn row_weights_reconstruct_ones(n in 1usize..9, lam in lambda_choice(), eps in 0.05f64..4.0) {
        let p = PrivacyParam::from_lambda(lam).unwrap();
        let omega = solve_row_weights(n, &p).unwrap();
        let sp = single_peaked_scales(n, &p).unwrap();
        for i in 0..n {
            let total: Rational = omega.iter().zip(&sp).map(|(w, s)| w * &s.values()[i]).sum();
            prop_assert_eq!(total, Rational::one());
        }
        prop_assert!(omega.iter().all(|w| w > &Rational::zero()));

        let pf = PrivacyParam::<f64>::from_epsilon(eps).unwrap();
        let omega = solve_row_weights(n, &pf).unwrap();
        let sp = single_peaked_scales(n, &pf).unwrap();
        for i in 0..n {
            let total: f64 = omega.iter().zip(&sp).map(|(w, s)| w * s.values()[i]).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_matches_oracle(v in proptest::collection::vec(-1.0f64..2.0, 1..7)) {
        let got = project_to_simplex(&RawPrivatizedDistribution { values: v.clone() }).unwrap();
        let want = projection_oracle(&v);
        for (a, b) in got.probs().iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-9, "{:?} vs {:?}", got.probs(), want);
        }
        let again = project_to_simplex(&RawPrivatizedDistribution { values: got.probs().to_vec() }).unwrap();
        for (a, b) in again.probs().iter().zip(got.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((got.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_is_nonexpansive(v in proptest::collection::vec(-1.0f64..2.0, 2..20), seed in 0u64..1000) {
        let n = v.len();
        let zeta: Vec<f64> = (0..n).map(|i| ((i as u64 * 7 + seed) % 5 + 1) as f64).collect();
        let t: f64 = zeta.iter().sum();
        let zeta: Vec<f64> = zeta.iter().map(|x| x / t).collect();
        let proj = project_to_simplex(&RawPrivatizedDistribution { values: v.clone() }).unwrap();
        prop_assert!(l2(proj.probs(), &zeta) <= l2(&v, &zeta) + 1e-12);
    }

    #[test]
    fn distances_are_metrics(a in float_z(2..=8), b in float_z(2..=8), c in float_z(2..=8)) {
        let n = a.len().min(b.len()).min(c.len());
        let renorm = |v: &[f64]| { let t: f64 = v[..n].iter().sum(); v[..n].iter().map(|x| x / t).collect::<Vec<_>>() };
        let (a, b, c) = (renorm(&a), renorm(&b), renorm(&c));
        let ab = distribution_distance(&a, &b).unwrap();
        let ba = distribution_distance(&b, &a).unwrap();
        let bc = distribution_distance(&b, &c).unwrap();
        let ac = distribution_distance(&a, &c).unwrap();
        prop_assert!((ab.wasserstein1 - ba.wasserstein1).abs() < 1e-12);
        prop_assert!((ab.ks - ba.ks).abs() < 1e-12);
        prop_assert!((ab.tv - ba.tv).abs() < 1e-12);
        prop_assert!(ac.wasserstein1 <= ab.wasserstein1 + bc.wasserstein1 + 1e-12);
        prop_assert!(ac.ks <= ab.ks + bc.ks + 1e-12);
        prop_assert!(ac.tv <= ab.tv + bc.tv + 1e-12);
        prop_assert!(ab.tv <= 1.0 + 1e-12 && ab.ks <= 1.0 + 1e-12);
    }

    #[test]
    fn count_error_is_linear(z in rational_z(2..=5, true), a in 0i64..=6, lam in lambda_choice()) {
        let n = z.len();
        let p = PrivacyParam::from_lambda(lam).unwrap();
        let x = truncated_geometric_matrix(&p, n).unwrap();
        let y = TransitionMatrix::new(Matrix::identity(n)).unwrap();
        let alpha = rat(a, 6);
        let beta = Rational::one() - &alpha;
        let mix: Vec<Vec<Rational>> = (0..n)
            .map(|i| (0..n).map(|j| &alpha * x.get(i, j) + &beta * y.get(i, j)).collect())
            .collect();
        let mix = TransitionMatrix::from_rows(mix).unwrap();
        for kind in [ErrorKind::Ead, ErrorKind::Mse] {
            let w = build_weight_matrix(kind, &z);
            let lhs = count_error(&w, &mix).unwrap();
            let rhs = &alpha * count_error(&w, &x).unwrap() + &beta * count_error(&w, &y).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert!(count_error(&w, &y).unwrap().is_zero());
        }
    }

    #[test]
    fn truncated_geometric_matches_tail_sums(n in 1usize..8, lam in lambda_choice()) {
        let p = PrivacyParam::from_lambda(lam.clone()).unwrap();
        let t = truncated_geometric_matrix(&p, n).unwrap();
        prop_assert!(in_u(&t, &p, 0.0));
        // Two-sided geometric P(k) = (1 - a) / (1 + a) a^|k|, clamped to 0..n.
        let a = Rational::one() / &lam;
        let pk = |k: i64| (Rational::one() - &a) / (Rational::one() + &a) * pow(&a, k.unsigned_abs());
        // Clamped mass at a boundary m steps away: P(K >= m) = a^m / (1 + a).
        let tail = |m: u64| pow(&a, m) / (Rational::one() + &a);
        for i in 0..n as i64 {
            for j in 0..n as i64 {
                let want = if n == 1 {
                    Rational::one()
                } else if j == 0 {
                    tail(i as u64)
                } else if j == n as i64 - 1 {
                    tail((n as i64 - 1 - i) as u64)
                } else {
                    pk(j - i)
                };
                prop_assert_eq!(t.get(i as usize, j as usize), &want, "({}, {})", i, j);
            }
        }
    }

    #[test]
    fn heuristic_state_invariants_hold(z in rational_z(2..=7, true), lam in lambda_choice(), sel in 0usize..3) {
        let p = PrivacyParam::from_lambda(lam).unwrap();
        let zd = CountDistribution::new(z.clone()).unwrap();
        let n = z.len();
        let mut failures = Vec::new();
        let out = heuristic_constructor_with_hook(&zd, &p, Selector::ALL[sel], |st: &ConstructorState<Rational>, _| {
            for i in 0..n {
                let row: Rational = st.a.row(i).iter().sum::<Rational>() + &st.r[i];
                if row != Rational::one() { failures.push("A1 + r != 1"); }
            }
            let za = st.a.left_mul(&z);
            for j in 0..n {
                if &za[j] + &st.c[j] != z[j] { failures.push("zA + c != z"); }
                if st.c[j] < Rational::zero() { failures.push("c < 0"); }
            }
            if !neighbor_indistinguishable(&st.r, &p, 0.0) { failures.push("r not indistinguishable"); }
            let zr: Rational = z.iter().zip(&st.r).map(|(a, b)| a * b).sum();
            if st.c.iter().sum::<Rational>() != zr { failures.push("sum c != z . r"); }
        }).unwrap();
        prop_assert!(failures.is_empty(), "{:?}", failures);
        prop_assert!(out.additions < 2 * n);
        for (j, zj) in z.iter().enumerate() {
            if zj.is_zero() {
                prop_assert!((0..n).all(|i| out.matrix.get(i, j).is_zero()));
            }
        }
    }

    #[test]
    fn compute_q_matches_bisection(
        z in rational_z(3..=5, false),
        lam in lambda_choice(),
        r_pattern in 0usize..16,
        m in 1i64..5,
        s_pattern in 0usize..16,
        c in 1i64..40,
    ) {
        let n = z.len();
        let p = PrivacyParam::from_lambda(lam).unwrap();
        let k = 1 << (n - 1);
        // r is a positive multiple of a scale plus a constant, so indistinguishable and positive.
        let base = scale_from_pattern(&Pattern::from_index(r_pattern % k, n), &p);
        let r: Vec<Rational> = base.values().iter().map(|v| v * &rat(m, 1) + rat(1, 4)).collect();
        let s = scale_from_pattern(&Pattern::from_index(s_pattern % k, n), &p);
        let c = rat(c, 20);
        let q = compute_q(&r, &c, &s, &z, &p).unwrap();
        let oracle = q_oracle(&r, &c, s.values(), &z, &p);
        prop_assert!((countmech::scalar::Scalar::to_f64(&q) - oracle).abs() < 1e-12, "{} vs {}", q, oracle);
    }

    #[test]
    fn float_heuristic_is_fixed_point(z in float_z(2..=40), eps in 0.1f64..3.0, sel in 0usize..3) {
        let p = PrivacyParam::<f64>::from_epsilon(eps).unwrap();
        let zd = CountDistribution::new(z.clone()).unwrap();
        let out = heuristic_constructor(&zd, &p, Selector::ALL[sel]).unwrap();
        let zt = out.matrix.push_forward(&z);
        for (a, b) in zt.iter().zip(&z) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!(in_f(&out.matrix, &z, &p, 1e-9));
        prop_assert!(out.additions < 2 * z.len());
    }

    #[test]
    fn unfixed_placement_is_monotone(z in float_z(1..=12), eps in 0.1f64..3.0, mse in any::<bool>()) {
        let p = PrivacyParam::<f64>::from_epsilon(eps).unwrap();
        let kind = if mse { ErrorKind::Mse } else { ErrorKind::Ead };
        let out = unfixed_optimum_constructor(&build_weight_matrix(kind, &z), &p).unwrap();
        prop_assert!(out.placement.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(in_u(&out.matrix, &p, 1e-9));
    }

    #[test]
    fn lp_is_no_worse_than_heuristic(z in rational_z(2..=4, false), lam in lambda_choice()) {
        let p = PrivacyParam::from_lambda(lam).unwrap();
        let zd = CountDistribution::new(z.clone()).unwrap();
        let w = build_weight_matrix(ErrorKind::Ead, &z);
        let lp = lp_fixed_point_constructor(&zd, &p, &w).unwrap();
        prop_assert!(in_f(&lp, &z, &p, 0.0));
        let best = count_error(&w, &lp).unwrap();
        for sel in Selector::ALL {
            let h = heuristic_constructor(&zd, &p, sel).unwrap();
            prop_assert!(best <= count_error(&w, &h.matrix).unwrap());
        }
    }

    #[test]
    fn variance_forms_agree_on_fixed_points(z in float_z(2..=10), eps in 0.2f64..3.0, records in 1u64..100_000) {
        let p = PrivacyParam::<f64>::from_epsilon(eps).unwrap();
        let zd = CountDistribution::new(z.clone()).unwrap();
        let t = heuristic_constructor(&zd, &p, Selector::Sandwich).unwrap().matrix;
        let general = analytic_output_variance(&z, &t, records);
        for (j, g) in general.iter().enumerate() {
            let quoted = (z[j] - (0..z.len()).map(|l| z[l] * t.get(l, j).powi(2)).sum::<f64>()) / records as f64;
            prop_assert!((g - quoted).abs() <= 1e-9 / records as f64);
        }
    }
}

fn pow(a: &Rational, k: u64) -> Rational {
    (0..k).fold(Rational::one(), |acc, _| acc * a)
}
