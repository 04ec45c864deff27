//! PG(1, c) sampler against the closed-form mean and the truncated
//! sum-of-gammas oracle.

use djl_core::polya_gamma::{pg1_mean, sample_pg1, sample_pg1_truncated};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn draws(c: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_pg1(c, &mut rng).unwrap().value()).collect()
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn moments_within_three_standard_errors() {
    for (s, c) in [0.0, 0.5, 1.0, 2.0, 5.0].into_iter().enumerate() {
        let x = draws(c, 100_000, s as u64);
        let (m, se) = mean_se(&x);
        assert!((m - pg1_mean(c)).abs() < 3.0 * se, "c={c}: {m} vs {} (se {se})", pg1_mean(c));
    }
}

#[test]
fn closed_form_means() {
    assert!((pg1_mean(0.0) - 0.25).abs() < 1e-15);
    assert!((pg1_mean(2.0) - 1f64.tanh() / 4.0).abs() < 1e-15);
    let (m0, _) = mean_se(&draws(0.0, 100_000, 11));
    assert!((m0 - 0.25).abs() < 0.0025);
    let (m2, _) = mean_se(&draws(2.0, 100_000, 12));
    assert!((m2 - 1f64.tanh() / 4.0).abs() < 0.01 * 1f64.tanh() / 4.0);
}

#[test]
fn matches_sum_of_gammas_oracle() {
    for (s, c) in [0.0, 1.0, 3.0].into_iter().enumerate() {
        let exact = draws(c, 20_000, 100 + s as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(200 + s as u64);
        let oracle: Vec<f64> = (0..20_000).map(|_| sample_pg1_truncated(c, 200, &mut rng)).collect();
        // 1% critical value for n = m = 20000 is about 0.0163.
        let d = ks(exact, oracle);
        assert!(d < 0.0163, "c={c}: KS distance {d}");
    }
}

#[test]
fn symmetric_in_tilt() {
    let a = draws(1.5, 20_000, 7);
    let b = draws(-1.5, 20_000, 8);
    assert!(ks(a, b) < 0.0163);
}

#[test]
fn draws_are_positive() {
    for c in [0.0, 0.1, 10.0, 50.0, -30.0] {
        assert!(draws(c, 2000, 3).iter().all(|&v| v > 0.0 && v.is_finite()));
    }
}

#[test]
fn non_finite_tilt_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(sample_pg1(f64::NAN, &mut rng).is_err());
    assert!(sample_pg1(f64::INFINITY, &mut rng).is_err());
}
