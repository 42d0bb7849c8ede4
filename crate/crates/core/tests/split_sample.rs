use num_bigint::BigUint;
use stable_sse::seed::substream;
use stable_sse::split::{boundary_rate, combine};
use stable_sse::stable::sample_stable;
use stable_sse::{permutation_count, sse_estimate, SplitConfig, StableParams};

fn cauchy(total: usize, stream: u64) -> Vec<f64> {
    let p = StableParams::standard(1.0, 0.0).unwrap();
    sample_stable(&p, total, &mut substream(2024, stream)).unwrap()
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, i| acc * i)
}

#[test]
fn permutation_count_matches_factorial_form() {
    assert_eq!(permutation_count(0, 1), BigUint::from(1u32));
    assert_eq!(permutation_count(1, 1), BigUint::from(3u32));
    for (n, m) in [(10u64, 10u64), (3, 7), (25, 4), (100, 100)] {
        let direct = factorial(n + 2 * m) / (factorial(n) * (BigUint::from(2u32).pow(m as u32)));
        assert_eq!(permutation_count(n, m), direct, "n = {n}, m = {m}");
    }
    assert_eq!(
        permutation_count(10, 10).to_string(),
        "71383376298044210400000"
    );
}

#[test]
fn estimate_is_affine_invariant() {
    let data = cauchy(300, 0);
    let config = SplitConfig::for_total(300, 50, 9, 17).unwrap();
    let base = sse_estimate(&data, &config).unwrap();
    for (a, b) in [(5.0, 1.0), (-2.0, 3.7), (0.25, 0.01), (1e3, 1e-3), (0.0, 1e6)] {
        let moved: Vec<f64> = data.iter().map(|v| a + b * v).collect();
        let est = sse_estimate(&moved, &config).unwrap();
        for (x, y) in [
            (base.alpha1, est.alpha1),
            (base.alpha2, est.alpha2),
            (base.alpha3, est.alpha3),
        ] {
            assert!((x - y).abs() < 1e-8, "a = {a}, b = {b}: {x} vs {y}");
        }
    }
}

#[test]
fn estimate_is_seed_deterministic() {
    let data = cauchy(300, 1);
    let config = SplitConfig::for_total(300, 40, 9, 5).unwrap();
    let first = sse_estimate(&data, &config).unwrap();
    assert_eq!(first, sse_estimate(&data, &config).unwrap());
    let other = SplitConfig { seed: 6, ..config };
    assert_ne!(first.sigma_hats, sse_estimate(&data, &other).unwrap().sigma_hats);
}

#[test]
fn single_split_combiners_coincide() {
    let data = cauchy(300, 2);
    let config = SplitConfig::for_total(300, 1, 9, 3).unwrap();
    let est = sse_estimate(&data, &config).unwrap();
    assert_eq!(est.sigma_hats.len(), 1);
    assert_eq!(est.alpha1, est.alpha2);
    assert_eq!(est.alpha2, est.alpha3);
}

#[test]
fn estimate_is_consistent_with_its_parts() {
    let data = cauchy(300, 3);
    let config = SplitConfig::for_total(300, 60, 9, 8).unwrap();
    let est = sse_estimate(&data, &config).unwrap();
    assert_eq!(est.sigma_hats.len() + est.failures, 60);
    let (bar, alphas, hats) = combine(&est.sigma_hats).unwrap();
    assert_eq!((bar, alphas, hats), (est.sigma_bar, [est.alpha1, est.alpha2, est.alpha3], est.alpha_hats.clone()));
    let (at0, at2) = boundary_rate(&est).unwrap();
    assert!((0.0..=1.0).contains(&at0) && (0.0..=1.0).contains(&at2));
    assert!((0.5..1.5).contains(&est.alpha1), "alpha1 = {}", est.alpha1);
}

#[test]
fn wrong_length_is_rejected() {
    let config = SplitConfig::for_total(300, 10, 9, 0).unwrap();
    assert!(sse_estimate(&cauchy(299, 4), &config).is_err());
    let mut data = cauchy(300, 4);
    data[7] = f64::NAN;
    assert!(sse_estimate(&data, &config).is_err());
}
