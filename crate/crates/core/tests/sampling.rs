mod common;

use num_complex::Complex64;
use stable_sse::seed::substream;
use stable_sse::stable::{char_function, delta_prime, sample_stable};
use stable_sse::{sigma_from_alpha, StableParams};
use statrs::distribution::{ContinuousCDF, Normal};

use common::{ks_one_sample, ks_two_sample, ks_two_sample_critical};

#[test]
fn empirical_cf_matches_theory() {
    let size = 100_000;
    let bound = 4.0 / (size as f64).sqrt();
    for (i, &alpha) in [1.0, 1.5, 1.95].iter().enumerate() {
        for (j, &beta) in [0.0, 0.75].iter().enumerate() {
            let p = StableParams::standard(alpha, beta).unwrap();
            let x = sample_stable(&p, size, &mut substream(11, (2 * i + j) as u64)).unwrap();
            for t in [0.5, 1.0, 2.0] {
                let emp = x
                    .iter()
                    .map(|v| Complex64::new(0.0, t * v).exp())
                    .sum::<Complex64>()
                    / size as f64;
                let theory = char_function(&p, t).unwrap();
                let err = (emp - theory).norm();
                assert!(err < bound, "alpha {alpha} beta {beta} t {t}: |diff| = {err}");
            }
        }
    }
}

#[test]
fn gaussian_case_is_normal_with_variance_two() {
    let p = StableParams::standard(2.0, 0.0).unwrap();
    let x = sample_stable(&p, 20_000, &mut substream(5, 0)).unwrap();
    let normal = Normal::new(0.0, std::f64::consts::SQRT_2).unwrap();
    let d = ks_one_sample(&x, |v| normal.cdf(v));
    // 1% critical value of the one-sample KS statistic
    assert!(d < 1.628 / (x.len() as f64).sqrt(), "KS distance {d}");
}

#[test]
fn pair_sums_are_stable() {
    let size = 20_000;
    for (i, &(alpha, beta)) in [(0.8, 0.0), (1.0, 0.5), (1.5, 0.75), (1.95, -0.3)].iter().enumerate() {
        let p = StableParams::new(alpha, beta, 1.3, 0.4).unwrap();
        let mut rng = substream(21, i as u64);
        let pairs = sample_stable(&p, 2 * size, &mut rng).unwrap();
        let sums: Vec<f64> = pairs.chunks_exact(2).map(|c| c[0] + c[1]).collect();
        let q = StableParams::new(
            alpha,
            beta,
            p.gamma * sigma_from_alpha(alpha).unwrap(),
            delta_prime(&p).unwrap(),
        )
        .unwrap();
        let direct = sample_stable(&q, size, &mut rng).unwrap();
        let d = ks_two_sample(&sums, &direct);
        let crit = ks_two_sample_critical(size, size, 0.01);
        assert!(d < crit, "alpha {alpha} beta {beta}: KS {d} >= {crit}");
    }
}

#[test]
fn characteristic_function_identities() {
    for alpha in [0.5, 1.0, 1.3, 2.0] {
        for beta in [-1.0, 0.0, 0.6] {
            let p = StableParams::new(alpha, beta, 1.7, -0.2).unwrap();
            assert!((char_function(&p, 0.0).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            for t in [0.3, 1.0, 4.0] {
                let a = char_function(&p, t).unwrap();
                let b = char_function(&p, -t).unwrap();
                assert!((a - b.conj()).norm() < 1e-12);
            }
        }
    }
    let p = StableParams::new(2.0, 0.4, 1.5, 0.7).unwrap();
    for t in [0.2, 1.0, 2.5] {
        let expected = Complex64::new(-1.5f64.powi(2) * t * t, 0.7 * t).exp();
        assert!((char_function(&p, t).unwrap() - expected).norm() < 1e-12);
    }
}
