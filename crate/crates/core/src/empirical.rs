//! Interpolated empirical distribution and quantile functions, and Gaussian
//! kernel density estimates.
//!
//! For order statistics `X(1) < ... < X(n)` the distribution function is the
//! piecewise-linear interpolant of the knots `(X(j), (j-1)/(n-1))`, zero to
//! the left of `X(1)` and one to the right of `X(n)`. Its inverse on `(0, 1)`
//! coincides with the type-7 sample quantile.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Relative size of the offsets used to separate tied values.
const TIE_JITTER: f64 = 1e-9;

/// Type-7 quantile of an ascending slice, `p` in `[0, 1]`.
pub fn type7_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let j = (h.floor() as usize).min(n - 2);
    let frac = h - j as f64;
    sorted[j] + frac * (sorted[j + 1] - sorted[j])
}

/// An ascending, strictly increasing sample of at least two values.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
    /// False when every raw value was identical before tie separation.
    had_spread: bool,
}

impl SortedSample {
    /// Sorts `values` and separates ties by tiny increasing offsets
    /// proportional to the sample IQR.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Shape {
                expected: 2,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("sample contains non-finite values"));
        }
        values.sort_unstable_by(f64::total_cmp);
        let n = values.len();
        let had_spread = values[n - 1] > values[0];

        if values.windows(2).any(|w| w[1] <= w[0]) {
            let iqr = type7_quantile(&values, 0.75) - type7_quantile(&values, 0.25);
            let scale = if iqr > 0.0 {
                iqr
            } else if had_spread {
                values[n - 1] - values[0]
            } else {
                values[0].abs().max(1.0)
            };
            let step = TIE_JITTER * scale / n as f64;
            for i in 1..n {
                if values[i] <= values[i - 1] {
                    values[i] = (values[i - 1] + step).max(values[i - 1].next_up());
                }
            }
        }
        Ok(Self { values, had_spread })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn iqr(&self) -> f64 {
        type7_quantile(&self.values, 0.75) - type7_quantile(&self.values, 0.25)
    }

    pub fn std_dev(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let ss: f64 = self.values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    }

    pub fn edf(&self, x: f64) -> f64 {
        let v = &self.values;
        let n = v.len();
        if x < v[0] {
            return 0.0;
        }
        if x >= v[n - 1] {
            return 1.0;
        }
        let j = v.partition_point(|&knot| knot <= x) - 1;
        let frac = (x - v[j]) / (v[j + 1] - v[j]);
        (j as f64 + frac) / (n - 1) as f64
    }

    pub fn equantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(domain(format!("quantile level {t} outside (0, 1)")));
        }
        Ok(type7_quantile(&self.values, t))
    }

    pub fn kde_density(&self, spec: &KdeSpec, x: f64) -> f64 {
        let h = spec.bandwidth;
        let sum: f64 = self
            .values
            .iter()
            .map(|xi| {
                let z = (x - xi) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        sum / ((2.0 * PI).sqrt() * h * self.values.len() as f64)
    }

    /// Robust Silverman rule `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
    pub fn default_bandwidth(&self) -> Result<f64> {
        if !self.had_spread {
            return Err(Error::Degenerate("all sample values are identical".into()));
        }
        let sd = self.std_dev();
        let robust = self.iqr() / 1.34;
        let spread = match (sd.is_finite(), robust > 0.0) {
            (true, true) => sd.min(robust),
            (false, _) => robust,
            (true, false) => sd,
        };
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(Error::Degenerate(format!("sample spread {spread}")));
        }
        Ok(0.9 * spread * (self.values.len() as f64).powf(-0.2))
    }
}

/// Gaussian kernel with a fixed bandwidth in data units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeSpec {
    pub bandwidth: f64,
}

impl KdeSpec {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(domain(format!("bandwidth {bandwidth} must be positive")));
        }
        Ok(Self { bandwidth })
    }

    pub fn for_sample(sample: &SortedSample) -> Result<Self> {
        Self::new(sample.default_bandwidth()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> SortedSample {
        SortedSample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn edf_examples() {
        assert_eq!(sample(&[0.0, 1.0]).edf(0.5), 0.5);
        let s = sample(&[3.0, 1.0, 2.0]);
        assert_eq!(s.edf(2.0), 0.5);
        assert_eq!(s.edf(0.0), 0.0);
        assert_eq!(s.edf(1.0), 0.0);
        assert_eq!(s.edf(3.0), 1.0);
        assert_eq!(s.edf(7.0), 1.0);
    }

    #[test]
    fn equantile_examples() {
        assert_eq!(sample(&[0.0, 1.0]).equantile(0.25).unwrap(), 0.25);
        assert_eq!(sample(&[1.0, 2.0, 3.0]).equantile(0.5).unwrap(), 2.0);
        assert_eq!(sample(&[1.0, 2.0, 4.0]).equantile(0.75).unwrap(), 3.0);
        assert!(sample(&[1.0, 2.0]).equantile(0.0).is_err());
        assert!(sample(&[1.0, 2.0]).equantile(1.0).is_err());
    }

    #[test]
    fn construction_errors() {
        assert!(SortedSample::new(vec![1.0]).is_err());
        assert!(SortedSample::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn ties_are_separated() {
        let s = sample(&[2.0, 1.0, 2.0, 2.0, 3.0]);
        assert!(s.values().windows(2).all(|w| w[1] > w[0]));
        assert!((s.values()[3] - 2.0).abs() < 1e-9);
        let zeros = sample(&[0.0, 0.0]);
        assert!(zeros.values()[1] > 0.0 && zeros.values()[1] < 1e-8);
        assert!(matches!(zeros.default_bandwidth(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn kde_examples() {
        let unit = KdeSpec::new(1.0).unwrap();
        let tied = sample(&[0.0, 0.0]);
        assert!((tied.kde_density(&unit, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-9);
        let pair = sample(&[-1.0, 1.0]);
        assert!((pair.kde_density(&unit, 0.0) - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert!(KdeSpec::new(0.0).is_err());
        assert!(KdeSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn bandwidth_normal_like() {
        // distinct values with IQR / 1.34 > sd, so the sd branch is taken
        let raw: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { -1.0 - 1e-3 * i as f64 } else { 1.0 + 1e-3 * i as f64 })
            .collect();
        let n = raw.len() as f64;
        let s = sample(&raw);
        let sd = s.std_dev();
        let expected = 0.9 * sd * n.powf(-0.2);
        assert!((s.default_bandwidth().unwrap() - expected).abs() < 1e-12);
        assert!(s.iqr() / 1.34 > sd);
        assert!((0.9 * 100f64.powf(-0.2) - 0.358_3).abs() < 1e-4);
    }

    #[test]
    fn bandwidth_uses_iqr_under_outliers() {
        let mut raw: Vec<f64> = (0..99).map(|i| i as f64 / 98.0).collect();
        raw.push(1e12);
        let s = sample(&raw);
        let expected = 0.9 * s.iqr() / 1.34 * 100f64.powf(-0.2);
        assert!((s.default_bandwidth().unwrap() - expected).abs() < 1e-12);
    }

    /// Adaptive Simpson quadrature, used as an independent check of
    /// normalisation.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    #[test]
    fn kde_integrates_to_one() {
        let s = sample(&[-3.0, -0.4, 0.1, 0.2, 1.7, 2.5, 9.0]);
        let spec = KdeSpec::for_sample(&s).unwrap();
        let h = spec.bandwidth;
        let total = simpson(&|x| s.kde_density(&spec, x), s.min() - 10.0 * h, s.max() + 10.0 * h, 1e-10);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    proptest! {
        #[test]
        fn edf_inverts_equantile(raw in prop::collection::vec(-1e3f64..1e3, 2..60), t in 0.001f64..0.999) {
            let s = SortedSample::new(raw).unwrap();
            let x = s.equantile(t).unwrap();
            prop_assert!((s.edf(x) - t).abs() < 1e-12);
        }

        #[test]
        fn edf_is_monotone(raw in prop::collection::vec(-1e3f64..1e3, 2..60), a in -2e3f64..2e3, b in -2e3f64..2e3) {
            let s = SortedSample::new(raw).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(s.edf(lo) <= s.edf(hi));
        }

        #[test]
        fn equantile_is_affine_equivariant(
            raw in prop::collection::vec(-1e2f64..1e2, 2..60),
            shift in -10f64..10.0,
            scale in 0.1f64..10.0,
            t in 0.001f64..0.999,
        ) {
            let s = SortedSample::new(raw.clone()).unwrap();
            let moved = SortedSample::new(raw.iter().map(|v| shift + scale * v).collect()).unwrap();
            let expected = shift + scale * s.equantile(t).unwrap();
            let got = moved.equantile(t).unwrap();
            // relative to the magnitude of the transformed data
            prop_assert!((got - expected).abs() <= 1e-12 * (shift.abs() + scale * 100.0));
        }

        #[test]
        fn kde_is_nonnegative(raw in prop::collection::vec(-1e2f64..1e2, 2..40), x in -1e3f64..1e3) {
            let s = SortedSample::new(raw).unwrap();
            let spec = KdeSpec::new(0.5).unwrap();
            prop_assert!(s.kde_density(&spec, x) >= 0.0);
        }

        #[test]
        fn bandwidth_is_scale_equivariant(raw in prop::collection::vec(-1e2f64..1e2, 5..60), c in 0.01f64..100.0) {
            let s = SortedSample::new(raw.clone()).unwrap();
            if let Ok(h) = s.default_bandwidth() {
                let scaled = SortedSample::new(raw.iter().map(|v| c * v).collect()).unwrap();
                let hc = scaled.default_bandwidth().unwrap();
                prop_assert!((hc - c * h).abs() <= 1e-10 * c * h);
            }
        }
    }
}
