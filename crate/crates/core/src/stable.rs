//! Stable laws `S(alpha, beta, gamma, delta)` in the continuous parameterization.
//!
//! The characteristic function is
//!
//! ```text
//! alpha != 1:  exp(-(gamma|t|)^alpha [1 + i beta tan(pi alpha / 2) sign(t) (|gamma t|^(1-alpha) - 1)] + i delta t)
//! alpha == 1:  exp(-gamma|t| [1 + i beta (2/pi) sign(t) log(gamma|t|)] + i delta t)
//! ```
//!
//! which is continuous in `alpha` at 1. `alpha = 2` is Normal(delta, 2 gamma^2),
//! `(alpha, beta) = (1, 0)` is Cauchy(gamma, delta).
//!
//! # Variate generation
//!
//! Variates come from the Chambers-Mallows-Stuck transform, which natively
//! produces the classical parameterization with characteristic function
//! `exp(-|t|^alpha [1 - i beta tan(pi alpha / 2) sign(t)])` for a standard
//! variate `Z`. The continuous parameterization is reached by the shift
//!
//! ```text
//! alpha != 1:  X = gamma (Z - beta tan(pi alpha / 2)) + delta
//! alpha == 1:  X = gamma Z + delta
//! ```
//!
//! (for `alpha == 1` the classical location carries a `(2/pi) beta gamma log gamma`
//! term which cancels against the same term in the scaled variate).

use std::f64::consts::{FRAC_PI_2, LN_2, PI, SQRT_2};

use num_complex::Complex64;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::Exp1;

use crate::empirical::type7_quantile;
use crate::error::{domain, Result};

/// `|alpha - 1|` below this routes to the `alpha == 1` branch.
pub const ALPHA_ONE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl StableParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    /// `S(alpha, beta, 1, 0)`.
    pub fn standard(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, 1.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            alpha,
            beta,
            gamma,
            delta,
        } = *self;
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite() && delta.is_finite()) {
            return Err(domain("stable parameters must be finite"));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(domain(format!("alpha = {alpha} outside (0, 2]")));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(domain(format!("beta = {beta} outside [-1, 1]")));
        }
        if gamma <= 0.0 {
            return Err(domain(format!("gamma = {gamma} must be positive")));
        }
        Ok(())
    }

    fn is_alpha_one(&self) -> bool {
        (self.alpha - 1.0).abs() < ALPHA_ONE_TOL
    }

    /// `tan(pi alpha / 2)`, taken as exactly zero at `alpha = 2`.
    fn skew_tan(&self) -> f64 {
        if self.alpha == 2.0 {
            0.0
        } else {
            (FRAC_PI_2 * self.alpha).tan()
        }
    }
}

/// A scale ratio and the stability index it maps to under the truncated
/// `alpha = log 2 / log sigma` rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleAlphaPair {
    pub sigma: f64,
    pub alpha_hat: f64,
}

impl ScaleAlphaPair {
    pub fn from_sigma(sigma: f64) -> Result<Self> {
        Ok(Self {
            sigma,
            alpha_hat: alpha_from_sigma(sigma)?,
        })
    }
}

pub fn char_function(params: &StableParams, t: f64) -> Result<Complex64> {
    params.validate()?;
    if !t.is_finite() {
        return Err(domain("t must be finite"));
    }
    if t == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let StableParams {
        alpha,
        beta,
        gamma,
        delta,
    } = *params;
    let gt = gamma * t.abs();
    let sign = t.signum();
    let exponent = if params.is_alpha_one() {
        let re = -gt;
        let im = -gt * beta * (2.0 / PI) * sign * gt.ln() + delta * t;
        Complex64::new(re, im)
    } else {
        let scale = gt.powf(alpha);
        // |gt|^(1-alpha) - 1, accurate when alpha is close to 1
        let correction = ((1.0 - alpha) * gt.ln()).exp_m1();
        let re = -scale;
        let im = -scale * beta * params.skew_tan() * sign * correction + delta * t;
        Complex64::new(re, im)
    };
    Ok(exponent.exp())
}

/// `2^(1/alpha)`: the scale of `X + X'` relative to `X`.
pub fn sigma_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(domain(format!("alpha = {alpha} outside (0, 2]")));
    }
    Ok((1.0 / alpha).exp2())
}

/// Truncated inverse of [`sigma_from_alpha`]: 0 on `(0, 1)`, 2 on `[1, sqrt 2)`,
/// `log 2 / log sigma` from `sqrt 2` on.
pub fn alpha_from_sigma(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(domain(format!("sigma = {sigma} must be positive")));
    }
    Ok(if sigma < 1.0 {
        0.0
    } else if sigma < SQRT_2 {
        2.0
    } else {
        (LN_2 / sigma.ln()).min(2.0)
    })
}

/// Location of `X + X'` for `X, X'` iid with `params`.
pub fn delta_prime(params: &StableParams) -> Result<f64> {
    params.validate()?;
    let StableParams {
        alpha,
        beta,
        gamma,
        delta,
    } = *params;
    if beta == 0.0 {
        return Ok(2.0 * delta);
    }
    let s = sigma_from_alpha(alpha)?;
    Ok(if params.is_alpha_one() {
        2.0 * delta + (2.0 / PI) * beta * gamma * (s * (s * gamma).ln() - 2.0 * gamma.ln())
    } else {
        2.0 * delta + params.skew_tan() * beta * gamma * (s - 2.0)
    })
}

/// One standard variate in the classical parameterization.
fn cms_classical<R: Rng + ?Sized>(alpha: f64, beta: f64, alpha_one: bool, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let v = PI * (u - 0.5);
    let w: f64 = rng.sample(Exp1);
    if alpha_one {
        let shifted = FRAC_PI_2 + beta * v;
        (2.0 / PI) * (shifted * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / shifted).ln())
    } else {
        let tan_term = if alpha == 2.0 {
            0.0
        } else {
            beta * (FRAC_PI_2 * alpha).tan()
        };
        let b = tan_term.atan() / alpha;
        let s = (1.0 + tan_term * tan_term).powf(0.5 / alpha);
        let avb = alpha * (v + b);
        s * avb.sin() / v.cos().powf(1.0 / alpha)
            * ((v - avb).cos() / w).powf((1.0 - alpha) / alpha)
    }
}

/// Draw one variate from `params`. Parameters are assumed valid.
pub fn sample_one<R: Rng + ?Sized>(params: &StableParams, rng: &mut R) -> f64 {
    let alpha_one = params.is_alpha_one();
    let z = cms_classical(params.alpha, params.beta, alpha_one, rng);
    if alpha_one {
        params.gamma * z + params.delta
    } else {
        params.gamma * (z - params.beta * params.skew_tan()) + params.delta
    }
}

pub fn sample_stable<R: Rng + ?Sized>(
    params: &StableParams,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    if count == 0 {
        return Err(domain("count must be at least 1"));
    }
    Ok((0..count).map(|_| sample_one(params, rng)).collect())
}

/// A brute-force quantile with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEstimate {
    pub p: f64,
    pub value: f64,
    pub std_error: f64,
}

pub const MIN_MC_SIZE: usize = 10_000;

/// Order-statistic estimates of several quantiles from one Monte-Carlo sample.
pub fn numeric_quantiles<R: Rng + ?Sized>(
    params: &StableParams,
    probs: &[f64],
    mc_size: usize,
    rng: &mut R,
) -> Result<Vec<QuantileEstimate>> {
    if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(domain(format!("probability {p} outside (0, 1)")));
    }
    if mc_size < MIN_MC_SIZE {
        return Err(domain(format!(
            "mc_size = {mc_size} below the minimum of {MIN_MC_SIZE}"
        )));
    }
    let mut draws = sample_stable(params, mc_size, rng)?;
    draws.sort_unstable_by(f64::total_cmp);

    let size = mc_size as f64;
    // sparsity estimated from a symmetric difference of the quantile function
    let h = size.powf(-1.0 / 3.0);
    Ok(probs
        .iter()
        .map(|&p| {
            let lo = (p - h).max(0.5 / size);
            let hi = (p + h).min(1.0 - 0.5 / size);
            let sparsity =
                (type7_quantile(&draws, hi) - type7_quantile(&draws, lo)) / (hi - lo);
            QuantileEstimate {
                p,
                value: type7_quantile(&draws, p),
                std_error: (p * (1.0 - p) / size).sqrt() * sparsity,
            }
        })
        .collect())
}

pub fn numeric_quantile<R: Rng + ?Sized>(
    params: &StableParams,
    p: f64,
    mc_size: usize,
    rng: &mut R,
) -> Result<QuantileEstimate> {
    Ok(numeric_quantiles(params, &[p], mc_size, rng)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::substream;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cf_gaussian_and_cauchy_closed_forms() {
        let normal = StableParams::standard(2.0, 0.0).unwrap();
        let z = char_function(&normal, 1.0).unwrap();
        assert!(close(z.re, (-1.0f64).exp(), 1e-15) && z.im == 0.0);

        let cauchy = StableParams::standard(1.0, 0.0).unwrap();
        let z = char_function(&cauchy, 2.0).unwrap();
        assert!(close(z.re, (-2.0f64).exp(), 1e-15) && z.im.abs() < 1e-15);

        let any = StableParams::new(0.7, -0.3, 3.0, 1.0).unwrap();
        assert_eq!(char_function(&any, 0.0).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn cf_conjugate_symmetry() {
        let p = StableParams::new(1.5, 0.75, 2.0, 1.0).unwrap();
        let plus = char_function(&p, 0.7).unwrap();
        let minus = char_function(&p, -0.7).unwrap();
        assert!((plus.conj() - minus).norm() < 1e-15);
        // hand evaluation at t = 0.7
        let scale = (1.4f64).powf(1.5);
        let im = -scale * 0.75 * (0.75 * PI).tan() * (1.4f64.powf(-0.5) - 1.0) + 0.7;
        let expected = Complex64::new(-scale, im).exp();
        assert!((plus - expected).norm() < 1e-14);
    }

    #[test]
    fn cf_continuous_at_alpha_one() {
        for beta in [0.0, 0.75] {
            let one = StableParams::standard(1.0, beta).unwrap();
            for eps in [1e-6, -1e-6] {
                let near = StableParams::standard(1.0 + eps, beta).unwrap();
                for i in -100..=100 {
                    let t = i as f64 / 10.0;
                    let d = char_function(&one, t).unwrap() - char_function(&near, t).unwrap();
                    assert!(d.norm() < 1e-3, "t = {t}, beta = {beta}, eps = {eps}");
                }
            }
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(StableParams::standard(0.0, 0.0).is_err());
        assert!(StableParams::standard(2.1, 0.0).is_err());
        assert!(StableParams::standard(1.5, 1.1).is_err());
        assert!(StableParams::new(1.5, 0.0, 0.0, 0.0).is_err());
        assert!(StableParams::new(1.5, 0.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn sigma_alpha_conversions() {
        assert_eq!(sigma_from_alpha(1.0).unwrap(), 2.0);
        assert!(close(sigma_from_alpha(2.0).unwrap(), SQRT_2, 1e-15));
        assert_eq!(sigma_from_alpha(0.5).unwrap(), 4.0);
        assert!(sigma_from_alpha(0.0).is_err());

        assert_eq!(alpha_from_sigma(0.5).unwrap(), 0.0);
        assert_eq!(alpha_from_sigma(1.2).unwrap(), 2.0);
        assert_eq!(alpha_from_sigma(2.0).unwrap(), 1.0);
        assert!(close(alpha_from_sigma(SQRT_2).unwrap(), 2.0, 1e-15));
        assert!(alpha_from_sigma(0.0).is_err());
        assert!(alpha_from_sigma(-1.0).is_err());
    }

    #[test]
    fn delta_prime_examples() {
        let p = StableParams::new(1.5, 0.0, 1.0, 3.0).unwrap();
        assert_eq!(delta_prime(&p).unwrap(), 6.0);
        let p = StableParams::standard(0.5, 1.0).unwrap();
        assert!(close(delta_prime(&p).unwrap(), 2.0, 1e-12));
        let p = StableParams::standard(1.0, 1.0).unwrap();
        assert!(close(delta_prime(&p).unwrap(), 4.0 * LN_2 / PI, 1e-12));
    }

    #[test]
    fn cauchy_sample_quantiles() {
        let p = StableParams::standard(1.0, 0.0).unwrap();
        let mut x = sample_stable(&p, 100_000, &mut substream(3, 0)).unwrap();
        x.sort_unstable_by(f64::total_cmp);
        assert!(type7_quantile(&x, 0.5).abs() < 0.03);
        assert!((type7_quantile(&x, 0.75) - 1.0).abs() < 0.05);
    }

    #[test]
    fn numeric_quantile_anchors() {
        let cauchy = StableParams::standard(1.0, 0.0).unwrap();
        let q = numeric_quantile(&cauchy, 0.75, 200_000, &mut substream(5, 0)).unwrap();
        assert!((q.value - 1.0).abs() < 4.0 * q.std_error, "{q:?}");
        // Cauchy density at 1 is 1/(2 pi): se = sqrt(3/16 / N) * 2 pi
        let expected_se = (0.1875f64 / 200_000.0).sqrt() * 2.0 * PI;
        assert!((q.std_error / expected_se - 1.0).abs() < 0.2);

        let normal = StableParams::standard(2.0, 0.0).unwrap();
        let q = numeric_quantile(&normal, 0.5, 100_000, &mut substream(6, 0)).unwrap();
        assert!(q.value.abs() < 4.0 * q.std_error);

        assert!(numeric_quantile(&normal, 1.0, 100_000, &mut substream(6, 0)).is_err());
        assert!(numeric_quantile(&normal, 0.5, 10, &mut substream(6, 0)).is_err());
    }

    #[test]
    fn levy_median() {
        // S(1/2, 1, 1, 0) is Levy with scale 1 and location -1; median is
        // 1 / (2 erfcinv(1/2)^2) - 1 (checked against scipy's S0 levy_stable.ppf).
        let levy = StableParams::standard(0.5, 1.0).unwrap();
        let q = numeric_quantile(&levy, 0.5, 200_000, &mut substream(8, 0)).unwrap();
        assert!((q.value - 1.198_109_338_317_732).abs() < 4.0 * q.std_error, "{q:?}");
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let p = StableParams::new(1.3, 0.4, 2.0, -1.0).unwrap();
        let a = sample_stable(&p, 1000, &mut substream(11, 2)).unwrap();
        let b = sample_stable(&p, 1000, &mut substream(11, 2)).unwrap();
        let c = sample_stable(&p, 1000, &mut substream(11, 3)).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, c);
        assert!(sample_stable(&p, 0, &mut substream(11, 2)).is_err());
    }
}
