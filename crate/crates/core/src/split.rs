//! The split-sample estimator.
//!
//! One sample of `n + 2m` observations is repeatedly and randomly permuted;
//! the first `n` permuted values form the X-sample and the remaining `2m`
//! are summed in consecutive pairs to form the Y-sample. Each split yields an
//! AL estimate of the scale ratio `sigma`, and the `B` estimates are combined
//! into three index estimates:
//!
//! * `alpha1`: truncated `log 2 / log` of the mean `sigma`,
//! * `alpha2`: mean of the per-split truncated indices,
//! * `alpha3`: median (lower middle order statistic) of the per-split indices.
//!
//! Split `b` draws its permutation from `substream(config.seed, b)`.

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::al::{al_fit_with, AlOptions, TGrid};
use crate::empirical::SortedSample;
use crate::error::{domain, Error, Result};
use crate::seed::substream;
use crate::stable::alpha_from_sigma;

pub const DEFAULT_B: usize = 250;
pub const DEFAULT_K: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub n: usize,
    pub m: usize,
    pub b_splits: usize,
    pub grid: TGrid,
    pub seed: u64,
    pub options: AlOptions,
}

impl SplitConfig {
    pub fn new(n: usize, m: usize, b_splits: usize, grid: TGrid, seed: u64) -> Result<Self> {
        if n < 2 || m < 2 {
            return Err(domain(format!("need n >= 2 and m >= 2, got n = {n}, m = {m}")));
        }
        if b_splits == 0 {
            return Err(domain("B must be at least 1"));
        }
        Ok(Self {
            n,
            m,
            b_splits,
            grid,
            seed,
            options: AlOptions::default(),
        })
    }

    /// Split `total` observations with `m = total / 3` pairs and the rest
    /// (`n = m` when `total` is divisible by 3) in the X-sample, using the
    /// equispaced grid with `k` levels.
    pub fn for_total(total: usize, b_splits: usize, k: usize, seed: u64) -> Result<Self> {
        let m = total / 3;
        Self::new(total - 2 * m, m, b_splits, TGrid::equispaced(k)?, seed)
    }

    pub fn total(&self) -> usize {
        self.n + 2 * self.m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitEstimate {
    /// Scale estimates of the successful splits, in split order.
    pub sigma_hats: Vec<f64>,
    pub alpha_hats: Vec<f64>,
    pub failures: usize,
    pub sigma_bar: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// More than half of the splits failed.
    pub unreliable: bool,
}

/// X-sample and pair-sum Y-sample for one permutation of `data`.
pub fn split_once(
    data: &[f64],
    permutation: &[usize],
    n: usize,
    m: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let total = n + 2 * m;
    if data.len() != total {
        return Err(Error::Shape {
            expected: total,
            got: data.len(),
        });
    }
    if permutation.len() != total {
        return Err(Error::Shape {
            expected: total,
            got: permutation.len(),
        });
    }
    let mut seen = vec![false; total];
    for &i in permutation {
        if i >= total || std::mem::replace(&mut seen[i], true) {
            return Err(domain("permutation is not a bijection on the data indices"));
        }
    }
    let x = permutation[..n].iter().map(|&i| data[i]).collect();
    let y = permutation[n..]
        .chunks_exact(2)
        .map(|pair| data[pair[0]] + data[pair[1]])
        .collect();
    Ok((x, y))
}

/// Combine per-split scale estimates into `(sigma_bar, alpha1, alpha2, alpha3)`
/// and the per-split truncated indices.
pub fn combine(sigma_hats: &[f64]) -> Result<(f64, [f64; 3], Vec<f64>)> {
    if sigma_hats.is_empty() {
        return Err(Error::Estimation("no scale estimates to combine".into()));
    }
    let count = sigma_hats.len() as f64;
    let sigma_bar = sigma_hats.iter().sum::<f64>() / count;
    let alpha_hats = sigma_hats
        .iter()
        .map(|&s| alpha_from_sigma(s))
        .collect::<Result<Vec<_>>>()?;
    let alpha1 = alpha_from_sigma(sigma_bar)?;
    let alpha2 = alpha_hats.iter().sum::<f64>() / count;
    let mut sorted = alpha_hats.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let alpha3 = sorted[(sorted.len() - 1) / 2];
    Ok((sigma_bar, [alpha1, alpha2, alpha3], alpha_hats))
}

pub fn sse_estimate(data: &[f64], config: &SplitConfig) -> Result<SplitEstimate> {
    let total = config.total();
    if data.len() != total {
        return Err(Error::Shape {
            expected: total,
            got: data.len(),
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(domain("data contains non-finite values"));
    }
    let fits: Vec<Option<f64>> = (0..config.b_splits)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(config.seed, b as u64);
            let mut perm: Vec<usize> = (0..total).collect();
            perm.shuffle(&mut rng);
            let (x, y) = split_once(data, &perm, config.n, config.m).ok()?;
            let x = SortedSample::new(x).ok()?;
            let y = SortedSample::new(y).ok()?;
            al_fit_with(&x, &y, &config.grid, &config.options)
                .ok()
                .map(|fit| fit.sigma)
        })
        .collect();
    let sigma_hats: Vec<f64> = fits.iter().flatten().copied().collect();
    let failures = config.b_splits - sigma_hats.len();
    if sigma_hats.is_empty() {
        return Err(Error::Estimation(format!(
            "all {} split fits failed",
            config.b_splits
        )));
    }
    let (sigma_bar, [alpha1, alpha2, alpha3], alpha_hats) = combine(&sigma_hats)?;
    Ok(SplitEstimate {
        sigma_hats,
        alpha_hats,
        failures,
        sigma_bar,
        alpha1,
        alpha2,
        alpha3,
        unreliable: 2 * failures > config.b_splits,
    })
}

/// Fractions of per-split indices truncated to 0 and to 2.
pub fn boundary_rate(estimate: &SplitEstimate) -> Result<(f64, f64)> {
    boundary_fractions(&estimate.alpha_hats)
}

pub fn boundary_fractions(alpha_hats: &[f64]) -> Result<(f64, f64)> {
    if alpha_hats.is_empty() {
        return Err(Error::Estimation("no successful splits".into()));
    }
    let count = alpha_hats.len() as f64;
    let zeros = alpha_hats.iter().filter(|&&a| a == 0.0).count() as f64;
    let twos = alpha_hats.iter().filter(|&&a| a == 2.0).count() as f64;
    Ok((zeros / count, twos / count))
}

fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 1..=k {
        acc *= n - k + i;
        acc /= i;
    }
    acc
}

/// Number of distinct X/Y constructions:
/// `C(n + 2m, n) * prod_{i=0}^{m-1} C(2m - 2i, 2)`.
pub fn permutation_count(n: u64, m: u64) -> BigUint {
    let mut count = binomial(n + 2 * m, n);
    for i in 0..m {
        count *= binomial(2 * m - 2 * i, 2);
    }
    count
}
