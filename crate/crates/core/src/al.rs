//! Two-sample asymptotic-likelihood (AL) estimation of location and scale.
//!
//! Given independent samples with `Y = mu + sigma X` in distribution, and
//! quantile levels `t_1 < ... < t_k`, the estimator minimises
//!
//! ```text
//! Q(theta) = W1' (lambda S)^-1 W1 + W2' ((1 - lambda) S)^-1 W2
//! W1_j = g(G^-1(t_j)) (G^-1(t_j) - mu - sigma phi_j)
//! W2_j = f(F^-1(t_j)) (F^-1(t_j) - phi_j)
//! ```
//!
//! over `theta = (phi_1..phi_k, mu, sigma)`, where `F^-1`, `G^-1` are the
//! interpolated empirical quantile functions, `f`, `g` kernel density
//! estimates, `S_ij = min(t_i, t_j) - t_i t_j` and `lambda = n / (n + m)`.
//!
//! For fixed `sigma`, `Q` is a positive-definite quadratic in `(phi, mu)`,
//! so those are solved exactly and only `sigma` is searched numerically.

use std::f64::consts::LN_2;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rayon::prelude::*;

use crate::empirical::{KdeSpec, SortedSample};
use crate::error::{domain, Error, Result};
use crate::seed::substream;
use crate::stable::{sample_stable, sigma_from_alpha, StableParams};

/// Plug-in densities at or below this make a fit fail.
pub const DENSITY_FLOOR: f64 = 1e-30;

/// Strictly increasing quantile levels in `(0, 1)` together with the
/// factorised Brownian-bridge covariance they induce.
#[derive(Debug, Clone)]
pub struct TGrid {
    t: Vec<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    cov_inv: DMatrix<f64>,
}

impl PartialEq for TGrid {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t
    }
}

impl TGrid {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(domain("t-grid needs at least one level"));
        }
        if t.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(domain("t-grid levels must lie in (0, 1)"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("t-grid levels must be strictly increasing"));
        }
        let cov = sigma_matrix(&t);
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Numerical("t-grid covariance is not positive definite".into()))?;
        let cov_inv = chol.inverse();
        Ok(Self {
            t,
            cov,
            chol,
            cov_inv,
        })
    }

    /// `t_j = j / (k + 1)`.
    pub fn equispaced(k: usize) -> Result<Self> {
        Self::new((1..=k).map(|j| j as f64 / (k + 1) as f64).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.t
    }

    pub fn k(&self) -> usize {
        self.t.len()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `v' S^-1 v` through the Cholesky factor.
    fn mahalanobis(&self, v: &DVector<f64>) -> f64 {
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(v)
            .expect("Cholesky factor has a positive diagonal");
        z.norm_squared()
    }
}

/// `S_ij = min(t_i, t_j) - t_i t_j`.
pub fn sigma_matrix(t: &[f64]) -> DMatrix<f64> {
    let k = t.len();
    DMatrix::from_fn(k, k, |i, j| t[i].min(t[j]) - t[i] * t[j])
}

/// Plug-in quantities of the objective for one pair of samples.
#[derive(Debug, Clone)]
pub struct AlWeights {
    pub grid: TGrid,
    pub lambda: f64,
    pub density_x: Vec<f64>,
    pub density_y: Vec<f64>,
    pub quantile_x: Vec<f64>,
    pub quantile_y: Vec<f64>,
}

impl AlWeights {
    pub fn new(
        grid: TGrid,
        lambda: f64,
        density_x: Vec<f64>,
        density_y: Vec<f64>,
        quantile_x: Vec<f64>,
        quantile_y: Vec<f64>,
    ) -> Result<Self> {
        let k = grid.k();
        for v in [&density_x, &density_y, &quantile_x, &quantile_y] {
            if v.len() != k {
                return Err(Error::Shape {
                    expected: k,
                    got: v.len(),
                });
            }
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(domain(format!("lambda = {lambda} outside (0, 1)")));
        }
        if density_x
            .iter()
            .chain(&density_y)
            .any(|d| !(*d > DENSITY_FLOOR) || !d.is_finite())
        {
            return Err(Error::Fit {
                reason: format!("plug-in density at or below {DENSITY_FLOOR:e}"),
                best: None,
            });
        }
        Ok(Self {
            grid,
            lambda,
            density_x,
            density_y,
            quantile_x,
            quantile_y,
        })
    }

    /// Empirical quantiles and kernel densities (default bandwidth, `f` from
    /// the X-sample only and `g` from the Y-sample only) at the grid levels.
    pub fn from_samples(x: &SortedSample, y: &SortedSample, grid: &TGrid) -> Result<Self> {
        let kde_x = KdeSpec::for_sample(x)?;
        let kde_y = KdeSpec::for_sample(y)?;
        let mut quantile_x = Vec::with_capacity(grid.k());
        let mut quantile_y = Vec::with_capacity(grid.k());
        for &t in grid.levels() {
            quantile_x.push(x.equantile(t)?);
            quantile_y.push(y.equantile(t)?);
        }
        let density_x = quantile_x.iter().map(|&q| x.kde_density(&kde_x, q)).collect();
        let density_y = quantile_y.iter().map(|&q| y.kde_density(&kde_y, q)).collect();
        let (n, m) = (x.len() as f64, y.len() as f64);
        Self::new(
            grid.clone(),
            n / (n + m),
            density_x,
            density_y,
            quantile_x,
            quantile_y,
        )
    }

    pub fn k(&self) -> usize {
        self.grid.k()
    }
}

/// `V' Omega^-1 V` at `theta = (phi_1..phi_k, mu, sigma)`.
pub fn al_objective(theta: &[f64], weights: &AlWeights) -> Result<f64> {
    let k = weights.k();
    if theta.len() != k + 2 {
        return Err(Error::Shape {
            expected: k + 2,
            got: theta.len(),
        });
    }
    let (phi, mu, sigma) = (&theta[..k], theta[k], theta[k + 1]);
    let w1 = DVector::from_fn(k, |j, _| {
        weights.density_y[j] * (weights.quantile_y[j] - mu - sigma * phi[j])
    });
    let w2 = DVector::from_fn(k, |j, _| {
        weights.density_x[j] * (weights.quantile_x[j] - phi[j])
    });
    let lambda = weights.lambda;
    Ok(weights.grid.mahalanobis(&w1) / lambda + weights.grid.mahalanobis(&w2) / (1.0 - lambda))
}

/// The objective with `(phi, mu)` eliminated for each fixed `sigma`.
///
/// The fit is equivariant under `x -> c + x`, `(phi, mu) -> (phi + c,
/// mu + c (1 - sigma))`; the inner solve works in coordinates centred on the
/// middle X-quantile so that residuals do not cancel against a large common
/// offset.
#[derive(Debug, Clone)]
pub struct ProfiledObjective {
    /// `D_g S^-1 D_g / lambda`
    p_y: DMatrix<f64>,
    /// `D_f S^-1 D_f / (1 - lambda)`
    p_x: DMatrix<f64>,
    qx: DVector<f64>,
    qy: DVector<f64>,
    p_y_ones: DVector<f64>,
    center: f64,
}

/// Minimiser of the objective over `(phi, mu)` at one `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub phi: Vec<f64>,
    pub mu: f64,
    pub objective: f64,
}

impl ProfiledObjective {
    pub fn new(weights: &AlWeights) -> Self {
        let k = weights.k();
        let inv = &weights.grid.cov_inv;
        let dy = &weights.density_y;
        let dx = &weights.density_x;
        let lambda = weights.lambda;
        let p_y = DMatrix::from_fn(k, k, |i, j| dy[i] * inv[(i, j)] * dy[j] / lambda);
        let p_x = DMatrix::from_fn(k, k, |i, j| dx[i] * inv[(i, j)] * dx[j] / (1.0 - lambda));
        let p_y_ones = DVector::from_fn(k, |i, _| p_y.row(i).sum());
        Self {
            p_y,
            p_x,
            qx: DVector::from_column_slice(&weights.quantile_x),
            qy: DVector::from_column_slice(&weights.quantile_y),
            p_y_ones,
            center: weights.quantile_x[k / 2],
        }
    }

    fn k(&self) -> usize {
        self.qx.len()
    }

    /// Normal equations for `beta = (phi - c, mu - c (1 - sigma))`.
    fn system(&self, sigma: f64, c: f64) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.k();
        let qx = self.qx.add_scalar(-c);
        let qy = self.qy.add_scalar(-c);
        let p_y_qy = &self.p_y * &qy;
        let p_x_qx = &self.p_x * &qx;
        let mut lhs = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for i in 0..k {
            for j in 0..k {
                lhs[(i, j)] = sigma * sigma * self.p_y[(i, j)] + self.p_x[(i, j)];
            }
            lhs[(i, k)] = sigma * self.p_y_ones[i];
            lhs[(k, i)] = sigma * self.p_y_ones[i];
            rhs[i] = sigma * p_y_qy[i] + p_x_qx[i];
        }
        lhs[(k, k)] = self.p_y_ones.sum();
        rhs[k] = p_y_qy.sum();
        (lhs, rhs)
    }

    /// Normal-equation matrix and right-hand side for `beta = (phi, mu)`.
    pub fn normal_equations(&self, sigma: f64) -> (DMatrix<f64>, DVector<f64>) {
        self.system(sigma, 0.0)
    }

    pub fn solve(&self, sigma: f64) -> Result<InnerSolution> {
        let k = self.k();
        let c = self.center;
        let (lhs, rhs) = self.system(sigma, c);
        let beta = Cholesky::new(lhs)
            .ok_or_else(|| Error::Numerical(format!("normal equations singular at sigma = {sigma}")))?
            .solve(&rhs);
        let mu = beta[k];
        let r_y = DVector::from_fn(k, |j, _| (self.qy[j] - c) - mu - sigma * beta[j]);
        let r_x = DVector::from_fn(k, |j, _| (self.qx[j] - c) - beta[j]);
        let objective = r_y.dot(&(&self.p_y * &r_y)) + r_x.dot(&(&self.p_x * &r_x));
        if !objective.is_finite() {
            return Err(Error::Numerical(format!("objective not finite at sigma = {sigma}")));
        }
        Ok(InnerSolution {
            phi: beta.rows(0, k).iter().map(|b| b + c).collect(),
            mu: mu + c * (1.0 - sigma),
            objective: objective.max(0.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlFit {
    pub phi: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Search settings for the scale. The search runs on `log sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlOptions {
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    /// Final bracket width on the log scale.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Log-spaced points scanned to bracket the global minimum before the
    /// golden-section refinement.
    pub scan_points: usize,
}

impl Default for AlOptions {
    fn default() -> Self {
        Self {
            sigma_lower: 0.5,
            sigma_upper: 64.0,
            tolerance: 1e-6,
            max_iterations: 200,
            scan_points: 24,
        }
    }
}

pub fn al_fit(x: &SortedSample, y: &SortedSample, grid: &TGrid) -> Result<AlFit> {
    al_fit_with(x, y, grid, &AlOptions::default())
}

pub fn al_fit_with(
    x: &SortedSample,
    y: &SortedSample,
    grid: &TGrid,
    options: &AlOptions,
) -> Result<AlFit> {
    let weights = AlWeights::from_samples(x, y, grid)?;
    fit_weights(&weights, options)
}

/// Minimise the profiled objective over `sigma`.
pub fn fit_weights(weights: &AlWeights, options: &AlOptions) -> Result<AlFit> {
    if !(options.sigma_lower > 0.0 && options.sigma_upper > options.sigma_lower) {
        return Err(domain("invalid sigma search bounds"));
    }
    let profile = ProfiledObjective::new(weights);
    let lo = options.sigma_lower.ln();
    let hi = options.sigma_upper.ln();
    let eval = |u: f64| profile.solve(u.exp()).map(|s| s.objective);

    let points = options.scan_points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..points {
        let v = eval(lo + step * i as f64)?;
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    let mut a = lo + step * best_idx.saturating_sub(1) as f64;
    let mut b = lo + step * (best_idx + 1).min(points - 1) as f64;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut iterations = 0;
    while b - a > options.tolerance {
        if iterations >= options.max_iterations {
            let u = if fc < fd { c } else { d };
            let best = finish(&profile, u.exp(), false, iterations)?;
            return Err(Error::Fit {
                reason: format!("scale search did not converge in {iterations} iterations"),
                best: Some(Box::new(best)),
            });
        }
        iterations += 1;
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
    }
    let u = 0.5 * (a + b);
    // a minimum pinned to either end of the search range is a bound hit
    let at_bound = u - lo <= options.tolerance || hi - u <= options.tolerance;
    let sigma = if u - lo <= options.tolerance {
        options.sigma_lower
    } else if hi - u <= options.tolerance {
        options.sigma_upper
    } else {
        newton_polish(&eval, u, options.tolerance)?.exp()
    };
    finish(&profile, sigma, !at_bound, iterations)
}

/// One central-difference Newton step on the (smooth) profiled objective.
/// Golden section leaves the minimiser uncertain to within the tolerance and
/// its path depends on rounding; the polish removes both, so that fits of
/// affinely transformed data agree far below the tolerance.
fn newton_polish(eval: &impl Fn(f64) -> Result<f64>, u: f64, tolerance: f64) -> Result<f64> {
    const H: f64 = 1e-4;
    let (fm, f0, fp) = (eval(u - H)?, eval(u)?, eval(u + H)?);
    let curvature = fp - 2.0 * f0 + fm;
    if !(curvature > 0.0) {
        return Ok(u);
    }
    let step = 0.5 * H * (fp - fm) / curvature;
    Ok(if step.abs() <= tolerance { u - step } else { u })
}

fn finish(
    profile: &ProfiledObjective,
    sigma: f64,
    converged: bool,
    iterations: usize,
) -> Result<AlFit> {
    let inner = profile.solve(sigma)?;
    Ok(AlFit {
        phi: inner.phi,
        mu: inner.mu,
        sigma,
        objective: inner.objective,
        converged,
        iterations,
    })
}

/// Delta-method variance of the index estimate, `alpha^4 Gamma22 / (log 2)^2`.
pub fn alpha_asymptotic_variance(alpha: f64, gamma22: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(domain(format!("alpha = {alpha} outside (0, 2]")));
    }
    if !(gamma22 > 0.0 && gamma22.is_finite()) {
        return Err(domain(format!("Gamma22 = {gamma22} must be positive")));
    }
    Ok(alpha.powi(4) * gamma22 / (LN_2 * LN_2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma22Estimate {
    pub value: f64,
    pub std_error: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Monte-Carlo estimate of `Gamma22`, the variance of
/// `(nm / (n + m))^(1/2) (sigma_hat - sigma) / sigma` for independent X- and
/// pair-sum Y-samples drawn from `params`. Replication `r` uses
/// `substream(seed, r)`.
pub fn estimate_gamma22(
    params: &StableParams,
    grid: &TGrid,
    n: usize,
    m: usize,
    reps: usize,
    seed: u64,
) -> Result<Gamma22Estimate> {
    params.validate()?;
    if reps < 100 {
        return Err(domain(format!("reps = {reps} below 100")));
    }
    if n < 2 || m < 2 {
        return Err(domain("sample sizes must be at least 2"));
    }
    let sigma = sigma_from_alpha(params.alpha)?;
    let norm = ((n * m) as f64 / (n + m) as f64).sqrt();
    let draws: Vec<Option<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            two_sample_scale(params, grid, n, m, &mut rng)
                .ok()
                .map(|s| norm * (s - sigma) / sigma)
        })
        .collect();
    let z: Vec<f64> = draws.iter().flatten().copied().collect();
    let used = z.len();
    if used < 2 {
        return Err(Error::Estimation("fewer than two successful fits".into()));
    }
    let count = used as f64;
    let mean = z.iter().sum::<f64>() / count;
    let m2 = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    let m4 = z.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / count;
    let value = m2 * count / (count - 1.0);
    Ok(Gamma22Estimate {
        value,
        std_error: ((m4 - m2 * m2).max(0.0) / count).sqrt(),
        used,
        excluded: reps - used,
    })
}

fn two_sample_scale<R: Rng + ?Sized>(
    params: &StableParams,
    grid: &TGrid,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<f64> {
    let x = sample_stable(params, n, rng)?;
    let pairs = sample_stable(params, 2 * m, rng)?;
    let y = pairs.chunks_exact(2).map(|p| p[0] + p[1]).collect();
    let fit = al_fit(&SortedSample::new(x)?, &SortedSample::new(y)?, grid)?;
    Ok(fit.sigma)
}
