//! Estimation of the stability index of stable distributions by sample
//! splitting.
//!
//! If `X` and `X'` are iid stable with index `alpha`, then `X + X'` has the
//! law of `mu + sigma X` with `sigma = 2^(1/alpha)`, so
//! `alpha = log 2 / log sigma`. A single sample is split at random into an
//! X-sample and a Y-sample of pair sums, `sigma` is estimated from the two
//! samples with a quantile-based asymptotic-likelihood fit, and the estimate
//! is averaged over many random splits.
//!
//! Modules:
//!
//! * [`stable`]: parameterization, characteristic function, sampling.
//! * [`empirical`]: interpolated empirical quantiles and kernel densities.
//! * [`al`]: the two-sample location/scale fit.
//! * [`split`]: the split-sample estimator and its combiners.
//! * [`mqe`]: McCulloch's quantile estimator, for comparison.
//! * [`harness`]: Monte-Carlo experiments and their CSV output.

pub mod al;
pub mod empirical;
pub mod error;
pub mod harness;
pub mod mqe;
pub mod seed;
pub mod split;
pub mod stable;

pub use al::{al_fit, AlFit, AlOptions, AlWeights, TGrid};
pub use empirical::{KdeSpec, SortedSample};
pub use error::{Error, Result};
pub use harness::{run_experiment, Estimator, ExperimentResult, ExperimentSpec};
pub use mqe::{mqe_estimate, MqeTable};
pub use split::{permutation_count, sse_estimate, SplitConfig, SplitEstimate};
pub use stable::{alpha_from_sigma, sigma_from_alpha, StableParams};
