//! Bootstrap confidence intervals for the identified set
//! `[gamma_I, gamma_U]`.
//!
//! Units are resampled with replacement from the pooled sample and the full
//! estimator is re-run on each replicate. The interval expands both
//! endpoints by the `1 - alpha` quantile of
//! `max(gamma_I* - gamma_I_hat, gamma_U_hat - gamma_U*)`, the one-number
//! calibration that covers the whole set rather than each endpoint
//! separately. Replicate `b` draws from an RNG keyed by `(seed, b)`, so
//! results do not depend on thread scheduling.

use crate::data::Dataset;
use crate::estimate::{estimate_bounds, BoundsEstimate, Design, EstimateError};
use crate::rng::CounterRng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Replicates where the estimator fails (a resample missing an arm or a
/// category, a model that will not converge) are dropped; below this usable
/// fraction the interval is not trustworthy and the run errors instead.
pub const MIN_USABLE_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BootError {
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("alpha must be strictly between 0 and 1, got {0}")]
    BadAlpha(f64),
    #[error("bootstrap needs at least one replicate")]
    NoReplicates,
    #[error("only {usable} of {requested} bootstrap replicates were usable")]
    TooFewReplicates { usable: usize, requested: usize },
}

/// Point estimates plus the expanded interval for the identified set.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalReport {
    pub design: Design,
    pub alpha: f64,
    pub seed: u64,
    pub replicates_requested: usize,
    pub replicates_used: usize,
    pub gamma_lower: f64,
    pub gamma_independent: f64,
    pub gamma_upper: f64,
    /// `1 - alpha` quantile of the replicate exceedances, never negative.
    pub z_star: f64,
    pub interval_lower: f64,
    pub interval_upper: f64,
}

/// Confidence interval for `[gamma_I, gamma_U]` by the pooled bootstrap.
pub fn bootstrap_interval(
    data: &Dataset,
    design: Design,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<IntervalReport, BootError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BootError::BadAlpha(alpha));
    }
    if replicates == 0 {
        return Err(BootError::NoReplicates);
    }
    let point = estimate_bounds(data, design)?;
    let n = data.num_units();

    let exceedances: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = CounterRng::from_key(seed, b as u64);
            let indices: Vec<usize> = (0..n).map(|_| rng.next_index(n)).collect();
            let resampled = data.resample(&indices);
            estimate_bounds(&resampled, design).ok().map(|est: BoundsEstimate| {
                let low = est.bounds.gamma_independent - point.bounds.gamma_independent;
                let high = point.bounds.gamma_upper - est.bounds.gamma_upper;
                low.max(high)
            })
        })
        .collect();

    let mut usable: Vec<f64> = exceedances.into_iter().flatten().collect();
    if (usable.len() as f64) < MIN_USABLE_FRACTION * replicates as f64 {
        return Err(BootError::TooFewReplicates { usable: usable.len(), requested: replicates });
    }
    usable.sort_by(|a, b| a.partial_cmp(b).expect("finite exceedances"));
    let rank = ((1.0 - alpha) * usable.len() as f64).ceil() as usize;
    let z_star = usable[rank.clamp(1, usable.len()) - 1].max(0.0);

    Ok(IntervalReport {
        design,
        alpha,
        seed,
        replicates_requested: replicates,
        replicates_used: usable.len(),
        gamma_lower: point.bounds.gamma_lower,
        gamma_independent: point.bounds.gamma_independent,
        gamma_upper: point.bounds.gamma_upper,
        z_star,
        interval_lower: point.bounds.gamma_independent - z_star,
        interval_upper: point.bounds.gamma_upper + z_star,
    })
}
