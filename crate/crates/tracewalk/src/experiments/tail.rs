//! Heavy-tail estimation for the trapping time proxy. The escape sample of
//! one generating-walk replica is beta^(-min projection): the conductance
//! mass of the deepest backtrack the trace makes behind its start. Its
//! upper tail has index kappa = log(alpha)/log(beta), estimated here with
//! the Hill estimator plus a k-sensitivity sweep.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::min_projection_walk;
use crate::analysis::{conductance_direction, solve_alpha};
use crate::stats::dot;
use crate::walk::{RandomSeed, StepDistribution};

/// Hill estimation is only meaningful with a real tail behind it; these
/// floors are enforced, not advisory.
pub const MIN_SAMPLES: usize = 10_000;
pub const MIN_ORDER_STATISTICS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum TailError {
    #[error(
        "Hill estimation needs at least {MIN_SAMPLES} samples and \
         {MIN_ORDER_STATISTICS} <= k < sample count (got {samples} samples, k = {k})"
    )]
    TooFewSamples { samples: usize, k: usize },
    #[error("escape samples need a positive drift projection onto ell (got {projection})")]
    NotTransient { projection: f64 },
}

/// Hill point estimate at one choice of k, with its first-order standard
/// error kappa / sqrt(k).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillEstimate {
    pub k: usize,
    pub kappa: f64,
    pub stderr: f64,
}

/// The Hill estimator on the top k order statistics: the reciprocal of the
/// mean log-excess over the (k+1)-th largest sample. Ties throughout the
/// top block drive the estimate to +infinity.
pub fn hill_estimate(samples: &[f64], k: usize) -> Result<HillEstimate, TailError> {
    if samples.len() < MIN_SAMPLES || k < MIN_ORDER_STATISTICS || k + 1 > samples.len() {
        return Err(TailError::TooFewSamples {
            samples: samples.len(),
            k,
        });
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("samples must not be NaN"));
    let pivot = sorted[k];
    assert!(pivot > 0.0, "escape samples are >= 1 by construction");
    let mean_log: f64 = sorted[..k].iter().map(|s| (s / pivot).ln()).sum::<f64>() / k as f64;
    let kappa = 1.0 / mean_log; // +inf when the top block is all ties
    Ok(HillEstimate {
        k,
        kappa,
        stderr: kappa / (k as f64).sqrt(),
    })
}

/// One escape sample per replica: exp(-log_beta * min projection) over the
/// horizon. Replica r uses stream r.
pub fn escape_samples(
    dist0: &StepDistribution,
    ell: &[f64],
    log_beta: f64,
    horizon: usize,
    replicas: usize,
    seed: u64,
) -> Vec<f64> {
    assert_eq!(ell.len(), dist0.dim(), "direction dimension mismatch");
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let min = min_projection_walk(dist0, ell, horizon, &RandomSeed::new(seed, r as u64));
            (-log_beta * min).exp()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailResult {
    pub horizon: usize,
    pub replicas: usize,
    pub log_beta: f64,
    /// Balanced conductances make every escape sample 1; there is no tail
    /// to estimate and the estimates list stays empty.
    pub degenerate: bool,
    /// Primary k (middle entry of the sensitivity sweep).
    pub k: usize,
    /// Hill estimates at k/2, k, and 2k where those are admissible.
    pub estimates: Vec<HillEstimate>,
    pub kappa: Option<f64>,
    pub kappa_stderr: Option<f64>,
}

/// Full tail experiment: draw escape samples, run Hill at k (default
/// ceil(sqrt(N))) and at k/2 and 2k for sensitivity. `horizon` = 0 picks
/// the saturation horizon from the depth the deepest expected sample
/// needs: ceil(50 * x_max / (drift . ell)) with x_max = ceil(log N / t).
pub fn tail_experiment(
    dist0: &StepDistribution,
    dist1: &StepDistribution,
    horizon: usize,
    replicas: usize,
    k: usize,
    seed: u64,
) -> Result<TailResult, TailError> {
    let cd = conductance_direction(dist1);
    if cd.is_balanced() {
        return Ok(TailResult {
            horizon,
            replicas,
            log_beta: 0.0,
            degenerate: true,
            k: 0,
            estimates: Vec::new(),
            kappa: None,
            kappa_stderr: None,
        });
    }

    let projection = dot(&dist0.drift(), &cd.ell);
    if projection <= 0.0 {
        return Err(TailError::NotTransient { projection });
    }

    let horizon = if horizon > 0 {
        horizon
    } else {
        let x_max = match solve_alpha(dist0, &cd.ell) {
            Ok(root) if root.is_finite() => ((replicas as f64).ln() / root.t).ceil().max(1.0),
            // no backtracking at all: any depth-1 horizon saturates
            _ => 1.0,
        };
        (50.0 * x_max / projection).ceil() as usize
    };

    let samples = escape_samples(dist0, &cd.ell, cd.log_beta, horizon, replicas, seed);
    let k = if k > 0 {
        k
    } else {
        (replicas as f64).sqrt().ceil() as usize
    };

    let primary = hill_estimate(&samples, k)?;
    let mut estimates = Vec::with_capacity(3);
    for kk in [k / 2, k, 2 * k] {
        if kk == k {
            estimates.push(primary);
        } else if let Ok(est) = hill_estimate(&samples, kk) {
            estimates.push(est);
        }
    }

    Ok(TailResult {
        horizon,
        replicas,
        log_beta: cd.log_beta,
        degenerate: false,
        k,
        estimates,
        kappa: Some(primary.kappa),
        kappa_stderr: Some(primary.stderr),
    })
}
