//! How deep does the generating walk backtrack? Estimates, for each depth
//! x on a grid, the probability that the walk's projection onto the
//! conductance direction ever reaches -x, and fits the exponential decay
//! rate of those probabilities. The decay rate is log(alpha), the same
//! constant that governs the trapping tail of the second-layer walk.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::min_projection_walk;
use crate::stats::{dot, wls_line, WlsFit};
use crate::walk::{RandomSeed, StepDistribution};

#[derive(Debug, Error, PartialEq)]
pub enum BacktrackError {
    #[error("depth grid must be nonempty, strictly increasing, and positive")]
    DegenerateGrid,
    #[error("automatic horizon needs a positive drift projection onto ell")]
    NonPositiveDrift,
}

/// One grid point: depth, estimated reach probability, binomial standard
/// error, and the raw hit count behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktrackPoint {
    pub depth: f64,
    pub probability: f64,
    pub stderr: f64,
    pub hits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktrackResult {
    pub horizon: usize,
    pub replicas: usize,
    pub points: Vec<BacktrackPoint>,
    /// Weighted least-squares fit of -log(probability) against depth;
    /// absent when fewer than two grid points have informative counts.
    pub fit: Option<WlsFit>,
    /// True when no step of positive weight projects negatively onto ell:
    /// the walk can never backtrack, every probability is zero, and the
    /// decay exponent is +infinity.
    pub exponent_infinite: bool,
}

/// Estimate backtrack-depth probabilities for the walk `dist0` along the
/// unit direction `ell`. `horizon` = 0 picks the saturation horizon
/// ceil(50 * max_depth / (drift . ell)), by which point deeper backtracks
/// are exponentially unlikely to still be pending. Replica r uses stream r
/// of the seed.
pub fn backtrack_probabilities(
    dist0: &StepDistribution,
    ell: &[f64],
    depths: &[f64],
    horizon: usize,
    replicas: usize,
    seed: u64,
) -> Result<BacktrackResult, BacktrackError> {
    assert_eq!(ell.len(), dist0.dim(), "direction dimension mismatch");
    assert!(replicas > 0, "need at least one replica");
    let grid_ok = !depths.is_empty()
        && depths.iter().all(|&x| x.is_finite() && x > 0.0)
        && depths.windows(2).all(|w| w[0] < w[1]);
    if !grid_ok {
        return Err(BacktrackError::DegenerateGrid);
    }

    let exponent_infinite = (0..2 * dist0.dim()).all(|k| {
        let dir = crate::walk::Direction(k as u8);
        dir.proj(ell) >= 0.0 || dist0.weight(dir) == 0.0
    });
    if exponent_infinite {
        let points = depths
            .iter()
            .map(|&x| BacktrackPoint {
                depth: x,
                probability: 0.0,
                stderr: 0.0,
                hits: 0,
            })
            .collect();
        return Ok(BacktrackResult {
            horizon,
            replicas,
            points,
            fit: None,
            exponent_infinite: true,
        });
    }

    let horizon = if horizon > 0 {
        horizon
    } else {
        let proj = dot(&dist0.drift(), ell);
        if proj <= 0.0 {
            return Err(BacktrackError::NonPositiveDrift);
        }
        (50.0 * depths.last().unwrap() / proj).ceil() as usize
    };

    let mins: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| min_projection_walk(dist0, ell, horizon, &RandomSeed::new(seed, r as u64)))
        .collect();

    let n = replicas as f64;
    let points: Vec<BacktrackPoint> = depths
        .iter()
        .map(|&x| {
            let hits = mins.iter().filter(|&&m| m <= -x + 1e-9).count() as u64;
            let p = hits as f64 / n;
            BacktrackPoint {
                depth: x,
                probability: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
                hits,
            }
        })
        .collect();

    // -log p is linear in depth with slope log(alpha); only interior
    // counts carry information about the rate
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sg = Vec::new();
    for pt in &points {
        if pt.hits > 0 && pt.hits < replicas as u64 {
            xs.push(pt.depth);
            ys.push(-pt.probability.ln());
            sg.push(pt.stderr / pt.probability);
        }
    }
    let fit = (xs.len() >= 2).then(|| wls_line(&xs, &ys, &sg));

    Ok(BacktrackResult {
        horizon,
        replicas,
        points,
        fit,
        exponent_infinite: false,
    })
}
