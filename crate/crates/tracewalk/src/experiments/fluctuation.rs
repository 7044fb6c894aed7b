//! Exploratory fluctuation scaling of the second-layer walk. Over a
//! geometric grid of horizons the experiment takes the median (across
//! replicas) of either the displacement along the drift (sub-ballistic
//! regime, where displacement itself scales like n^kappa) or the absolute
//! deviation from linear transport (ballistic regime), and fits a log-log
//! slope. Medians keep the heavy trapping tails from swamping the picture,
//! but the slope is a diagnostic, not a calibrated estimator -- results
//! carry an explicit exploratory flag.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{classify, ser_maybe_inf};
use crate::nested::{sample_positions, NestedError};
use crate::stats::{median, norm, wls_line, WlsFit};
use crate::walk::{RandomSeed, StepDistribution};

pub const MIN_GRID_POINTS: usize = 4;
pub const MIN_REPLICAS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum FluctuationError {
    #[error(
        "need at least {MIN_GRID_POINTS} strictly increasing horizons and \
         {MIN_REPLICAS} replicas, with enough positive medians to fit a line"
    )]
    InsufficientGrid,
    #[error(transparent)]
    Nested(#[from] NestedError),
}

/// What the medians are medians of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluctuationMode {
    /// Median displacement along the drift direction; the scaling variable
    /// in the sub-ballistic regime.
    Displacement,
    /// Median absolute deviation from n * vhat along the drift direction,
    /// with vhat estimated at the largest horizon; the scaling variable in
    /// the ballistic regime.
    CenteredSpread,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationResult {
    pub mode: FluctuationMode,
    pub grid: Vec<usize>,
    pub medians: Vec<f64>,
    /// Ordinary least-squares slope of log(median) against log(horizon).
    pub fit: WlsFit,
    pub replicas: usize,
    /// The model's tail exponent, echoed from the closed-form profile when
    /// it exists (infinite serializes as "inf").
    #[serde(serialize_with = "ser_maybe_inf")]
    pub kappa: Option<f64>,
    /// Always true: this experiment ships a diagnostic, not an estimator
    /// with calibrated error bars.
    pub exploratory: bool,
}

/// Run the fluctuation-scaling experiment over `grid` horizons with one
/// nested-walk run per replica (replica r uses stream r).
pub fn fluctuation_experiment(
    dist0: &StepDistribution,
    dist1: &StepDistribution,
    grid: &[usize],
    replicas: usize,
    seed: u64,
    vertex_budget: usize,
) -> Result<FluctuationResult, FluctuationError> {
    let grid_ok = grid.len() >= MIN_GRID_POINTS
        && grid[0] >= 1
        && grid.windows(2).all(|w| w[0] < w[1]);
    if !grid_ok || replicas < MIN_REPLICAS {
        return Err(FluctuationError::InsufficientGrid);
    }

    let profile = classify(dist0, dist1);
    let mode = match profile.kappa {
        Some(k) if profile.transient && k.is_finite() && k < 1.0 => {
            FluctuationMode::Displacement
        }
        _ => FluctuationMode::CenteredSpread,
    };

    let delta0 = dist0.drift();
    let u0: Vec<f64> = {
        let n = norm(&delta0);
        delta0.iter().map(|x| x / n).collect()
    };

    // projections[r][g] = X^(1)_{grid[g]} . u0 for replica r
    let projections: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            sample_positions(dist0, dist1, grid, &RandomSeed::new(seed, r as u64), vertex_budget)
                .map(|pts| pts.iter().map(|p| p.dot(&u0)).collect())
        })
        .collect::<Result<_, _>>()?;

    let medians: Vec<f64> = match mode {
        FluctuationMode::Displacement => (0..grid.len())
            .map(|g| median(&projections.iter().map(|row| row[g]).collect::<Vec<_>>()))
            .collect(),
        FluctuationMode::CenteredSpread => {
            let last = grid.len() - 1;
            let n_last = grid[last] as f64;
            let vhat = projections.iter().map(|row| row[last]).sum::<f64>()
                / (replicas as f64 * n_last);
            (0..grid.len())
                .map(|g| {
                    let centered: Vec<f64> = projections
                        .iter()
                        .map(|row| (row[g] - grid[g] as f64 * vhat).abs())
                        .collect();
                    median(&centered)
                })
                .collect()
        }
    };

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (g, &m) in medians.iter().enumerate() {
        if m > 0.0 {
            xs.push((grid[g] as f64).ln());
            ys.push(m.ln());
        }
    }
    if xs.len() < 2 {
        return Err(FluctuationError::InsufficientGrid);
    }
    let sigma = vec![1.0; xs.len()];
    let fit = wls_line(&xs, &ys, &sigma);

    Ok(FluctuationResult {
        mode,
        grid: grid.to_vec(),
        medians,
        fit,
        replicas,
        kappa: profile.kappa,
        exploratory: true,
    })
}
