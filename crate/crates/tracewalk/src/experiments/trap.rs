//! Direct frequency of trap-shaped trace segments. A trap of height h and
//! width w is a three-phase excursion of the generating walk inside a
//! cylinder of radius w: climb h along the drift, climb h against it (the
//! backtrack that the harmonic tilt says costs alpha^(-h)), then climb h
//! forward again to seal the dead end. The frequency of the event decays
//! like alpha^(-h), which is measured here and fitted against h.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{conductance_direction, doob_transform, solve_alpha, AnalysisError};
use crate::stats::{norm, wls_line, WlsFit};
use crate::walk::{RandomSeed, StepDistribution};

/// Per-replica step budget is this many steps times the trap height;
/// replicas that exhaust it count as failures.
pub const STEPS_PER_HEIGHT: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum TrapError {
    #[error("alpha is infinite: the walk cannot backtrack, so traps never form")]
    AlphaInfinite,
    #[error("the drift projection onto ell is not positive (got {projection})")]
    NotTransient { projection: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapPoint {
    pub height: u64,
    pub frequency: f64,
    pub stderr: f64,
    pub hits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapResult {
    pub width: u64,
    pub replicas: usize,
    pub alpha: f64,
    pub points: Vec<TrapPoint>,
    /// Fit of -log(frequency) against height; the slope estimates
    /// log(alpha). Absent when fewer than two heights have hits.
    pub fit: Option<WlsFit>,
    /// Width zero leaves no room to turn around: every frequency is zero
    /// by construction and nothing is simulated.
    pub degenerate: bool,
}

/// One phase: does the walk's displacement along `axis` reach +h before
/// the failure boundary? Fails when the axial displacement drops below -w,
/// when the orthogonal distance exceeds w, or when the step budget runs
/// out. Returns the verdict; steps consumed are deducted from `budget`.
fn phase_reaches<R: rand::Rng>(
    dist: &StepDistribution,
    axis: &[f64],
    h: f64,
    w: f64,
    budget: &mut usize,
    rng: &mut R,
) -> bool {
    let d = dist.dim();
    let mut pos = vec![0i64; d];
    let mut axial = 0.0f64;
    while *budget > 0 {
        *budget -= 1;
        let dir = dist.sample(rng);
        pos[dir.axis()] += dir.sign();
        axial += dir.proj(axis);
        if axial >= h - 1e-9 {
            return true;
        }
        if axial <= -w - 1e-9 {
            return false;
        }
        let sq: f64 = pos.iter().map(|&c| (c * c) as f64).sum();
        if sq - axial * axial > w * w + 1e-9 {
            return false;
        }
    }
    false
}

/// Estimate trap frequencies for each height on the grid. Phases one and
/// three ask the walk to climb h along its drift direction; phase two asks
/// it to climb h along the drift direction of the tilted
/// (conditioned-to-backtrack) walk, which points against ell -- that is
/// the phase whose probability decays like alpha^(-h). Replica r of height
/// index i uses stream i * replicas + r.
pub fn trap_frequencies(
    dist0: &StepDistribution,
    dist1: &StepDistribution,
    heights: &[u64],
    width: u64,
    replicas: usize,
    seed: u64,
) -> Result<TrapResult, TrapError> {
    assert!(
        !heights.is_empty() && heights.iter().all(|&h| h >= 1),
        "heights must be nonempty and at least 1"
    );
    assert!(
        heights.windows(2).all(|w| w[0] < w[1]),
        "heights must be strictly increasing"
    );
    assert!(replicas > 0, "need at least one replica");

    let cd = conductance_direction(dist1);
    let root = match solve_alpha(dist0, &cd.ell) {
        Ok(root) => root,
        Err(AnalysisError::NotTransient { projection }) => {
            return Err(TrapError::NotTransient { projection })
        }
        Err(_) => unreachable!("solve_alpha only fails on non-transience"),
    };
    if !root.is_finite() {
        return Err(TrapError::AlphaInfinite);
    }

    if width == 0 {
        let points = heights
            .iter()
            .map(|&h| TrapPoint {
                height: h,
                frequency: 0.0,
                stderr: 0.0,
                hits: 0,
            })
            .collect();
        return Ok(TrapResult {
            width,
            replicas,
            alpha: root.alpha,
            points,
            fit: None,
            degenerate: true,
        });
    }

    let delta0 = dist0.drift();
    let u0: Vec<f64> = {
        let n = norm(&delta0);
        delta0.iter().map(|x| x / n).collect()
    };
    let (_, tilted_drift) =
        doob_transform(dist0, &cd.ell, root.alpha).expect("finite root solves the equation");
    let uhat: Vec<f64> = {
        let n = norm(&tilted_drift);
        assert!(n > 0.0, "the tilted drift projects strictly against ell");
        tilted_drift.iter().map(|x| x / n).collect()
    };

    let w = width as f64;
    let points: Vec<TrapPoint> = heights
        .iter()
        .enumerate()
        .map(|(i, &height)| {
            let h = height as f64;
            let hits = (0..replicas)
                .into_par_iter()
                .filter(|&r| {
                    let stream = (i * replicas + r) as u64;
                    let mut rng = RandomSeed::new(seed, stream).rng();
                    let mut budget = STEPS_PER_HEIGHT * height as usize;
                    phase_reaches(dist0, &u0, h, w, &mut budget, &mut rng)
                        && phase_reaches(dist0, &uhat, h, w, &mut budget, &mut rng)
                        && phase_reaches(dist0, &u0, h, w, &mut budget, &mut rng)
                })
                .count() as u64;
            let f = hits as f64 / replicas as f64;
            TrapPoint {
                height,
                frequency: f,
                stderr: (f * (1.0 - f) / replicas as f64).sqrt(),
                hits,
            }
        })
        .collect();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sg = Vec::new();
    for pt in &points {
        if pt.hits > 0 && pt.hits < replicas as u64 {
            xs.push(pt.height as f64);
            ys.push(-pt.frequency.ln());
            sg.push(pt.stderr / pt.frequency);
        }
    }
    let fit = (xs.len() >= 2).then(|| wls_line(&xs, &ys, &sg));

    Ok(TrapResult {
        width,
        replicas,
        alpha: root.alpha,
        points,
        fit,
        degenerate: false,
    })
}
