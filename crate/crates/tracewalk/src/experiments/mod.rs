//! The numerical experiments: each submodule estimates one quantity of the
//! two-layer model by Monte Carlo and reports point estimates with
//! replica-level standard errors. All of them fan replicas out over ChaCha
//! streams, so results are reproducible bit-for-bit regardless of worker
//! count or scheduling.

pub mod backtrack;
pub mod cutpoints;
pub mod fluctuation;
pub mod resistance;
pub mod tail;
pub mod trap;

use crate::walk::{RandomSeed, StepDistribution};

/// Running minimum of the walk's projection onto `ell` over `horizon`
/// steps. Starts (and is capped above) at zero; only the projection is
/// tracked, never the full position.
pub(crate) fn min_projection_walk(
    dist: &StepDistribution,
    ell: &[f64],
    horizon: usize,
    seed: &RandomSeed,
) -> f64 {
    let mut rng = seed.rng();
    let mut proj = 0.0f64;
    let mut min = 0.0f64;
    for _ in 0..horizon {
        let dir = dist.sample(&mut rng);
        proj += dir.proj(ell);
        if proj < min {
            min = proj;
        }
    }
    min
}
