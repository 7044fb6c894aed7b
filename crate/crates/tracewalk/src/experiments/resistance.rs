//! Resistance growth along the generating walk. Summing the reciprocal
//! conductances of the edges the walk traverses gives an upper bound on
//! the effective resistance from the origin through the trace: bounded
//! partial sums are evidence of transience of the second-layer walk,
//! divergence (in particular f64 overflow) is evidence of recurrence.

use serde::Serialize;

use crate::analysis::{conductance_direction, step_conductance};
use crate::walk::{Point, RandomSeed, StepDistribution};

/// Partial sums larger than this are reported as overflowed: the series
/// has left the regime where a ratio test says anything useful.
pub const OVERFLOW_LIMIT: f64 = 1e300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResistanceSeries {
    pub checkpoints: Vec<usize>,
    /// Partial sum after the corresponding number of steps; +infinity for
    /// checkpoints past the overflow point.
    pub sums: Vec<f64>,
    /// Step count at which the running sum first exceeded the overflow
    /// limit, when it did.
    pub overflowed_at: Option<usize>,
    pub log_beta: f64,
}

impl ResistanceSeries {
    /// Ratio sums[j] / sums[i] for checkpoint indices i < j; +infinity
    /// when the numerator overflowed.
    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        assert!(i < j && j < self.sums.len());
        self.sums[j] / self.sums[i]
    }
}

/// Accumulate edge resistances 1/c(X_m, X_{m+1}) along one generating-walk
/// path, recording the partial sum at each checkpoint (a strictly
/// increasing list of step counts).
pub fn resistance_series(
    dist0: &StepDistribution,
    dist1: &StepDistribution,
    checkpoints: &[usize],
    seed: &RandomSeed,
) -> ResistanceSeries {
    assert!(
        !checkpoints.is_empty() && checkpoints.windows(2).all(|w| w[0] < w[1]),
        "checkpoints must be nonempty and strictly increasing"
    );
    let cd = conductance_direction(dist1);
    let horizon = *checkpoints.last().unwrap();
    let mut rng = seed.rng();
    let mut x = Point::origin(dist0.dim());
    let mut sum = 0.0f64;
    let mut sums = Vec::with_capacity(checkpoints.len());
    let mut overflowed_at = None;
    let mut next = 0usize;
    if checkpoints[0] == 0 {
        // a zero checkpoint means "before any step"
        sums.push(0.0);
        next = 1;
    }

    for step in 0..horizon {
        if overflowed_at.is_none() {
            let dir = dist0.sample(&mut rng);
            sum += 1.0 / step_conductance(dist1, &cd, &x, dir);
            x.step_mut(dir);
            if !(sum <= OVERFLOW_LIMIT) {
                overflowed_at = Some(step + 1);
                sum = f64::INFINITY;
            }
        }
        if step + 1 == checkpoints[next] {
            sums.push(sum);
            next += 1;
        }
    }

    ResistanceSeries {
        checkpoints: checkpoints.to_vec(),
        sums,
        overflowed_at,
        log_beta: cd.log_beta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::Layer;

    fn dist(weights: &[f64], layer: Layer) -> StepDistribution {
        StepDistribution::validate(weights, layer).unwrap()
    }

    #[test]
    fn balanced_conductances_sum_exactly() {
        // beta = 1 and p1 = (1/2, 1/2): every edge has resistance 2, so
        // the partial sum after N steps is exactly 2N whatever the path
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let d1 = dist(&[0.5, 0.5], Layer::One);
        let series = resistance_series(&d0, &d1, &[100, 10_000], &RandomSeed::new(3, 0));
        assert_eq!(series.sums, vec![200.0, 20_000.0]);
        assert_eq!(series.overflowed_at, None);
    }

    #[test]
    fn transient_pair_has_flat_tail() {
        // drift carries x . ell -> +inf, so resistances decay like
        // beta^(-x . ell) and the series converges
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let d1 = dist(&[2.0 / 3.0, 1.0 / 3.0], Layer::One);
        let series = resistance_series(&d0, &d1, &[10_000, 20_000], &RandomSeed::new(9, 0));
        assert_eq!(series.overflowed_at, None);
        let ratio = series.ratio(0, 1);
        assert!(ratio < 1.01, "tail still growing: ratio {ratio}");
        assert!(ratio >= 1.0);
    }

    #[test]
    fn recurrent_pair_overflows_quickly() {
        // ell = -e1 while the walk drifts +e1: resistances grow like
        // 2^(0.4 m) and pass 1e300 near m = 2500
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let d1 = dist(&[1.0 / 3.0, 2.0 / 3.0], Layer::One);
        let series = resistance_series(&d0, &d1, &[1_000, 5_000], &RandomSeed::new(9, 0));
        let at = series.overflowed_at.expect("sum must overflow");
        assert!((2_000..3_200).contains(&at), "overflow at {at}");
        assert!(series.sums[0].is_finite());
        assert!(series.sums[1].is_infinite());
    }

    #[test]
    fn series_is_deterministic() {
        let d0 = dist(&[0.5, 0.2, 0.15, 0.15], Layer::Zero);
        let d1 = dist(&[0.1, 0.4, 0.25, 0.25], Layer::One);
        let a = resistance_series(&d0, &d1, &[500, 1_000], &RandomSeed::new(12, 3));
        let b = resistance_series(&d0, &d1, &[500, 1_000], &RandomSeed::new(12, 3));
        assert_eq!(a, b);
    }
}
