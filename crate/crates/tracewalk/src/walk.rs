//! Lattice geometry, step distributions, and seeded sampling of
//! nearest-neighbour walks on the d-dimensional integer lattice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;
use thiserror::Error;

/// Largest supported lattice dimension. Adjacency masks are stored in a
/// `u64` (two bits per axis), which caps d at 32; real runs use d <= 3.
pub const MAX_DIM: usize = 32;

/// Tolerance accepted on the input weight sum before renormalization.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A lattice position with signed 64-bit coordinates. Inline storage up to
/// d = 4 keeps the hot hash-map lookups allocation-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point(pub SmallVec<[i64; 4]>);

impl Point {
    pub fn origin(d: usize) -> Self {
        Point(SmallVec::from_elem(0, d))
    }

    pub fn from_coords(coords: &[i64]) -> Self {
        Point(SmallVec::from_slice(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// Euclidean dot product with a real vector of the same dimension.
    pub fn dot(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(self.0.len(), v.len());
        self.0.iter().zip(v).map(|(&c, &x)| c as f64 * x).sum()
    }

    pub fn step_mut(&mut self, dir: Direction) {
        let axis = dir.axis();
        self.0[axis] += dir.sign();
    }

    pub fn stepped(&self, dir: Direction) -> Point {
        let mut p = self.clone();
        p.step_mut(dir);
        p
    }

    /// Coordinatewise maximum of two points.
    pub fn join_max(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(&a, &b)| a.max(b))
                .collect(),
        )
    }
}

/// One of the 2d signed unit vectors, encoded as an index:
/// `2j` is +e_{j+1}, `2j+1` is -e_{j+1}. This matches the weight order
/// (+e1, -e1, ..., +e_d, -e_d) used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Direction(pub u8);

impl Direction {
    pub fn axis(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn sign(self) -> i64 {
        if self.0 & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn opposite(self) -> Direction {
        Direction(self.0 ^ 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Signed projection of this unit step onto a real vector.
    pub fn proj(self, v: &[f64]) -> f64 {
        self.sign() as f64 * v[self.axis()]
    }
}

/// Which of the two walks a distribution drives. Layer 0 generates the
/// trace; layer 1 walks on it. Validation rules differ between the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Layer {
    Zero,
    One,
}

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("weight {value} at index {index} is negative")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, which deviates from 1 by more than 1e-9")]
    NotNormalized { sum: f64 },
    #[error("layer-1 weight at index {index} is zero; all layer-1 weights must be strictly positive")]
    ZeroWeightLayerOne { index: usize },
    #[error("layer-0 drift has first component {drift1} <= 0; the generating walk must drift in +e1")]
    NonPositiveFirstDriftLayerZero { drift1: f64 },
    #[error("need an even, nonzero number of weights (two per axis), got {len}")]
    BadLength { len: usize },
    #[error("dimension {d} exceeds the supported maximum of {MAX_DIM}")]
    DimensionTooLarge { d: usize },
}

/// A validated probability distribution on the 2d signed unit steps.
/// Weights are renormalized to sum to exactly 1.0 on acceptance.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StepDistribution {
    d: usize,
    weights: Vec<f64>,
    layer: Layer,
}

impl StepDistribution {
    /// Validate raw weights for the given layer.
    ///
    /// Layer-0 distributions must have a drift with strictly positive first
    /// coordinate (the trace must grow in +e1); layer-1 distributions must
    /// have every weight strictly positive (every trace edge is crossable
    /// in both directions).
    pub fn validate(weights: &[f64], layer: Layer) -> Result<Self, DistributionError> {
        if weights.is_empty() || weights.len() % 2 != 0 {
            return Err(DistributionError::BadLength {
                len: weights.len(),
            });
        }
        let d = weights.len() / 2;
        if d > MAX_DIM {
            return Err(DistributionError::DimensionTooLarge { d });
        }
        for (index, &value) in weights.iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(DistributionError::NegativeWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DistributionError::NotNormalized { sum });
        }
        if layer == Layer::One {
            if let Some(index) = weights.iter().position(|&w| w == 0.0) {
                return Err(DistributionError::ZeroWeightLayerOne { index });
            }
        }
        // Renormalize exactly: config files carry rounded decimal literals.
        let weights: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        let dist = StepDistribution { d, weights, layer };
        if layer == Layer::Zero {
            let drift1 = dist.drift()[0];
            if drift1 <= 0.0 {
                return Err(DistributionError::NonPositiveFirstDriftLayerZero { drift1 });
            }
        }
        Ok(dist)
    }

    /// Construct from weights already known to be normalized, skipping the
    /// layer rules. Used internally for derived distributions (e.g. the
    /// tilted walk, whose drift points against +e1 by construction).
    pub(crate) fn from_normalized(weights: Vec<f64>, layer: Layer) -> Self {
        debug_assert!(weights.len() % 2 == 0 && !weights.is_empty());
        let d = weights.len() / 2;
        StepDistribution { d, weights, layer }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, dir: Direction) -> f64 {
        self.weights[dir.index()]
    }

    /// Mean step: drift = sum_e e * p(e), componentwise.
    pub fn drift(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        for (k, &w) in self.weights.iter().enumerate() {
            let dir = Direction(k as u8);
            v[dir.axis()] += dir.sign() as f64 * w;
        }
        v
    }

    /// Draw one step by inverting the cumulative weights. 2d is small, so a
    /// linear scan beats a binary search here.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Direction {
        let mut u = uniform_f64(rng);
        let last = self.weights.len() - 1;
        for (k, &w) in self.weights.iter().enumerate() {
            u -= w;
            if u < 0.0 {
                return Direction(k as u8);
            }
        }
        Direction(last as u8) // float dust: clamp to the final step
    }
}

/// Uniform in [0, 1) from the top 53 bits of one u64 draw.
#[inline]
pub(crate) fn uniform_f64<R: Rng>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed plus stream id. ChaCha streams are independent by construction, so
/// one 64-bit seed reproducibly fans out to any number of replica streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RandomSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RandomSeed { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("positions {index} and {} differ by a non-unit step", .index + 1)]
    NonUnitIncrement { index: usize },
    #[error("a trajectory needs at least one position")]
    Empty,
}

/// A finite walk path: an origin start plus a sequence of unit steps.
/// Stored as one byte per step, so 10^8-step paths stay cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    d: usize,
    steps: Vec<u8>,
}

impl Trajectory {
    pub fn new(d: usize) -> Self {
        Trajectory { d, steps: Vec::new() }
    }

    /// Rebuild a trajectory from explicit positions, checking that every
    /// increment is a signed unit vector. The first position must be the
    /// origin (all walks here start there).
    pub fn from_positions(positions: &[Vec<i64>]) -> Result<Self, TrajectoryError> {
        let first = positions.first().ok_or(TrajectoryError::Empty)?;
        let d = first.len();
        let mut steps = Vec::with_capacity(positions.len().saturating_sub(1));
        for (index, pair) in positions.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if a.len() != d || b.len() != d {
                return Err(TrajectoryError::NonUnitIncrement { index });
            }
            let mut dir = None;
            let mut l1 = 0i64;
            for j in 0..d {
                let diff = b[j] - a[j];
                l1 += diff.abs();
                if diff == 1 {
                    dir = Some(Direction(2 * j as u8));
                } else if diff == -1 {
                    dir = Some(Direction(2 * j as u8 + 1));
                }
            }
            if l1 != 1 {
                return Err(TrajectoryError::NonUnitIncrement { index });
            }
            steps.push(dir.unwrap().0);
        }
        Ok(Trajectory { d, steps })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of steps; the trajectory visits `len() + 1` positions.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, dir: Direction) {
        self.steps.push(dir.0);
    }

    pub fn step(&self, i: usize) -> Direction {
        Direction(self.steps[i])
    }

    pub fn steps(&self) -> impl Iterator<Item = Direction> + '_ {
        self.steps.iter().map(|&b| Direction(b))
    }

    /// Iterate all visited positions, starting at the origin.
    pub fn positions(&self) -> Positions<'_> {
        Positions {
            traj: self,
            next: Some(Point::origin(self.d)),
            idx: 0,
        }
    }

    pub fn endpoint(&self) -> Point {
        let mut p = Point::origin(self.d);
        for dir in self.steps() {
            p.step_mut(dir);
        }
        p
    }
}

pub struct Positions<'a> {
    traj: &'a Trajectory,
    next: Option<Point>,
    idx: usize,
}

impl<'a> Iterator for Positions<'a> {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let cur = self.next.take()?;
        if self.idx < self.traj.len() {
            let mut nxt = cur.clone();
            nxt.step_mut(self.traj.step(self.idx));
            self.idx += 1;
            self.next = Some(nxt);
        }
        Some(cur)
    }
}

/// Sample an n-step walk from the origin with i.i.d. increments.
pub fn sample_walk(dist: &StepDistribution, n: usize, seed: &RandomSeed) -> Trajectory {
    let mut rng = seed.rng();
    let mut traj = Trajectory::new(dist.dim());
    for _ in 0..n {
        traj.push(dist.sample(&mut rng));
    }
    traj
}
