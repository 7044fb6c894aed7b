//! The second-layer walk: moves on the (lazily grown) trace of the first
//! walk, with transition probabilities proportional to its own step
//! weights restricted to the edges actually present.

use rayon::prelude::*;
use thiserror::Error;

use crate::stats::{dot, mean_stderr, norm};
use crate::trace::TraceGraph;
use crate::walk::{uniform_f64, Direction, Point, RandomSeed, StepDistribution, Trajectory};

/// Default cap on realized trace vertices. Sub-ballistic runs extend the
/// trace slowly, but a runaway configuration could otherwise swap-kill the
/// host; beyond the budget the run aborts with a clear error.
pub const DEFAULT_VERTEX_BUDGET: usize = 100_000_000;

/// Minimum number of generator steps added per lazy extension. Amortizes
/// extension cost: the walker touches the frontier region rarely compared
/// to how far one extension pushes it away.
const EXTENSION_CHUNK: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum NestedError {
    #[error("position is not a vertex of the trace")]
    UnknownVertex,
    #[error("position is the unextended frontier; its adjacency is incomplete")]
    FrontierNotExtended,
    #[error("trace grew past the vertex budget of {budget} (at layer-1 step {step})")]
    VertexBudgetExceeded { budget: usize, step: usize },
}

/// Transition distribution of the layer-1 walk at vertex x: each available
/// direction e gets weight p1(e) normalized over the available set. On a
/// generator-backed graph the frontier vertex is rejected (its adjacency
/// is incomplete until the trace is extended past it).
pub fn transition_probabilities(
    graph: &TraceGraph,
    dist1: &StepDistribution,
    x: &Point,
) -> Result<Vec<(Direction, f64)>, NestedError> {
    let nbrs = graph.neighbors(x).map_err(|_| NestedError::UnknownVertex)?;
    if graph.has_generator() && graph.frontier() == Some(x) {
        return Err(NestedError::FrontierNotExtended);
    }
    let total: f64 = nbrs.iter().map(|dir| dist1.weight(dir)).sum();
    Ok(nbrs
        .iter()
        .map(|dir| (dir, dist1.weight(dir) / total))
        .collect())
}

fn l1_distance(a: &Point, b: &Point) -> u64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| x.abs_diff(*y))
        .sum()
}

/// One full simulation: result of driving the layer-1 walk for n steps.
#[derive(Debug)]
pub struct NestedWalkRun {
    /// The layer-1 path (starts at the origin).
    pub trajectory: Trajectory,
    /// Vertices realized in the trace by the end of the run.
    pub trace_vertices: usize,
    /// Generator steps consumed by the trace.
    pub trace_steps: usize,
    pub seed: RandomSeed,
}

/// Core driver. Streams: the layer-0 generator uses stream `2 * seed.stream`,
/// the layer-1 sampler uses `2 * seed.stream + 1`, so replica streams never
/// collide. The trace is extended whenever the walker comes within 2d
/// lattice steps of the frontier, by max(10^4, 2 * clearance deficit)
/// generator steps, so the walker never samples incomplete adjacency.
fn drive<F: FnMut(usize, &Point)>(
    dist0: &StepDistribution,
    dist1: &StepDistribution,
    n: usize,
    seed: &RandomSeed,
    vertex_budget: usize,
    mut observe: F,
) -> Result<NestedWalkRun, NestedError> {
    let d = dist0.dim();
    assert_eq!(d, dist1.dim(), "layer dimensions must agree");
    let seed0 = RandomSeed::new(seed.seed, 2 * seed.stream);
    let seed1 = RandomSeed::new(seed.seed, 2 * seed.stream + 1);
    let mut trace = TraceGraph::generate(dist0, EXTENSION_CHUNK.max(1), &seed0);
    if trace.vertex_count() > vertex_budget {
        return Err(NestedError::VertexBudgetExceeded {
            budget: vertex_budget,
            step: 0,
        });
    }
    let mut rng = seed1.rng();
    let margin = (2 * d) as u64;
    let mut x = Point::origin(d);
    let mut traj = Trajectory::new(d);

    for step in 0..n {
        // keep the walker clear of the incomplete frontier
        loop {
            let dist = l1_distance(&x, trace.frontier().expect("generated trace"));
            if dist > margin {
                break;
            }
            let deficit = (margin - dist + 1) as usize;
            trace
                .extend(EXTENSION_CHUNK.max(2 * deficit))
                .expect("generator state present");
            if trace.vertex_count() > vertex_budget {
                return Err(NestedError::VertexBudgetExceeded {
                    budget: vertex_budget,
                    step,
                });
            }
        }

        let mask = trace.mask(&x).expect("walker stays on trace vertices");
        debug_assert!(mask != 0, "trace vertices always carry an edge");
        let mut total = 0.0;
        let mut k = 0u8;
        let two_d = (2 * d) as u8;
        while k < two_d {
            if mask & (1u64 << k) != 0 {
                total += dist1.weight(Direction(k));
            }
            k += 1;
        }
        let mut u = uniform_f64(&mut rng) * total;
        let mut chosen = None;
        k = 0;
        while k < two_d {
            if mask & (1u64 << k) != 0 {
                u -= dist1.weight(Direction(k));
                if u < 0.0 {
                    chosen = Some(Direction(k));
                    break;
                }
            }
            k += 1;
        }
        // float dust: fall back to the last available direction
        let dir = chosen.unwrap_or_else(|| {
            (0..two_d)
                .rev()
                .map(Direction)
                .find(|dd| mask & (1u64 << dd.index()) != 0)
                .expect("nonempty mask")
        });
        debug_assert!(
            mask & (1u64 << dir.index()) != 0,
            "layer-1 step must traverse an existing trace edge"
        );
        x.step_mut(dir);
        traj.push(dir);
        observe(step + 1, &x);
    }

    Ok(NestedWalkRun {
        trajectory: traj,
        trace_vertices: trace.vertex_count(),
        trace_steps: trace.trajectory().map(|t| t.len()).unwrap_or(0),
        seed: *seed,
    })
}

/// Run the layer-1 walk for n steps from the origin.
pub fn run_nested_walk(
    dist0: &StepDistribution,
    dist1: &StepDistribution,
    n: usize,
    seed: &RandomSeed,
    vertex_budget: usize,
) -> Result<NestedWalkRun, NestedError> {
    drive(dist0, dist1, n, seed, vertex_budget, |_, _| {})
}

/// Positions of the layer-1 walk at the given (strictly increasing) step
/// counts, from one run. Cheaper than storing the whole path when only a
/// few horizons matter.
pub fn sample_positions(
    dist0: &StepDistribution,
    dist1: &StepDistribution,
    checkpoints: &[usize],
    seed: &RandomSeed,
    vertex_budget: usize,
) -> Result<Vec<Point>, NestedError> {
    assert!(
        checkpoints.windows(2).all(|w| w[0] < w[1]),
        "checkpoints must be strictly increasing"
    );
    let d = dist0.dim();
    let mut out: Vec<Point> = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    while next < checkpoints.len() && checkpoints[next] == 0 {
        out.push(Point::origin(d));
        next += 1;
    }
    let horizon = checkpoints.last().copied().unwrap_or(0);
    let mut targets = checkpoints[next..].iter().copied();
    let mut target = targets.next();
    drive(dist0, dist1, horizon, seed, vertex_budget, |step, x| {
        if Some(step) == target {
            out.push(x.clone());
            target = targets.next();
        }
    })?;
    Ok(out)
}

/// Monte Carlo velocity estimate: mean over replicas of endpoint/n, with
/// componentwise standard errors and the decomposition along/against the
/// layer-0 drift direction.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VelocityEstimate {
    pub vhat: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Component of vhat along the unit layer-0 drift, with its own
    /// replica-level standard error.
    pub parallel_component: f64,
    pub parallel_stderr: f64,
    /// Euclidean norm of the mean orthogonal part, with the root-sum-square
    /// of the componentwise standard errors.
    pub orthogonal_norm: f64,
    pub orthogonal_stderr: f64,
    pub replicas: usize,
    pub n: usize,
}

/// Estimate the layer-1 velocity at horizon n over independent replicas.
/// Replica r uses seed streams (2r, 2r+1); results are a deterministic
/// fold over replica index regardless of worker scheduling.
pub fn estimate_velocity(
    dist0: &StepDistribution,
    dist1: &StepDistribution,
    n: usize,
    replicas: usize,
    seed: u64,
    vertex_budget: usize,
) -> Result<VelocityEstimate, NestedError> {
    assert!(replicas >= 2, "standard errors need at least two replicas");
    assert!(n >= 1, "velocity needs at least one step");
    let d = dist0.dim();
    let endpoints: Vec<Point> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            sample_positions(
                dist0,
                dist1,
                &[n],
                &RandomSeed::new(seed, r as u64),
                vertex_budget,
            )
            .map(|mut v| v.pop().expect("one checkpoint requested"))
        })
        .collect::<Result<_, _>>()?;

    let rates: Vec<Vec<f64>> = endpoints
        .iter()
        .map(|p| p.coords().iter().map(|&c| c as f64 / n as f64).collect())
        .collect();

    let mut vhat = vec![0.0; d];
    let mut stderr = vec![0.0; d];
    for j in 0..d {
        let comp: Vec<f64> = rates.iter().map(|v| v[j]).collect();
        let (m, se) = mean_stderr(&comp);
        vhat[j] = m;
        stderr[j] = se;
    }

    let delta0 = dist0.drift();
    let dnorm = norm(&delta0);
    assert!(dnorm > 0.0, "layer-0 drift is nonzero by validation");
    let u0: Vec<f64> = delta0.iter().map(|x| x / dnorm).collect();

    let pars: Vec<f64> = rates.iter().map(|v| dot(v, &u0)).collect();
    let (parallel_component, parallel_stderr) = mean_stderr(&pars);

    let mut orth_mean = vec![0.0; d];
    let mut orth_se2 = 0.0;
    for j in 0..d {
        let comp: Vec<f64> = rates
            .iter()
            .map(|v| v[j] - dot(v, &u0) * u0[j])
            .collect();
        let (m, se) = mean_stderr(&comp);
        orth_mean[j] = m;
        orth_se2 += se * se;
    }

    Ok(VelocityEstimate {
        vhat,
        stderr,
        parallel_component,
        parallel_stderr,
        orthogonal_norm: norm(&orth_mean),
        orthogonal_stderr: orth_se2.sqrt(),
        replicas,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::edge_conductance;
    use crate::walk::{Layer, Trajectory};

    fn dist(weights: &[f64], layer: Layer) -> StepDistribution {
        StepDistribution::validate(weights, layer).unwrap()
    }

    fn frozen(positions: &[Vec<i64>]) -> TraceGraph {
        TraceGraph::from_trajectory(Trajectory::from_positions(positions).unwrap())
    }

    #[test]
    fn transition_probabilities_split_residual_weight() {
        let g = frozen(&[vec![0, 0], vec![1, 0], vec![1, 1], vec![1, 0]]);
        let d1 = dist(&[0.4, 0.2, 0.2, 0.2], Layer::One);
        let probs = transition_probabilities(&g, &d1, &Point::from_coords(&[1, 0])).unwrap();
        // available: -e1 and +e2, both weight 0.2
        assert_eq!(probs.len(), 2);
        for (_, p) in &probs {
            assert!((p - 0.5).abs() < 1e-15);
        }
        let total: f64 = probs.iter().map(|(_, p)| p).sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn dead_end_forces_the_back_step() {
        let g = frozen(&[vec![0, 0], vec![1, 0], vec![1, 1], vec![1, 0]]);
        let d1 = dist(&[0.4, 0.2, 0.2, 0.2], Layer::One);
        let probs = transition_probabilities(&g, &d1, &Point::from_coords(&[1, 1])).unwrap();
        assert_eq!(probs, vec![(Direction(3), 1.0)]);
    }

    #[test]
    fn interval_interior_two_thirds_one_third() {
        let g = frozen(&[vec![0], vec![1], vec![2], vec![3]]);
        let d1 = dist(&[2.0 / 3.0, 1.0 / 3.0], Layer::One);
        let probs = transition_probabilities(&g, &d1, &Point::from_coords(&[1])).unwrap();
        assert!((probs[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((probs[1].1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_vertex_and_frontier_rejections() {
        let g = frozen(&[vec![0], vec![1]]);
        let d1 = dist(&[0.5, 0.5], Layer::One);
        assert_eq!(
            transition_probabilities(&g, &d1, &Point::from_coords(&[9])).unwrap_err(),
            NestedError::UnknownVertex
        );
        // frozen graphs may be queried at their final point...
        assert!(transition_probabilities(&g, &d1, &Point::from_coords(&[1])).is_ok());
        // ...generator-backed graphs may not
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let live = TraceGraph::generate(&d0, 100, &RandomSeed::new(4, 0));
        let frontier = live.frontier().unwrap().clone();
        assert_eq!(
            transition_probabilities(&live, &d1, &frontier).unwrap_err(),
            NestedError::FrontierNotExtended
        );
    }

    #[test]
    fn zero_step_run_is_the_origin() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let d1 = dist(&[0.5, 0.5], Layer::One);
        let run =
            run_nested_walk(&d0, &d1, 0, &RandomSeed::new(1, 0), DEFAULT_VERTEX_BUDGET).unwrap();
        assert_eq!(run.trajectory.len(), 0);
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let d0 = dist(&[0.4, 0.2, 0.2, 0.2], Layer::Zero);
        let d1 = dist(&[0.3, 0.3, 0.2, 0.2], Layer::One);
        let a = run_nested_walk(&d0, &d1, 2000, &RandomSeed::new(8, 5), DEFAULT_VERTEX_BUDGET)
            .unwrap();
        let b = run_nested_walk(&d0, &d1, 2000, &RandomSeed::new(8, 5), DEFAULT_VERTEX_BUDGET)
            .unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        let c = run_nested_walk(&d0, &d1, 2000, &RandomSeed::new(8, 6), DEFAULT_VERTEX_BUDGET)
            .unwrap();
        assert_ne!(a.trajectory, c.trajectory);
    }

    #[test]
    fn balanced_walker_stays_on_the_realized_interval() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let d1 = dist(&[0.5, 0.5], Layer::One);
        let run = run_nested_walk(&d0, &d1, 10_000, &RandomSeed::new(2, 0), DEFAULT_VERTEX_BUDGET)
            .unwrap();
        // d=1 trace is an interval containing the origin; the walker can
        // never leave the vertex set, so its range is within the interval
        let mut x = 0i64;
        let mut min = 0i64;
        let mut max = 0i64;
        for dir in run.trajectory.steps() {
            x += dir.sign();
            min = min.min(x);
            max = max.max(x);
        }
        assert!((max - min + 1) as usize <= run.trace_vertices);
    }

    #[test]
    fn every_step_crosses_a_trace_edge() {
        // replay the run against an independently rebuilt trace: each step
        // must sit in the adjacency mask of its source vertex
        let d0 = dist(&[0.5, 0.2, 0.15, 0.15], Layer::Zero);
        let d1 = dist(&[0.1, 0.4, 0.25, 0.25], Layer::One);
        let seed = RandomSeed::new(33, 7);
        let run = run_nested_walk(&d0, &d1, 5000, &seed, DEFAULT_VERTEX_BUDGET).unwrap();
        let trace = TraceGraph::generate(
            &d0,
            run.trace_steps,
            &RandomSeed::new(seed.seed, 2 * seed.stream),
        );
        let mut x = Point::origin(2);
        for dir in run.trajectory.steps() {
            let mask = trace.mask(&x).expect("visited vertex exists in trace");
            assert!(mask & (1u64 << dir.index()) != 0, "illegal step {dir:?}");
            x.step_mut(dir);
        }
    }

    #[test]
    fn transition_law_matches_conductance_ratios() {
        // weight-form probabilities equal the ratios of the literal
        // symmetric edge conductances at every vertex of a sampled trace
        let d0 = dist(&[0.5, 0.2, 0.15, 0.15], Layer::Zero);
        let d1 = dist(&[0.3, 0.2, 0.25, 0.25], Layer::One);
        let g = TraceGraph::generate(&d0, 2000, &RandomSeed::new(12, 0));
        for (x, _) in g.iter() {
            if g.has_generator() && g.frontier() == Some(x) {
                continue;
            }
            let probs = transition_probabilities(&g, &d1, x).unwrap();
            let cond_total: f64 = g
                .neighbors(x)
                .unwrap()
                .iter()
                .map(|dir| edge_conductance(&d1, x, &x.stepped(dir)).unwrap())
                .sum();
            for (dir, p) in probs {
                let q = edge_conductance(&d1, x, &x.stepped(dir)).unwrap() / cond_total;
                assert!((p - q).abs() < 1e-12, "at {x:?} dir {dir:?}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn sample_positions_match_full_run() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let d1 = dist(&[0.6, 0.4], Layer::One);
        let seed = RandomSeed::new(17, 2);
        let run = run_nested_walk(&d0, &d1, 300, &seed, DEFAULT_VERTEX_BUDGET).unwrap();
        let pts = sample_positions(&d0, &d1, &[0, 100, 300], &seed, DEFAULT_VERTEX_BUDGET).unwrap();
        let full: Vec<Point> = run.trajectory.positions().collect();
        assert_eq!(pts[0], full[0]);
        assert_eq!(pts[1], full[100]);
        assert_eq!(pts[2], full[300]);
    }

    #[test]
    fn tiny_vertex_budget_trips() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let d1 = dist(&[0.5, 0.5], Layer::One);
        let err = run_nested_walk(&d0, &d1, 100, &RandomSeed::new(1, 0), 10).unwrap_err();
        assert!(matches!(err, NestedError::VertexBudgetExceeded { .. }));
    }

    #[test]
    fn velocity_estimator_reports_decomposition() {
        let d0 = dist(&[0.6, 0.1, 0.15, 0.15], Layer::Zero);
        let d1 = dist(&[0.4, 0.1, 0.25, 0.25], Layer::One);
        let v = estimate_velocity(&d0, &d1, 2000, 8, 99, DEFAULT_VERTEX_BUDGET).unwrap();
        assert_eq!(v.replicas, 8);
        assert!(v.stderr.iter().all(|&s| s >= 0.0));
        assert!(v.parallel_stderr >= 0.0 && v.orthogonal_stderr >= 0.0);
        // deterministic under rerun
        let w = estimate_velocity(&d0, &d1, 2000, 8, 99, DEFAULT_VERTEX_BUDGET).unwrap();
        assert_eq!(v, w);
    }
}
