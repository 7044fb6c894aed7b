//! Potential profile along the cut points of a trace. Every cut point is
//! a pinch the second-layer walk must pass through; the conductance
//! potential -log(beta) * (x . ell) evaluated there shows how steeply the
//! environment funnels the walk outward. A roughly linear profile in cut
//! rank (potential dropping by log(beta) * drift-projection * index gap)
//! is the signature of the renewal structure the scaling analysis rests on.

use serde::Serialize;
use thiserror::Error;

use crate::analysis::conductance_direction;
use crate::trace::{TraceError, TraceGraph};
use crate::walk::StepDistribution;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("balanced conductances have no potential direction (log beta = 0)")]
    Balanced,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Potential at one cut point, in trajectory order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutPotential {
    /// First trajectory index at which the generating walk sat on this
    /// cut point.
    pub trajectory_index: u64,
    /// Projection of the cut point onto ell.
    pub projection: f64,
    /// -log(beta) * projection.
    pub potential: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSeries {
    pub log_beta: f64,
    pub values: Vec<CutPotential>,
}

impl PotentialSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mean gap between consecutive cut-point trajectory indices.
    pub fn mean_index_gap(&self) -> Option<f64> {
        let n = self.values.len();
        (n >= 2).then(|| {
            let first = self.values[0].trajectory_index as f64;
            let last = self.values[n - 1].trajectory_index as f64;
            (last - first) / (n - 1) as f64
        })
    }

    /// Mean drop in potential from one cut point to the next.
    pub fn mean_potential_gap(&self) -> Option<f64> {
        let n = self.values.len();
        (n >= 2).then(|| (self.values[n - 1].potential - self.values[0].potential) / (n - 1) as f64)
    }
}

/// Evaluate the conductance potential at every cut point of the trace.
/// The graph must carry its generating trajectory (loaded dumps do not),
/// and the layer-1 conductances must actually have a direction.
pub fn potential_series(
    graph: &TraceGraph,
    dist1: &StepDistribution,
) -> Result<PotentialSeries, PotentialError> {
    let cd = conductance_direction(dist1);
    if cd.is_balanced() {
        return Err(PotentialError::Balanced);
    }
    let cuts = graph.cut_points()?;
    let values = cuts
        .points
        .iter()
        .map(|c| {
            let projection = c.position.dot(&cd.ell);
            CutPotential {
                trajectory_index: c.traj_index,
                projection,
                potential: -cd.log_beta * projection,
            }
        })
        .collect();
    Ok(PotentialSeries {
        log_beta: cd.log_beta,
        values,
    })
}
