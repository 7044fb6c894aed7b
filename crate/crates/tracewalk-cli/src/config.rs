//! Configuration file handling. A run is described by one JSON document:
//!
//! ```json
//! {
//!   "d": 2,
//!   "layer0": { "family": { "gamma": 4.0, "k": 1 } },
//!   "layer1": { "weights": [0.625, 0.125, 0.125, 0.125] },
//!   "seed": 7,
//!   "params": { "n": 100000, "replicas": 32 }
//! }
//! ```
//!
//! Each layer takes exactly one of `weights` (the 2d step weights in the
//! order +e1, -e1, +e2, -e2, ...) or `family` (the one-parameter tilt:
//! weight proportional to gamma on the forward steps of the first k axes
//! and to 1 elsewhere). Unknown keys are rejected so typos fail loudly.

use serde::{Deserialize, Serialize};
use tracewalk::walk::{Layer, StepDistribution};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub gamma: f64,
    #[serde(default = "default_family_k")]
    pub k: usize,
}

fn default_family_k() -> usize {
    1
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
}

/// Experiment knobs. All optional; each experiment documents its defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Step horizon (0 or absent = automatic where the experiment has one).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    /// Backtrack depth grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<f64>>,
    /// Trap height grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heights: Option<Vec<u64>>,
    /// Trap cylinder width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<u64>,
    /// Hill order-statistic count (0 or absent = ceil(sqrt(replicas))).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hill_k: Option<usize>,
    /// Resistance partial-sum checkpoints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    /// Fluctuation horizon grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    /// Sweep grid of layer-1 family gammas.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1_grid: Option<Vec<f64>>,
    /// Cap on realized trace vertices per run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertex_budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub d: usize,
    pub layer0: LayerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer1: Option<LayerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: Params,
}

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!(
                "config parse error at line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    pub fn layer0_dist(&self) -> Result<StepDistribution, CliError> {
        self.layer0.resolve("layer0", self.d, Layer::Zero)
    }

    pub fn layer1_dist(&self) -> Result<StepDistribution, CliError> {
        self.layer1
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a layer1 section".into()))?
            .resolve("layer1", self.d, Layer::One)
    }
}

/// Expand the one-parameter family: weight gamma on the forward step of
/// each of the first k axes, weight 1 elsewhere, normalized by
/// 2d + k(gamma - 1).
pub fn family_weights(d: usize, gamma: f64, k: usize) -> Result<Vec<f64>, String> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(format!("family gamma must be positive and finite, got {gamma}"));
    }
    if k < 1 || k > d {
        return Err(format!("family k must lie in 1..={d}, got {k}"));
    }
    let norm = 2.0 * d as f64 + k as f64 * (gamma - 1.0);
    let mut w = vec![1.0 / norm; 2 * d];
    for axis in 0..k {
        w[2 * axis] = gamma / norm;
    }
    Ok(w)
}

impl LayerSpec {
    pub fn resolve(&self, label: &str, d: usize, layer: Layer) -> Result<StepDistribution, CliError> {
        let weights = match (&self.weights, &self.family) {
            (Some(w), None) => w.clone(),
            (None, Some(f)) => family_weights(d, f.gamma, f.k)
                .map_err(|e| CliError::Config(format!("{label}: {e}")))?,
            _ => {
                return Err(CliError::Config(format!(
                    "{label}: give exactly one of `weights` or `family`"
                )))
            }
        };
        if weights.len() != 2 * d {
            return Err(CliError::Config(format!(
                "{label}: expected {} weights for d = {d}, got {}",
                2 * d,
                weights.len()
            )));
        }
        StepDistribution::validate(&weights, layer)
            .map_err(|e| CliError::Config(format!("{label}: {e}")))
    }
}
