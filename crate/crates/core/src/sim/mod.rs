//! Discrete-event gossip simulation over one node per user.

mod convergence;
mod engine;
mod event;
mod report;

pub use convergence::ConvergenceTracker;
pub use engine::{run_simulation, LatencyModel};
pub(crate) use engine::family_metrics;
pub use event::{EventKind, EventQueue, SimEvent};
pub use report::{cdf_csv, NodeReport, RunReport, RunStatus, Summary, TraceEntry, TrajectoryRow};

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregatorKind;
use crate::error::{Error, Result};
use crate::eval::DEFAULT_KS;
use crate::peersampling::SamplerKind;

/// Where exploration peers come from when a view is refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exploration {
    /// Uniformly from the whole network.
    Global,
    /// From the union of the current peers' views, topped up globally.
    NeighborViews,
}

impl std::str::FromStr for Exploration {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "global" => Ok(Exploration::Global),
            "neighbor-views" => Ok(Exploration::NeighborViews),
            other => Err(format!("unknown exploration source `{other}`")),
        }
    }
}

/// Protocol and timing parameters. Times are simulated seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub aggregator: AggregatorKind,
    pub sampler: SamplerKind,
    pub alpha: f64,
    pub view_size: usize,
    pub push_period: f64,
    /// Each push interval is `push_period * U(1 - jitter, 1 + jitter)`.
    pub push_jitter: f64,
    pub peer_sampling_period: f64,
    pub exploration: Exploration,
    pub checkpoint_period: f64,
    pub max_sim_time: f64,
    pub stop_on_convergence: bool,
    pub convergence_window: usize,
    pub convergence_delta: f64,
    /// Training passes after each aggregation.
    pub local_epochs: usize,
    /// Cutoff of the metric used for weighting and convergence.
    pub weighting_k: usize,
    pub ks: Vec<usize>,
    pub reptile_eps: f64,
    pub reptile_finetune_epochs: usize,
    pub latency: LatencyModel,
    /// Sends the user embedding along with the shared parameters and merges
    /// it with the same weights.
    pub share_user_embedding: bool,
    /// Records every delivered model in the report.
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            aggregator: AggregatorKind::Performance,
            sampler: SamplerKind::Personalized,
            alpha: 0.4,
            view_size: 3,
            push_period: 60.0,
            push_jitter: 0.1,
            peer_sampling_period: 300.0,
            exploration: Exploration::Global,
            checkpoint_period: 600.0,
            max_sim_time: 24_000.0,
            stop_on_convergence: true,
            convergence_window: 10,
            convergence_delta: 0.001,
            local_epochs: 1,
            weighting_k: 10,
            ks: DEFAULT_KS.to_vec(),
            reptile_eps: 0.5,
            reptile_finetune_epochs: 5,
            latency: LatencyModel::default(),
            share_user_embedding: false,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("push_period", self.push_period),
            ("peer_sampling_period", self.peer_sampling_period),
            ("checkpoint_period", self.checkpoint_period),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.max_sim_time >= 0.0 && self.max_sim_time.is_finite()) {
            return Err(Error::Config(format!("max_sim_time must be non-negative, got {}", self.max_sim_time)));
        }
        if !(0.0..1.0).contains(&self.push_jitter) {
            return Err(Error::Config(format!("push_jitter {} outside [0, 1)", self.push_jitter)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.reptile_eps) {
            return Err(Error::Config(format!("reptile_eps {} outside [0, 1]", self.reptile_eps)));
        }
        if self.ks.is_empty() || self.ks.contains(&0) || self.weighting_k == 0 {
            return Err(Error::Config("metric cutoffs must be positive".into()));
        }
        if self.convergence_window == 0 {
            return Err(Error::Config("convergence_window must be positive".into()));
        }
        self.latency.validate()
    }
}
