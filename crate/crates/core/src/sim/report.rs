//! Run results and their on-disk form.
//!
//! Everything written by [`RunReport::write`] is deterministic given the
//! inputs and seed, except `wallclock.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{cdf_and_percentiles, mean, Cdf, NodeMetrics};
use crate::model::ModelFamily;
use crate::params::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    /// Every node met the convergence rule.
    Converged,
    /// The simulated time budget ran out.
    Horizon,
    /// The event queue drained.
    Exhausted,
}

/// One delivered model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub sent_at: f64,
    pub delivered_at: f64,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub checkpoint: u64,
    pub time: f64,
    pub node: NodeId,
    pub rounds: u64,
    pub weighting_metric: f64,
    /// One value per entry of [`RunReport::metric_names`].
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeReport {
    pub node: NodeId,
    pub user: u32,
    pub train: usize,
    pub test: usize,
    pub metrics: NodeMetrics,
    pub weighting_metric: f64,
    pub rounds: u64,
    pub received: u64,
    /// Round count when the node converged.
    pub converged_at: Option<u64>,
    pub messages_sent: u64,
    pub bytes_sent: u64,
    pub sgd_updates: u64,
    pub skipped_negatives: u64,
    /// Parameters merged plus embedding coordinates touched while scoring.
    pub agg_work: u64,
    pub degenerate_merges: u64,
    pub sgd_seconds: f64,
    pub agg_seconds: f64,
}

impl NodeReport {
    /// Rounds to convergence, or the rounds completed when it never
    /// converged.
    pub fn rounds_to_convergence(&self) -> u64 {
        self.converged_at.unwrap_or(self.rounds)
    }

    pub fn compute_seconds(&self) -> f64 {
        self.sgd_seconds + self.agg_seconds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub status: RunStatus,
    pub family: ModelFamily,
    pub ks: Vec<usize>,
    pub metric_names: Vec<String>,
    pub nodes: Vec<NodeReport>,
    pub trajectory: Vec<TrajectoryRow>,
    pub end_time: f64,
    pub checkpoints: u64,
    pub delivered: u64,
    pub view_updates: u64,
    pub trace: Option<Vec<TraceEntry>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub status: RunStatus,
    pub family: ModelFamily,
    pub nodes: usize,
    pub end_time: f64,
    pub checkpoints: u64,
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub bytes_sent: u64,
    pub view_updates: u64,
    pub converged_nodes: usize,
    pub mean_rounds_to_convergence: f64,
    pub means: BTreeMap<String, f64>,
    pub percentiles: BTreeMap<String, Vec<(f64, f64)>>,
}

impl RunReport {
    /// Final per-node values of a metric such as `hr@10`.
    pub fn values(&self, metric: &str) -> Option<Vec<f64>> {
        self.nodes.iter().map(|n| n.metrics.get(metric)).collect()
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.values(metric).map(|v| mean(&v))
    }

    pub fn cdf(&self, metric: &str) -> Option<Cdf> {
        self.values(metric).map(|v| cdf_and_percentiles(&v))
    }

    pub fn converged_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.converged_at.is_some()).count()
    }

    /// Mean over nodes, counting unconverged nodes at their final round.
    pub fn mean_rounds_to_convergence(&self) -> f64 {
        let r: Vec<f64> = self.nodes.iter().map(|n| n.rounds_to_convergence() as f64).collect();
        mean(&r)
    }

    pub fn mean_compute_seconds(&self) -> f64 {
        let s: Vec<f64> = self.nodes.iter().map(NodeReport::compute_seconds).collect();
        mean(&s)
    }

    pub fn messages_sent(&self) -> u64 {
        self.nodes.iter().map(|n| n.messages_sent).sum()
    }

    pub fn bytes_sent(&self) -> u64 {
        self.nodes.iter().map(|n| n.bytes_sent).sum()
    }

    pub fn summary(&self) -> Summary {
        let mut means = BTreeMap::new();
        let mut percentiles = BTreeMap::new();
        for name in &self.metric_names {
            let cdf = self.cdf(name).expect("reported metric");
            means.insert(name.clone(), self.mean(name).expect("reported metric"));
            percentiles.insert(name.clone(), cdf.percentiles);
        }
        Summary {
            status: self.status,
            family: self.family,
            nodes: self.nodes.len(),
            end_time: self.end_time,
            checkpoints: self.checkpoints,
            messages_sent: self.messages_sent(),
            messages_delivered: self.delivered,
            bytes_sent: self.bytes_sent(),
            view_updates: self.view_updates,
            converged_nodes: self.converged_nodes(),
            mean_rounds_to_convergence: self.mean_rounds_to_convergence(),
            means,
            percentiles,
        }
    }

    pub fn report_csv(&self) -> String {
        let mut out = String::from(
            "node,user,train,test,rounds,received,converged,rounds_to_convergence,messages_sent,bytes_sent,\
             sgd_updates,skipped_negatives,agg_work,degenerate_merges,weighting_metric",
        );
        for name in &self.metric_names {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for n in &self.nodes {
            write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                n.node,
                n.user,
                n.train,
                n.test,
                n.rounds,
                n.received,
                n.converged_at.is_some(),
                n.rounds_to_convergence(),
                n.messages_sent,
                n.bytes_sent,
                n.sgd_updates,
                n.skipped_negatives,
                n.agg_work,
                n.degenerate_merges,
                n.weighting_metric
            )
            .unwrap();
            for name in &self.metric_names {
                write!(out, ",{}", n.metrics.get(name).expect("reported metric")).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("checkpoint,time,node,rounds,weighting_metric");
        for name in &self.metric_names {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for r in &self.trajectory {
            write!(out, "{},{},{},{},{}", r.checkpoint, r.time, r.node, r.rounds, r.weighting_metric).unwrap();
            for v in &r.values {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn wallclock_csv(&self) -> String {
        let mut out = String::from("node,sgd_seconds,aggregation_seconds\n");
        for n in &self.nodes {
            writeln!(out, "{},{},{}", n.node, n.sgd_seconds, n.agg_seconds).unwrap();
        }
        out
    }

    /// Writes `report.csv`, `trajectory.csv`, `summary.json`, one
    /// `cdf_<metric>.csv` per metric plus `cdf_rounds_to_convergence.csv`,
    /// and `wallclock.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), self.report_csv())?;
        fs::write(dir.join("trajectory.csv"), self.trajectory_csv())?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary())? + "\n")?;
        for name in &self.metric_names {
            let cdf = self.cdf(name).expect("reported metric");
            fs::write(dir.join(format!("cdf_{name}.csv")), cdf_csv(&cdf))?;
        }
        let rounds: Vec<f64> = self.nodes.iter().map(|n| n.rounds_to_convergence() as f64).collect();
        fs::write(
            dir.join("cdf_rounds_to_convergence.csv"),
            cdf_csv(&cdf_and_percentiles(&rounds)),
        )?;
        fs::write(dir.join("wallclock.csv"), self.wallclock_csv())?;
        Ok(())
    }
}

pub fn cdf_csv(cdf: &Cdf) -> String {
    let mut out = String::from("value,fraction\n");
    for (x, y) in &cdf.points {
        writeln!(out, "{x},{y}").unwrap();
    }
    out
}
