use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::convergence::ConvergenceTracker;
use super::event::{EventKind, EventQueue};
use super::report::{NodeReport, RunReport, RunStatus, TraceEntry, TrajectoryRow};
use super::{Exploration, SimConfig};
use crate::aggregation::{
    decentralized_fedavg, evaluate_on_weighting_set, model_age_based, performance_merge, reptile_step,
    weighted_pair, AggregatorKind,
};
use crate::data::NodeSplit;
use crate::error::{Error, Result};
use crate::eval::{evaluate_node, NodeMetrics, Scratch};
use crate::model::{ItemSet, ModelFamily, Recommender};
use crate::params::{GossipModel, NodeId, ParamVector};
use crate::peersampling::{random_view, update_view, PerfLedger, SamplerKind, View};
use crate::rng::{stream_rng, SimRng, Stream};

/// Per-message delay: a base latency drawn per message plus the transfer
/// time at the sender's upload rate (bytes per second, drawn per node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub base_min: f64,
    pub base_max: f64,
    pub upload_min: f64,
    pub upload_max: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            base_min: 0.02,
            base_max: 0.2,
            upload_min: 1.0e6,
            upload_max: 1.0e7,
        }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.base_min && self.base_min <= self.base_max && self.base_max.is_finite()) {
            return Err(Error::Config("latency base range must satisfy 0 <= min <= max".into()));
        }
        if !(0.0 < self.upload_min && self.upload_min <= self.upload_max && self.upload_max.is_finite()) {
            return Err(Error::Config("upload range must satisfy 0 < min <= max".into()));
        }
        Ok(())
    }

    fn draw(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    }

    pub fn upload_rate(&self, rng: &mut SimRng) -> f64 {
        Self::draw(rng, self.upload_min, self.upload_max)
    }

    pub fn delay(&self, bytes: usize, upload_rate: f64, rng: &mut SimRng) -> f64 {
        Self::draw(rng, self.base_min, self.base_max) + bytes as f64 / upload_rate
    }
}

struct Node {
    split: NodeSplit,
    observed: ItemSet,
    model: GossipModel,
    user: Vec<f64>,
    view: View,
    ledger: PerfLedger,
    upload_rate: f64,
    timing_rng: SimRng,
    view_rng: SimRng,
    train_rng: SimRng,
    received_since_push: bool,
    rounds: u64,
    received: u64,
    messages_sent: u64,
    bytes_sent: u64,
    sgd_updates: u64,
    skipped: u64,
    agg_work: u64,
    degenerate_merges: u64,
    sgd_seconds: f64,
    agg_seconds: f64,
}

struct Engine<'a> {
    config: &'a SimConfig,
    rec: &'a Recommender,
    nodes: Vec<Node>,
    queue: EventQueue,
    tracker: ConvergenceTracker,
    scratch: Scratch,
    metric_names: Vec<String>,
    trajectory: Vec<TrajectoryRow>,
    trace: Vec<TraceEntry>,
    checkpoints: u64,
    delivered: u64,
    view_updates: u64,
}

/// Applies the pairwise weights of a model merge to the user embeddings.
fn merge_user(local: &mut Vec<f64>, received: &[f64], w_local: f64, w_received: f64) -> Result<()> {
    let m = weighted_pair(
        &ParamVector::from_flat(std::mem::take(local)),
        w_local,
        &ParamVector::from_flat(received.to_vec()),
        w_received,
    )?;
    *local = m.params.values().to_vec();
    Ok(())
}

/// Metrics reported for a model family.
pub(crate) fn family_metrics(family: ModelFamily, ks: &[usize]) -> Vec<String> {
    let kinds: &[&str] = match family {
        ModelFamily::Gmf => &["hr", "ndcg"],
        ModelFamily::Prmeg => &["precision", "recall", "f1"],
    };
    kinds
        .iter()
        .flat_map(|m| ks.iter().map(move |k| format!("{m}@{k}")))
        .collect()
}

/// Runs one gossip simulation: node `i` holds `splits[i]`.
///
/// The output is a pure function of the arguments except for the wall-clock
/// fields of [`NodeReport`].
pub fn run_simulation(
    config: &SimConfig,
    splits: &[NodeSplit],
    rec: &Recommender,
    seed: u64,
) -> Result<RunReport> {
    config.validate()?;
    if splits.is_empty() {
        return Err(Error::Data("no nodes to simulate".into()));
    }
    for s in splits {
        if s.test.is_empty() || s.weighting.is_empty() {
            return Err(Error::Data(format!("user {} has an empty test or weighting set", s.user)));
        }
    }
    let pool = crate::thread_pool()?;
    pool.install(|| Engine::new(config, splits, rec, seed)?.run())
}

impl<'a> Engine<'a> {
    fn new(config: &'a SimConfig, splits: &[NodeSplit], rec: &'a Recommender, seed: u64) -> Result<Self> {
        let n = splits.len();
        let v = config.view_size.min(n - 1);
        if v < config.view_size {
            log::warn!("view size {} clamped to {v} for {n} nodes", config.view_size);
        }
        let shared = rec.init_shared(&mut stream_rng(seed, u64::MAX, Stream::Bootstrap));
        let mut nodes = Vec::with_capacity(n);
        for (i, split) in splits.iter().enumerate() {
            let id = i as NodeId;
            let mut view_rng = stream_rng(seed, i as u64, Stream::Views);
            let view = if v == 0 {
                View::empty(id)
            } else {
                random_view(id, n, v, &mut view_rng)?
            };
            let upload_rate = config
                .latency
                .upload_rate(&mut stream_rng(seed, i as u64, Stream::Latency));
            nodes.push(Node {
                model: GossipModel::new(shared.clone(), id, split.train.len() as u64),
                user: rec.init_user(&mut stream_rng(seed, i as u64, Stream::Bootstrap)),
                observed: split.training_items(),
                split: split.clone(),
                view,
                ledger: PerfLedger::new(),
                upload_rate,
                timing_rng: stream_rng(seed, i as u64, Stream::Timing),
                view_rng,
                train_rng: stream_rng(seed, i as u64, Stream::Training),
                received_since_push: false,
                rounds: 0,
                received: 0,
                messages_sent: 0,
                bytes_sent: 0,
                sgd_updates: 0,
                skipped: 0,
                agg_work: 0,
                degenerate_merges: 0,
                sgd_seconds: 0.0,
                agg_seconds: 0.0,
            });
        }

        let mut queue = EventQueue::new();
        for (i, node) in nodes.iter_mut().enumerate() {
            let phase = node.timing_rng.gen_range(0.0..config.push_period);
            queue.push(phase, EventKind::PushModel(i as NodeId));
            if v > 0 {
                let phase = node.view_rng.gen_range(0.0..config.peer_sampling_period);
                queue.push(phase, EventKind::ViewUpdate(i as NodeId));
            }
        }
        queue.push(config.checkpoint_period, EventKind::Checkpoint);

        Ok(Engine {
            config,
            rec,
            nodes,
            queue,
            tracker: ConvergenceTracker::new(n, config.convergence_window, config.convergence_delta),
            scratch: Scratch::default(),
            metric_names: family_metrics(rec.family(), &config.ks),
            trajectory: Vec::new(),
            trace: Vec::new(),
            checkpoints: 0,
            delivered: 0,
            view_updates: 0,
        })
    }

    fn run(mut self) -> Result<RunReport> {
        let mut status = RunStatus::Exhausted;
        let mut end_time = 0.0;
        while let Some(event) = self.queue.pop() {
            if event.fire_time > self.config.max_sim_time {
                status = RunStatus::Horizon;
                end_time = self.config.max_sim_time;
                break;
            }
            let now = event.fire_time;
            end_time = now;
            match event.kind {
                EventKind::PushModel(i) => self.on_push(i as usize, now)?,
                EventKind::Deliver {
                    model,
                    user,
                    from,
                    to,
                    sent_at,
                } => {
                    if self.config.trace {
                        self.trace.push(TraceEntry {
                            sent_at,
                            delivered_at: now,
                            from,
                            to,
                        });
                    }
                    self.on_deliver(to as usize, from, &model, user.as_deref(), now)?
                }
                EventKind::ViewUpdate(i) => self.on_view_update(i as usize, now)?,
                EventKind::Checkpoint => {
                    self.on_checkpoint(now)?;
                    if self.config.stop_on_convergence && self.tracker.all_converged() {
                        status = RunStatus::Converged;
                        break;
                    }
                    self.queue.push(now + self.config.checkpoint_period, EventKind::Checkpoint);
                }
            }
        }
        self.finish(status, end_time)
    }

    fn train(&mut self, i: usize, epochs: usize) -> Result<()> {
        let rec = self.rec;
        let node = &mut self.nodes[i];
        let start = Instant::now();
        for _ in 0..epochs {
            let stats = rec.train_epoch(
                &mut node.model,
                &mut node.user,
                &node.split.train,
                &node.observed,
                &mut node.train_rng,
            )?;
            node.sgd_updates += stats.updates;
            node.skipped += stats.skipped;
        }
        node.sgd_seconds += start.elapsed().as_secs_f64();
        Ok(())
    }

    fn on_push(&mut self, i: usize, now: f64) -> Result<()> {
        // a node that heard nothing since its last push still trains locally
        if !self.nodes[i].received_since_push {
            self.train(i, self.config.local_epochs)?;
        }
        let config = self.config;
        let node = &mut self.nodes[i];
        node.received_since_push = false;
        node.rounds += 1;
        if !node.view.peers().is_empty() {
            let snapshot = Arc::new(node.model.clone());
            let user = config.share_user_embedding.then(|| Arc::new(node.user.clone()));
            let bytes = snapshot.encoded_len() + user.as_ref().map_or(0, |u| 8 * u.len());
            for &peer in node.view.peers() {
                let delay = config.latency.delay(bytes, node.upload_rate, &mut node.timing_rng);
                node.messages_sent += 1;
                node.bytes_sent += bytes as u64;
                self.queue.push(
                    now + delay,
                    EventKind::Deliver {
                        model: Arc::clone(&snapshot),
                        user: user.clone(),
                        from: i as NodeId,
                        to: peer,
                        sent_at: now,
                    },
                );
            }
        }
        let jitter = config.push_jitter;
        let factor = if jitter > 0.0 {
            node.timing_rng.gen_range(1.0 - jitter..1.0 + jitter)
        } else {
            1.0
        };
        self.queue.push(now + config.push_period * factor, EventKind::PushModel(i as NodeId));
        Ok(())
    }

    fn on_deliver(
        &mut self,
        i: usize,
        from: NodeId,
        received: &GossipModel,
        received_user: Option<&Vec<f64>>,
        now: f64,
    ) -> Result<()> {
        self.delivered += 1;
        let config = self.config;
        let rec = self.rec;
        let start = Instant::now();
        let node = &mut self.nodes[i];
        node.received += 1;
        node.received_since_push = true;
        let len = node.model.params.len() as u64;
        let mut fine_tune = false;
        match config.aggregator {
            AggregatorKind::FedAvg | AggregatorKind::ReptileDecentralized => {
                let m = decentralized_fedavg(
                    &node.model.params,
                    &received.params,
                    node.model.samples,
                    received.samples,
                )?;
                node.degenerate_merges += m.degenerate as u64;
                node.model.params = m.params;
                node.model.age = node.model.age.max(received.age);
                node.agg_work += len;
                if let Some(u) = received_user {
                    merge_user(&mut node.user, u, node.model.samples as f64, received.samples as f64)?;
                }
                fine_tune = config.aggregator == AggregatorKind::ReptileDecentralized;
            }
            AggregatorKind::Age => {
                let m = model_age_based(&node.model.params, &received.params, node.model.age, received.age)?;
                if let Some(u) = received_user {
                    merge_user(&mut node.user, u, node.model.age.0 as f64, received.age.0 as f64)?;
                }
                node.degenerate_merges += m.degenerate as u64;
                node.model.params = m.params;
                node.model.age = node.model.age.max(received.age);
                node.agg_work += len;
            }
            AggregatorKind::Performance => {
                let ws = &node.split.weighting;
                let k = config.weighting_k;
                let scratch = &mut self.scratch;
                let scoring_user = received_user.unwrap_or(&node.user);
                let received_perf = evaluate_on_weighting_set(rec, &received.params, scoring_user, ws, k, scratch)?;
                let local_perf = evaluate_on_weighting_set(rec, &node.model.params, &node.user, ws, k, scratch)?;
                let out = performance_merge(&node.model, received, local_perf, received_perf)?;
                if let Some(u) = received_user {
                    merge_user(&mut node.user, u, local_perf, received_perf)?;
                }
                node.ledger.record(from, received_perf, now)?;
                node.degenerate_merges += out.degenerate as u64;
                node.model.params = out.merged;
                node.model.age = out.new_age;
                let scored: usize = ws.iter().map(|p| p.candidates.len()).sum();
                node.agg_work += len + 2 * scored as u64 * node.user.len() as u64;
            }
        }
        node.agg_seconds += start.elapsed().as_secs_f64();

        if fine_tune {
            let merged = self.nodes[i].model.params.clone();
            self.train(i, config.reptile_finetune_epochs)?;
            let node = &mut self.nodes[i];
            node.model.params = reptile_step(&merged, &node.model.params, config.reptile_eps)?;
        } else {
            self.train(i, config.local_epochs)?;
        }
        Ok(())
    }

    fn on_view_update(&mut self, i: usize, now: f64) -> Result<()> {
        self.view_updates += 1;
        let alpha = match self.config.sampler {
            SamplerKind::Random => 1.0,
            SamplerKind::Personalized => self.config.alpha,
        };
        let n = self.nodes.len();
        let (head, rest) = self.nodes.split_at_mut(i);
        let (node, tail) = rest.split_first_mut().expect("index in range");
        let from_neighbors = self.config.exploration == Exploration::NeighborViews;
        let lookup = |p: NodeId| -> Option<&[NodeId]> {
            if !from_neighbors {
                return None;
            }
            let p = p as usize;
            match p.cmp(&i) {
                std::cmp::Ordering::Less => Some(head[p].view.peers()),
                std::cmp::Ordering::Greater => Some(tail[p - i - 1].view.peers()),
                std::cmp::Ordering::Equal => None,
            }
        };
        node.view = update_view(&node.view, &node.ledger, alpha, lookup, n, &mut node.view_rng)?;
        self.queue.push(now + self.config.peer_sampling_period, EventKind::ViewUpdate(i as NodeId));
        Ok(())
    }

    fn evaluate_all(&self) -> Result<Vec<(NodeMetrics, f64)>> {
        let rec = self.rec;
        let ks = &self.config.ks;
        let wk = self.config.weighting_k;
        self.nodes
            .par_iter()
            .map_init(Scratch::default, |scratch, node| {
                let metrics = evaluate_node(rec, &node.model.params, &node.user, &node.split.test, ks, scratch)?;
                let ws =
                    evaluate_on_weighting_set(rec, &node.model.params, &node.user, &node.split.weighting, wk, scratch)?;
                Ok((metrics, ws))
            })
            .collect()
    }

    fn on_checkpoint(&mut self, now: f64) -> Result<()> {
        self.checkpoints += 1;
        let results = self.evaluate_all()?;
        for (i, (metrics, ws)) in results.into_iter().enumerate() {
            let rounds = self.nodes[i].rounds;
            self.tracker.observe(i, ws, rounds)?;
            self.trajectory.push(TrajectoryRow {
                checkpoint: self.checkpoints,
                time: now,
                node: i as NodeId,
                rounds,
                weighting_metric: ws,
                values: self
                    .metric_names
                    .iter()
                    .map(|name| metrics.get(name).expect("known metric"))
                    .collect(),
            });
        }
        log::debug!("checkpoint {} at t={now:.0}", self.checkpoints);
        Ok(())
    }

    fn finish(self, status: RunStatus, end_time: f64) -> Result<RunReport> {
        let finals = self.evaluate_all()?;
        let nodes = self
            .nodes
            .iter()
            .zip(finals)
            .enumerate()
            .map(|(i, (node, (metrics, ws)))| NodeReport {
                node: i as NodeId,
                user: node.split.user,
                train: node.split.train.len(),
                test: node.split.test.len(),
                metrics,
                weighting_metric: ws,
                rounds: node.rounds,
                received: node.received,
                converged_at: self.tracker.converged_at(i),
                messages_sent: node.messages_sent,
                bytes_sent: node.bytes_sent,
                sgd_updates: node.sgd_updates,
                skipped_negatives: node.skipped,
                agg_work: node.agg_work,
                degenerate_merges: node.degenerate_merges,
                sgd_seconds: node.sgd_seconds,
                agg_seconds: node.agg_seconds,
            })
            .collect();
        Ok(RunReport {
            status,
            family: self.rec.family(),
            ks: self.config.ks.clone(),
            metric_names: self.metric_names,
            nodes,
            trajectory: self.trajectory,
            end_time,
            checkpoints: self.checkpoints,
            delivered: self.delivered,
            view_updates: self.view_updates,
            trace: self.config.trace.then_some(self.trace),
        })
    }
}
