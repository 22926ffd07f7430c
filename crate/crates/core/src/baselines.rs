//! Centralized federated comparators on the same splits: FedAvg with client
//! sampling, and Reptile-style personalization on top of it.

use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{evaluate_on_weighting_set, reptile_step};
use crate::data::NodeSplit;
use crate::error::{Error, Result};
use crate::eval::{evaluate_node, Scratch, DEFAULT_KS};
use crate::model::Recommender;
use crate::params::{GossipModel, NodeId, ParamVector};
use crate::rng::{stream_rng, SimRng, Stream};
use crate::sim::{NodeReport, RunReport, RunStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlRoundConfig {
    pub client_fraction: f64,
    pub local_epochs: usize,
    pub total_rounds: usize,
    /// Overrides the model's learning rate when set.
    pub lr: Option<f64>,
    pub ks: Vec<usize>,
    pub weighting_k: usize,
}

impl Default for FlRoundConfig {
    fn default() -> Self {
        FlRoundConfig {
            client_fraction: 0.1,
            local_epochs: 1,
            total_rounds: 400,
            lr: None,
            ks: DEFAULT_KS.to_vec(),
            weighting_k: 10,
        }
    }
}

impl FlRoundConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.client_fraction > 0.0 && self.client_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "client_fraction {} outside (0, 1]",
                self.client_fraction
            )));
        }
        if self.ks.is_empty() || self.ks.contains(&0) || self.weighting_k == 0 {
            return Err(Error::Config("metric cutoffs must be positive".into()));
        }
        if let Some(lr) = self.lr {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("learning rate {lr} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn clients_per_round(&self, n: usize) -> usize {
        ((self.client_fraction * n as f64).ceil() as usize).clamp(1, n)
    }
}

/// Client-side state that survives between rounds.
#[derive(Debug, Clone)]
pub struct Client {
    pub user: Vec<f64>,
    pub rng: SimRng,
    pub participations: u64,
    pub sgd_updates: u64,
    pub skipped: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FlOutcome {
    pub global: ParamVector,
    pub clients: Vec<Client>,
    pub report: RunReport,
}

/// Sample-size weighted mean of client parameters, reduced in the given
/// order. Falls back to the plain mean when every weight is zero.
pub fn weighted_average(models: &[(ParamVector, u64)]) -> Result<ParamVector> {
    let (first, _) = models.first().ok_or_else(|| Error::domain("nothing to average"))?;
    for (m, _) in &models[1..] {
        first.check_layout(m)?;
    }
    let total: u64 = models.iter().map(|(_, n)| n).sum();
    let weight = |n: u64| {
        if total == 0 {
            1.0 / models.len() as f64
        } else {
            n as f64 / total as f64
        }
    };
    let mut out = first.clone();
    out.values_mut().iter_mut().for_each(|v| *v = 0.0);
    for (m, n) in models {
        let w = weight(*n);
        for (o, x) in out.values_mut().iter_mut().zip(m.values()) {
            *o += w * x;
        }
    }
    Ok(out)
}

fn train_copy(
    rec: &Recommender,
    global: &ParamVector,
    split: &NodeSplit,
    client: &mut Client,
    epochs: usize,
) -> Result<ParamVector> {
    let start = Instant::now();
    let mut model = GossipModel::new(global.clone(), 0, split.train.len() as u64);
    let observed = split.training_items();
    for _ in 0..epochs {
        let stats = rec.train_epoch(&mut model, &mut client.user, &split.train, &observed, &mut client.rng)?;
        client.sgd_updates += stats.updates;
        client.skipped += stats.skipped;
    }
    client.seconds += start.elapsed().as_secs_f64();
    Ok(model.params)
}

/// FedAvg: each round samples `ceil(p N)` clients, trains them from the
/// global shared parameters and averages the results by training-set size.
pub fn fl_run(config: &FlRoundConfig, splits: &[NodeSplit], rec: &Recommender, seed: u64) -> Result<FlOutcome> {
    config.validate()?;
    if splits.is_empty() {
        return Err(Error::Data("no clients".into()));
    }
    let rec = match config.lr {
        Some(lr) => rec.with_learning_rate(lr),
        None => rec.clone(),
    };
    let n = splits.len();
    let m = config.clients_per_round(n);
    let mut global = rec.init_shared(&mut stream_rng(seed, u64::MAX, Stream::Bootstrap));
    let mut clients: Vec<Client> = (0..n)
        .map(|i| Client {
            user: rec.init_user(&mut stream_rng(seed, i as u64, Stream::Bootstrap)),
            rng: stream_rng(seed, i as u64, Stream::Federated),
            participations: 0,
            sgd_updates: 0,
            skipped: 0,
            seconds: 0.0,
        })
        .collect();
    let mut server_rng = stream_rng(seed, u64::MAX, Stream::Federated);
    let bytes = GossipModel::new(global.clone(), 0, 0).encoded_len() as u64;

    let pool = crate::thread_pool()?;
    pool.install(|| -> Result<()> {
        let mut selected = vec![false; n];
        for round in 0..config.total_rounds {
            selected.iter_mut().for_each(|s| *s = false);
            for i in index::sample(&mut server_rng, n, m) {
                selected[i] = true;
            }
            let updates: Vec<(ParamVector, u64)> = clients
                .par_iter_mut()
                .zip(splits)
                .zip(&selected)
                .filter(|(_, &sel)| sel)
                .map(|((client, split), _)| {
                    client.participations += 1;
                    let params = train_copy(&rec, &global, split, client, config.local_epochs)?;
                    Ok((params, split.train.len() as u64))
                })
                .collect::<Result<_>>()?;
            global = weighted_average(&updates)?;
            log::trace!("federated round {round} averaged {} clients", updates.len());
        }
        Ok(())
    })?;

    let report = evaluate_clients(&rec, config, splits, &clients, |_| &global, bytes, config.total_rounds)?;
    Ok(FlOutcome {
        global,
        clients,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct ReptileOutcome {
    pub global: ParamVector,
    /// Personalized shared parameters of every node.
    pub personalized: Vec<ParamVector>,
    pub report: RunReport,
}

/// Runs FedAvg, then lets every node fine-tune its copy of the global model
/// and step a fraction `meta_eps` towards the fine-tuned parameters.
pub fn reptile_run(
    config: &FlRoundConfig,
    splits: &[NodeSplit],
    rec: &Recommender,
    meta_eps: f64,
    finetune_epochs: usize,
    seed: u64,
) -> Result<ReptileOutcome> {
    if !(0.0..=1.0).contains(&meta_eps) {
        return Err(Error::Config(format!("meta_eps {meta_eps} outside [0, 1]")));
    }
    let fl = fl_run(config, splits, rec, seed)?;
    let rec = match config.lr {
        Some(lr) => rec.with_learning_rate(lr),
        None => rec.clone(),
    };
    let mut clients = fl.clients;
    let global = fl.global;
    let pool = crate::thread_pool()?;
    let personalized: Vec<ParamVector> = pool.install(|| {
        clients
            .par_iter_mut()
            .zip(splits)
            .map(|(client, split)| {
                let local = train_copy(&rec, &global, split, client, finetune_epochs)?;
                reptile_step(&global, &local, meta_eps)
            })
            .collect::<Result<_>>()
    })?;
    let bytes = GossipModel::new(global.clone(), 0, 0).encoded_len() as u64;
    let report = evaluate_clients(
        &rec,
        config,
        splits,
        &clients,
        |i| &personalized[i],
        bytes,
        config.total_rounds,
    )?;
    Ok(ReptileOutcome {
        global,
        personalized,
        report,
    })
}

fn evaluate_clients<'a, F>(
    rec: &Recommender,
    config: &FlRoundConfig,
    splits: &[NodeSplit],
    clients: &[Client],
    params_of: F,
    model_bytes: u64,
    rounds: usize,
) -> Result<RunReport>
where
    F: Fn(usize) -> &'a ParamVector + Sync,
{
    let pool = crate::thread_pool()?;
    let nodes: Vec<NodeReport> = pool.install(|| {
        clients
            .par_iter()
            .zip(splits)
            .enumerate()
            .map_init(Scratch::default, |scratch, (i, (client, split))| {
                let params = params_of(i);
                let metrics = evaluate_node(rec, params, &client.user, &split.test, &config.ks, scratch)?;
                let ws = if split.weighting.is_empty() {
                    0.0
                } else {
                    evaluate_on_weighting_set(rec, params, &client.user, &split.weighting, config.weighting_k, scratch)?
                };
                Ok(NodeReport {
                    node: i as NodeId,
                    user: split.user,
                    train: split.train.len(),
                    test: split.test.len(),
                    metrics,
                    weighting_metric: ws,
                    rounds: client.participations,
                    received: client.participations,
                    converged_at: None,
                    // one download and one upload per participation
                    messages_sent: client.participations,
                    bytes_sent: 2 * client.participations * model_bytes,
                    sgd_updates: client.sgd_updates,
                    skipped_negatives: client.skipped,
                    agg_work: 0,
                    degenerate_merges: 0,
                    sgd_seconds: client.seconds,
                    agg_seconds: 0.0,
                })
            })
            .collect::<Result<_>>()
    })?;
    Ok(RunReport {
        status: RunStatus::Horizon,
        family: rec.family(),
        ks: config.ks.clone(),
        metric_names: crate::sim::family_metrics(rec.family(), &config.ks),
        nodes,
        trajectory: Vec::new(),
        end_time: rounds as f64,
        checkpoints: 0,
        delivered: 0,
        view_updates: 0,
        trace: None,
    })
}
