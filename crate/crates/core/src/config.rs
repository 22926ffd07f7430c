//! Flat key-value experiment configuration (TOML), its mapping onto the
//! module configs, and the shared data pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregatorKind;
use crate::baselines::FlRoundConfig;
use crate::data::persist::{read_prepared, Manifest};
use crate::data::{self, density_splits, split_all, DatasetKind, InteractionDataset, NodeSplit, SplitConfig};
use crate::error::{Error, Result};
use crate::model::gmf::{GmfConfig, GmfModel};
use crate::model::prmeg::{PrmegConfig, PrmegModel};
use crate::model::{ModelFamily, Recommender};
use crate::peersampling::SamplerKind;
use crate::rng::{stream_rng, Stream};
use crate::sim::{Exploration, LatencyModel, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gossip,
    Federated,
    /// Federated training followed by local Reptile personalization.
    Reptile,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gossip" => Ok(Mode::Gossip),
            "federated" => Ok(Mode::Federated),
            "reptile" => Ok(Mode::Reptile),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    Full,
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelFamily,
    pub seed: u64,

    pub dataset: PathBuf,
    pub dataset_kind: DatasetKind,
    /// Directory written by `prepare`; takes precedence over `dataset`.
    pub prepared: Option<PathBuf>,
    pub density: Density,
    pub density_clusters: usize,
    /// Defaults to 10 for check-in data and 0 otherwise.
    pub min_item_users: Option<usize>,
    pub min_user_items: Option<usize>,
    pub train_ratio: f64,
    pub negatives: usize,

    pub gmf_dim: usize,
    pub gmf_neg_ratio: usize,
    pub gmf_lr: f64,
    pub gmf_init_scale: f64,

    pub prmeg_dim: usize,
    pub prmeg_mix_weight: f64,
    pub prmeg_lr: f64,
    pub prmeg_l2: f64,
    pub prmeg_tau_km: f64,
    pub prmeg_init_scale: f64,

    pub aggregator: AggregatorKind,
    pub sampler: SamplerKind,
    pub alpha: f64,
    pub view_size: usize,
    pub push_period: f64,
    pub push_jitter: f64,
    pub peer_sampling_period: f64,
    pub exploration: Exploration,
    pub checkpoint_period: f64,
    pub max_sim_time: f64,
    pub stop_on_convergence: bool,
    pub convergence_window: usize,
    pub convergence_delta: f64,
    pub local_epochs: usize,
    pub weighting_k: usize,
    pub ks: Vec<usize>,
    pub reptile_eps: f64,
    pub reptile_finetune_epochs: usize,
    pub latency_base_min: f64,
    pub latency_base_max: f64,
    pub upload_min: f64,
    pub upload_max: f64,
    pub share_user_embedding: bool,
    pub trace: bool,

    pub client_fraction: f64,
    pub fl_local_epochs: usize,
    pub fl_rounds: usize,
    pub fl_lr: Option<f64>,
    pub meta_eps: f64,
    pub finetune_epochs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        let fl = FlRoundConfig::default();
        let gmf = GmfConfig::default();
        let prmeg = PrmegConfig::default();
        let split = SplitConfig::default();
        ExperimentConfig {
            mode: Mode::Gossip,
            model: ModelFamily::Gmf,
            seed: 42,
            dataset: PathBuf::from("data/ml-100k/u.data"),
            dataset_kind: DatasetKind::Movielens,
            prepared: None,
            density: Density::Full,
            density_clusters: 8,
            min_item_users: None,
            min_user_items: None,
            train_ratio: split.train_ratio,
            negatives: split.negatives,
            gmf_dim: gmf.dim,
            gmf_neg_ratio: gmf.neg_ratio,
            gmf_lr: gmf.lr,
            gmf_init_scale: gmf.init_scale,
            prmeg_dim: prmeg.dim,
            prmeg_mix_weight: prmeg.mix_weight,
            prmeg_lr: prmeg.lr,
            prmeg_l2: prmeg.l2,
            prmeg_tau_km: prmeg.tau_km,
            prmeg_init_scale: prmeg.init_scale,
            aggregator: sim.aggregator,
            sampler: sim.sampler,
            alpha: sim.alpha,
            view_size: sim.view_size,
            push_period: sim.push_period,
            push_jitter: sim.push_jitter,
            peer_sampling_period: sim.peer_sampling_period,
            exploration: sim.exploration,
            checkpoint_period: sim.checkpoint_period,
            max_sim_time: sim.max_sim_time,
            stop_on_convergence: sim.stop_on_convergence,
            convergence_window: sim.convergence_window,
            convergence_delta: sim.convergence_delta,
            local_epochs: sim.local_epochs,
            weighting_k: sim.weighting_k,
            ks: sim.ks,
            reptile_eps: sim.reptile_eps,
            reptile_finetune_epochs: sim.reptile_finetune_epochs,
            latency_base_min: sim.latency.base_min,
            latency_base_max: sim.latency.base_max,
            upload_min: sim.latency.upload_min,
            upload_max: sim.latency.upload_max,
            share_user_embedding: sim.share_user_embedding,
            trace: sim.trace,
            client_fraction: fl.client_fraction,
            fl_local_epochs: fl.local_epochs,
            fl_rounds: fl.total_rounds,
            fl_lr: fl.lr,
            meta_eps: 0.5,
            finetune_epochs: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            aggregator: self.aggregator,
            sampler: self.sampler,
            alpha: self.alpha,
            view_size: self.view_size,
            push_period: self.push_period,
            push_jitter: self.push_jitter,
            peer_sampling_period: self.peer_sampling_period,
            exploration: self.exploration,
            checkpoint_period: self.checkpoint_period,
            max_sim_time: self.max_sim_time,
            stop_on_convergence: self.stop_on_convergence,
            convergence_window: self.convergence_window,
            convergence_delta: self.convergence_delta,
            local_epochs: self.local_epochs,
            weighting_k: self.weighting_k,
            ks: self.ks.clone(),
            reptile_eps: self.reptile_eps,
            reptile_finetune_epochs: self.reptile_finetune_epochs,
            latency: LatencyModel {
                base_min: self.latency_base_min,
                base_max: self.latency_base_max,
                upload_min: self.upload_min,
                upload_max: self.upload_max,
            },
            share_user_embedding: self.share_user_embedding,
            trace: self.trace,
        }
    }

    pub fn fl_config(&self) -> FlRoundConfig {
        FlRoundConfig {
            client_fraction: self.client_fraction,
            local_epochs: self.fl_local_epochs,
            total_rounds: self.fl_rounds,
            lr: self.fl_lr,
            ks: self.ks.clone(),
            weighting_k: self.weighting_k,
        }
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            train_ratio: self.train_ratio,
            negatives: self.negatives,
        }
    }

    pub fn gmf_config(&self) -> GmfConfig {
        GmfConfig {
            dim: self.gmf_dim,
            neg_ratio: self.gmf_neg_ratio,
            lr: self.gmf_lr,
            init_scale: self.gmf_init_scale,
        }
    }

    pub fn prmeg_config(&self) -> PrmegConfig {
        PrmegConfig {
            dim: self.prmeg_dim,
            mix_weight: self.prmeg_mix_weight,
            lr: self.prmeg_lr,
            l2: self.prmeg_l2,
            tau_km: self.prmeg_tau_km,
            init_scale: self.prmeg_init_scale,
        }
    }

    pub fn min_counts(&self) -> (usize, usize) {
        let default = match self.dataset_kind {
            DatasetKind::Checkins => 10,
            DatasetKind::Movielens => 0,
        };
        (
            self.min_item_users.unwrap_or(default),
            self.min_user_items.unwrap_or(default),
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Gossip => self.sim_config().validate()?,
            Mode::Federated | Mode::Reptile => self.fl_config().validate()?,
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config(format!("train_ratio {} outside (0, 1)", self.train_ratio)));
        }
        if !(0.0..=1.0).contains(&self.meta_eps) {
            return Err(Error::Config(format!("meta_eps {} outside [0, 1]", self.meta_eps)));
        }
        if self.density != Density::Full && self.density_clusters < 2 {
            return Err(Error::Config("density_clusters must be at least 2".into()));
        }
        if self.gmf_dim == 0 || self.prmeg_dim == 0 {
            return Err(Error::Config("embedding dimensions must be positive".into()));
        }
        if self.gmf_neg_ratio == 0 {
            return Err(Error::Config("gmf_neg_ratio must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.prmeg_mix_weight) {
            return Err(Error::Config("prmeg_mix_weight outside [0, 1]".into()));
        }
        if !(self.prmeg_tau_km > 0.0) {
            return Err(Error::Config("prmeg_tau_km must be positive".into()));
        }
        Ok(())
    }
}

/// Node splits and everything a model needs from the dataset.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub manifest: Manifest,
    pub splits: Vec<NodeSplit>,
    pub num_items: usize,
    pub coords: Option<Vec<(f64, f64)>>,
    /// The cleaned dataset, absent when loaded from a prepared directory.
    pub dataset: Option<InteractionDataset>,
}

/// Load, clean, optionally restrict by density, and split.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    if let Some(dir) = &cfg.prepared {
        let p = read_prepared(dir)?;
        return Ok(Prepared {
            num_items: p.manifest.items,
            manifest: p.manifest,
            splits: p.splits,
            coords: p.coords,
            dataset: None,
        });
    }
    let raw = data::load(&cfg.dataset_kind, &cfg.dataset)?;
    let mut ds = data::binarize(&raw);
    let (min_items, min_users) = cfg.min_counts();
    if min_items > 0 || min_users > 0 {
        ds = data::filter_min_counts(&ds, min_items, min_users);
    }
    ds = match cfg.density {
        Density::Full => ds,
        density => {
            let mut rng = stream_rng(cfg.seed, 0, Stream::Clustering);
            let d = density_splits(&ds, cfg.density_clusters, &mut rng)?;
            if density == Density::Dense {
                d.dense
            } else {
                d.sparse
            }
        }
    };
    if ds.is_empty() {
        return Err(Error::Data("no interactions left after cleaning".into()));
    }
    let split = cfg.split_config();
    let (splits, excluded) = split_all(&ds, &split, cfg.seed)?;
    let manifest = Manifest {
        seed: cfg.seed,
        kind: ds.kind,
        source: cfg.dataset.display().to_string(),
        users: ds.num_users(),
        items: ds.num_items(),
        records: ds.len(),
        sparsity: data::sparsity(&ds),
        split_users: splits.len(),
        excluded_users: excluded,
        split,
        min_item_users: min_items,
        min_user_items: min_users,
    };
    Ok(Prepared {
        manifest,
        splits,
        num_items: ds.num_items(),
        coords: ds.item_coords(),
        dataset: Some(ds),
    })
}

pub fn build_recommender(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<Recommender> {
    Ok(match cfg.model {
        ModelFamily::Gmf => Recommender::Gmf(GmfModel::new(prepared.num_items, cfg.gmf_config())),
        ModelFamily::Prmeg => {
            let mut m = PrmegModel::new(prepared.num_items, cfg.prmeg_config());
            match &prepared.coords {
                Some(c) => m = m.with_coords(Arc::new(c.clone())),
                None => log::warn!("no coordinates available, geographic factor disabled"),
            }
            Recommender::Prmeg(m)
        }
    })
}
