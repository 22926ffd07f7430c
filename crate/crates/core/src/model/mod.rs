//! Recommendation models as pure transformations over [`ParamVector`]s.
//!
//! Both models split their parameters into a shared part, which is gossiped
//! and aggregated, and a user embedding that never leaves its node.

pub mod gmf;
pub mod prmeg;
pub mod rank;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{GossipModel, ParamVector};
use crate::rng::SimRng;

pub use gmf::{GmfConfig, GmfModel};
pub use prmeg::{PrmegConfig, PrmegModel};
pub use rank::{rank_items, rank_position};

pub type ItemId = u32;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow for large `|x|`.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Sorted, deduplicated set of item ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemSet(Vec<ItemId>);

impl ItemSet {
    pub fn new(mut items: Vec<ItemId>) -> Self {
        items.sort_unstable();
        items.dedup();
        ItemSet(items)
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.0.iter().copied()
    }
}

/// Draws an item uniformly from `0..num_items` minus `excluded`.
/// Returns `None` when every item is excluded.
pub fn sample_unseen(
    num_items: usize,
    excluded: &ItemSet,
    rng: &mut SimRng,
) -> Option<ItemId> {
    let free = num_items.saturating_sub(excluded.len());
    if free == 0 {
        return None;
    }
    for _ in 0..64 {
        let cand = rng.gen_range(0..num_items) as ItemId;
        if !excluded.contains(cand) {
            return Some(cand);
        }
    }
    // dense exclusion set: pick the n-th free item directly
    let mut n = rng.gen_range(0..free);
    for item in 0..num_items as ItemId {
        if !excluded.contains(item) {
            if n == 0 {
                return Some(item);
            }
            n -= 1;
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Gmf,
    Prmeg,
}

impl std::str::FromStr for ModelFamily {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gmf" => Ok(ModelFamily::Gmf),
            "prmeg" | "prme-g" => Ok(ModelFamily::Prmeg),
            other => Err(format!("unknown model family `{other}`")),
        }
    }
}

/// One query for ranking: the target plus, for sequential models, the
/// location the user is coming from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub prev: Option<ItemId>,
    pub target: ItemId,
}

/// Outcome of one local training pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub updates: u64,
    /// Observations skipped because no negative could be drawn.
    pub skipped: u64,
    /// Set when the training set was empty and nothing happened.
    pub empty: bool,
}

/// A model family bound to concrete dimensions, used by the simulator and
/// the federated baselines without caring which family runs underneath.
#[derive(Debug, Clone)]
pub enum Recommender {
    Gmf(GmfModel),
    Prmeg(PrmegModel),
}

impl Recommender {
    pub fn family(&self) -> ModelFamily {
        match self {
            Recommender::Gmf(_) => ModelFamily::Gmf,
            Recommender::Prmeg(_) => ModelFamily::Prmeg,
        }
    }

    pub fn num_items(&self) -> usize {
        match self {
            Recommender::Gmf(m) => m.num_items,
            Recommender::Prmeg(m) => m.num_locations,
        }
    }

    pub fn init_shared(&self, rng: &mut SimRng) -> ParamVector {
        match self {
            Recommender::Gmf(m) => m.init_shared(rng),
            Recommender::Prmeg(m) => m.init_shared(rng),
        }
    }

    pub fn init_user(&self, rng: &mut SimRng) -> Vec<f64> {
        match self {
            Recommender::Gmf(m) => m.init_user(rng),
            Recommender::Prmeg(m) => m.init_user(rng),
        }
    }

    /// One full pass over `train`, bumping the model age.
    pub fn train_epoch(
        &self,
        model: &mut GossipModel,
        user: &mut [f64],
        train: &[Query],
        excluded: &ItemSet,
        rng: &mut SimRng,
    ) -> Result<EpochStats> {
        let stats = match self {
            Recommender::Gmf(m) => {
                let items: Vec<ItemId> = train.iter().map(|q| q.target).collect();
                m.train_epoch(&mut model.params, user, &items, excluded, rng)?
            }
            Recommender::Prmeg(m) => {
                m.train_epoch(&mut model.params, user, train, excluded, rng)?
            }
        };
        if !stats.empty {
            model.age.bump();
        }
        Ok(stats)
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            Recommender::Gmf(m) => m.config.lr,
            Recommender::Prmeg(m) => m.config.lr,
        }
    }

    pub fn with_learning_rate(&self, lr: f64) -> Recommender {
        let mut out = self.clone();
        match &mut out {
            Recommender::Gmf(m) => m.config.lr = lr,
            Recommender::Prmeg(m) => m.config.lr = lr,
        }
        out
    }

    /// Whether larger scores rank first.
    pub fn higher_is_better(&self) -> bool {
        matches!(self, Recommender::Gmf(_))
    }

    /// Scores every candidate for `user` given the query context. Scores
    /// are only meaningful relative to each other.
    pub fn score_candidates(
        &self,
        shared: &ParamVector,
        user: &[f64],
        prev: Option<ItemId>,
        candidates: &[ItemId],
        out: &mut Vec<f64>,
    ) -> Result<()> {
        match self {
            Recommender::Gmf(m) => m.logits(shared, user, candidates, out),
            Recommender::Prmeg(m) => m.scores(shared, user, prev, candidates, out),
        }
    }
}
