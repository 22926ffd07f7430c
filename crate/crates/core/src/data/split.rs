//! Per-user train / weighting / test splits with fixed negative pools.

use std::collections::{BTreeSet, HashSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetKind, InteractionDataset};
use crate::error::{Error, Result};
use crate::eval::Probe;
use crate::model::{ItemId, ItemSet, Query};
use crate::rng::{stream_rng, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Seeded random test selection; interactions carry no predecessor.
    Random,
    /// Latest records form the test set; each interaction remembers the
    /// location visited just before it.
    Chronological,
}

impl SplitMode {
    pub fn for_kind(kind: &DatasetKind) -> Self {
        match kind {
            DatasetKind::Movielens => SplitMode::Random,
            DatasetKind::Checkins => SplitMode::Chronological,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_ratio: f64,
    pub negatives: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_ratio: 0.85,
            negatives: 100,
        }
    }
}

/// Local data of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSplit {
    /// User id in the dataset vocabulary.
    pub user: u32,
    pub train: Vec<Query>,
    pub weighting: Vec<Probe>,
    pub test: Vec<Probe>,
    /// Every item the user interacted with, across all three parts.
    pub known: ItemSet,
}

impl NodeSplit {
    /// Items the node treats as observed while training. The weighting and
    /// test targets are held out alike, so both may be drawn as negatives.
    pub fn training_items(&self) -> ItemSet {
        ItemSet::new(self.train.iter().map(|q| q.target).collect())
    }

    /// Checks record-level disjointness is implied by construction; here we
    /// check sizes and that no pool leaks a known item.
    pub fn validate(&self, negatives: usize) -> Result<()> {
        if self.weighting.len() != self.test.len() {
            return Err(Error::Data(format!(
                "user {}: weighting set {} != test set {}",
                self.user,
                self.weighting.len(),
                self.test.len()
            )));
        }
        for probe in self.weighting.iter().chain(&self.test) {
            if probe.negatives().len() != negatives {
                return Err(Error::Data(format!("user {}: short negative pool", self.user)));
            }
            if probe.negatives().iter().any(|&i| self.known.contains(i)) {
                return Err(Error::Data(format!("user {}: pool contains a seen item", self.user)));
            }
        }
        Ok(())
    }
}

/// `round(0.15 n)` half up, at least one.
pub fn test_size(n: usize, train_ratio: f64) -> usize {
    let raw = (1.0 - train_ratio) * n as f64;
    // epsilon absorbs representation error such as 0.15 * 30 = 4.4999..
    (raw + 0.5 + 1e-9).floor().max(1.0) as usize
}

fn draw_pool(num_items: usize, known: &ItemSet, count: usize, rng: &mut SimRng) -> Result<Vec<ItemId>> {
    let free = num_items.saturating_sub(known.len());
    if free < count {
        return Err(Error::Data(format!(
            "only {free} unseen items available for a pool of {count}"
        )));
    }
    if free < 4 * count {
        let candidates: Vec<ItemId> = (0..num_items as ItemId).filter(|&i| !known.contains(i)).collect();
        return Ok(index::sample(rng, candidates.len(), count)
            .into_iter()
            .map(|i| candidates[i])
            .collect());
    }
    let mut seen = HashSet::with_capacity(count);
    let mut pool = Vec::with_capacity(count);
    while pool.len() < count {
        let c = rng.gen_range(0..num_items) as ItemId;
        if !known.contains(c) && seen.insert(c) {
            pool.push(c);
        }
    }
    Ok(pool)
}

/// Splits one user's chronologically ordered `(item, timestamp)` history.
///
/// The test part is drawn first, then a weighting set of equal size is
/// sampled uniformly from what remains; the rest is training data.
pub fn split_user(
    user: u32,
    history: &[ItemId],
    num_items: usize,
    mode: SplitMode,
    config: &SplitConfig,
    rng: &mut SimRng,
) -> Result<NodeSplit> {
    let n = history.len();
    if n < 3 {
        return Err(Error::Data(format!("user {user} has only {n} records")));
    }
    let t = test_size(n, config.train_ratio);
    let queries: Vec<Query> = history
        .iter()
        .enumerate()
        .map(|(j, &item)| Query {
            prev: match mode {
                SplitMode::Chronological if j > 0 => Some(history[j - 1]),
                _ => None,
            },
            target: item,
        })
        .collect();

    let test_idx: BTreeSet<usize> = match mode {
        SplitMode::Chronological => (n - t..n).collect(),
        SplitMode::Random => index::sample(rng, n, t).into_iter().collect(),
    };
    let rest: Vec<usize> = (0..n).filter(|i| !test_idx.contains(i)).collect();
    let ws_idx: BTreeSet<usize> = index::sample(rng, rest.len(), t)
        .into_iter()
        .map(|i| rest[i])
        .collect();

    let known = ItemSet::new(history.to_vec());
    let mut probe = |i: usize| -> Result<Probe> {
        let pool = draw_pool(num_items, &known, config.negatives, rng)?;
        Ok(Probe::new(queries[i], &pool))
    };
    let weighting = ws_idx.iter().map(|&i| probe(i)).collect::<Result<Vec<_>>>()?;
    let test = test_idx.iter().map(|&i| probe(i)).collect::<Result<Vec<_>>>()?;
    let train = (0..n)
        .filter(|i| !test_idx.contains(i) && !ws_idx.contains(i))
        .map(|i| queries[i])
        .collect();
    Ok(NodeSplit {
        user,
        train,
        weighting,
        test,
        known,
    })
}

/// Splits every user; users with fewer than three records are skipped and
/// counted. Each user draws from its own seeded stream.
pub fn split_all(ds: &InteractionDataset, config: &SplitConfig, seed: u64) -> Result<(Vec<NodeSplit>, usize)> {
    let mode = SplitMode::for_kind(&ds.kind);
    let mut splits = Vec::new();
    let mut excluded = 0;
    for (user, records) in ds.by_user().into_iter().enumerate() {
        if records.len() < 3 {
            excluded += 1;
            continue;
        }
        let history: Vec<ItemId> = records.iter().map(|&i| ds.records[i].item).collect();
        let mut rng = stream_rng(seed, user as u64, Stream::Split);
        splits.push(split_user(user as u32, &history, ds.num_items(), mode, config, &mut rng)?);
    }
    if excluded > 0 {
        log::info!("{excluded} users with fewer than 3 records excluded");
    }
    Ok((splits, excluded))
}
