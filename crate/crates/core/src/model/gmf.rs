//! Generalized matrix factorization.
//!
//! `p(u, i) = sigmoid(h . (p_u * q_i) + b)` where `*` is the element-wise
//! product. Item embeddings `q`, output weights `h` and bias `b` are shared;
//! `p_u` stays on its node.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{log_sigmoid, sample_unseen, sigmoid, EpochStats, ItemId, ItemSet};
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::rng::SimRng;

pub const ITEM_EMBEDDINGS: &str = "item_embeddings";
pub const OUTPUT_WEIGHTS: &str = "output_weights";
pub const OUTPUT_BIAS: &str = "output_bias";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmfConfig {
    pub dim: usize,
    pub neg_ratio: usize,
    pub lr: f64,
    pub init_scale: f64,
}

impl Default for GmfConfig {
    fn default() -> Self {
        GmfConfig {
            dim: 16,
            neg_ratio: 4,
            lr: 0.01,
            init_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmfModel {
    pub num_items: usize,
    pub config: GmfConfig,
}

/// Gradient of the binary cross-entropy of one labelled example.
#[derive(Debug, Clone, PartialEq)]
pub struct GmfGrad {
    pub loss: f64,
    pub user: Vec<f64>,
    pub item: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl GmfModel {
    pub fn new(num_items: usize, config: GmfConfig) -> Self {
        GmfModel { num_items, config }
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn layout(&self) -> ParamVector {
        ParamVector::zeros(&[
            (ITEM_EMBEDDINGS, self.num_items * self.dim()),
            (OUTPUT_WEIGHTS, self.dim()),
            (OUTPUT_BIAS, 1),
        ])
    }

    /// Item embeddings uniform in `+-init_scale`, output weights at one and
    /// zero bias, so the untrained model is plain matrix factorization.
    pub fn init_shared(&self, rng: &mut SimRng) -> ParamVector {
        let mut p = self.layout();
        let s = self.config.init_scale;
        for v in p.segment_mut(ITEM_EMBEDDINGS).unwrap() {
            *v = if s > 0.0 { rng.gen_range(-s..s) } else { 0.0 };
        }
        p.segment_mut(OUTPUT_WEIGHTS).unwrap().fill(1.0);
        p
    }

    pub fn init_user(&self, rng: &mut SimRng) -> Vec<f64> {
        let s = self.config.init_scale;
        (0..self.dim())
            .map(|_| if s > 0.0 { rng.gen_range(-s..s) } else { 0.0 })
            .collect()
    }

    fn check(&self, shared: &ParamVector, user: &[f64]) -> Result<()> {
        let d = self.dim();
        if shared.len() != self.num_items * d + d + 1 {
            return Err(Error::domain(format!(
                "GMF parameter vector has {} values, expected {}",
                shared.len(),
                self.num_items * d + d + 1
            )));
        }
        if user.len() != d {
            return Err(Error::domain(format!(
                "user embedding has dimension {}, expected {}",
                user.len(),
                d
            )));
        }
        Ok(())
    }

    fn check_item(&self, item: ItemId) -> Result<()> {
        if (item as usize) < self.num_items {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "item {item} outside vocabulary of {}",
                self.num_items
            )))
        }
    }

    fn split<'a>(&self, shared: &'a [f64]) -> (&'a [f64], &'a [f64], f64) {
        let n = self.num_items * self.dim();
        (&shared[..n], &shared[n..n + self.dim()], shared[n + self.dim()])
    }

    pub fn logit(&self, shared: &ParamVector, user: &[f64], item: ItemId) -> Result<f64> {
        self.check(shared, user)?;
        self.check_item(item)?;
        let d = self.dim();
        let (items, h, b) = self.split(shared.values());
        let q = &items[item as usize * d..(item as usize + 1) * d];
        Ok(b + (0..d).map(|k| h[k] * user[k] * q[k]).sum::<f64>())
    }

    /// Relevance probability of `item` for the user, strictly inside (0, 1)
    /// for any finite logit below ~36 in magnitude.
    pub fn forward(&self, shared: &ParamVector, user: &[f64], item: ItemId) -> Result<f64> {
        Ok(sigmoid(self.logit(shared, user, item)?))
    }

    /// Logits for a batch of candidates; ranking by logit equals ranking
    /// by probability.
    pub fn logits(
        &self,
        shared: &ParamVector,
        user: &[f64],
        candidates: &[ItemId],
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.check(shared, user)?;
        let d = self.dim();
        let (items, h, b) = self.split(shared.values());
        let w: Vec<f64> = h.iter().zip(user).map(|(a, u)| a * u).collect();
        out.clear();
        for &c in candidates {
            self.check_item(c)?;
            let q = &items[c as usize * d..(c as usize + 1) * d];
            out.push(b + w.iter().zip(q).map(|(a, b)| a * b).sum::<f64>());
        }
        Ok(())
    }

    /// Binary cross-entropy of one `(item, label)` example and its gradient
    /// with respect to every parameter the example touches.
    pub fn loss_grad(
        &self,
        shared: &ParamVector,
        user: &[f64],
        item: ItemId,
        label: f64,
    ) -> Result<GmfGrad> {
        let z = self.logit(shared, user, item)?;
        let d = self.dim();
        let (items, h, _) = self.split(shared.values());
        let q = &items[item as usize * d..(item as usize + 1) * d];
        let loss = -(label * log_sigmoid(z) + (1.0 - label) * log_sigmoid(-z));
        let g = sigmoid(z) - label;
        Ok(GmfGrad {
            loss,
            user: (0..d).map(|k| g * h[k] * q[k]).collect(),
            item: (0..d).map(|k| g * h[k] * user[k]).collect(),
            output_weights: (0..d).map(|k| g * user[k] * q[k]).collect(),
            output_bias: g,
        })
    }

    /// Single SGD step on one example; returns the pre-step loss.
    fn step(&self, shared: &mut [f64], user: &mut [f64], item: ItemId, label: f64, lr: f64) -> f64 {
        let d = self.dim();
        let n = self.num_items * d;
        let (items, rest) = shared.split_at_mut(n);
        let (h, b) = rest.split_at_mut(d);
        let q = &mut items[item as usize * d..(item as usize + 1) * d];
        let z = b[0] + (0..d).map(|k| h[k] * user[k] * q[k]).sum::<f64>();
        let g = sigmoid(z) - label;
        let loss = -(label * log_sigmoid(z) + (1.0 - label) * log_sigmoid(-z));
        if lr != 0.0 {
            for k in 0..d {
                let (hk, uk, qk) = (h[k], user[k], q[k]);
                user[k] -= lr * g * hk * qk;
                q[k] -= lr * g * hk * uk;
                h[k] -= lr * g * uk * qk;
            }
            b[0] -= lr * g;
        }
        loss
    }

    /// One SGD pass over `train` (positives), each positive followed by
    /// `neg_ratio` items drawn uniformly from outside `excluded`.
    pub fn train_epoch(
        &self,
        shared: &mut ParamVector,
        user: &mut [f64],
        train: &[ItemId],
        excluded: &ItemSet,
        rng: &mut SimRng,
    ) -> Result<EpochStats> {
        self.check(shared, user)?;
        if train.is_empty() {
            log::warn!("GMF training skipped: empty training set");
            return Ok(EpochStats {
                empty: true,
                ..Default::default()
            });
        }
        if self.config.neg_ratio == 0 {
            return Err(Error::domain("neg_ratio must be at least 1"));
        }
        for &i in train {
            self.check_item(i)?;
        }
        let lr = self.config.lr;
        let mut order = train.to_vec();
        order.shuffle(rng);
        let values = shared.values_mut();
        let mut stats = EpochStats::default();
        let mut total = 0.0;
        for &pos in &order {
            total += self.step(values, user, pos, 1.0, lr);
            stats.updates += 1;
            for _ in 0..self.config.neg_ratio {
                match sample_unseen(self.num_items, excluded, rng) {
                    Some(neg) => {
                        total += self.step(values, user, neg, 0.0, lr);
                        stats.updates += 1;
                    }
                    None => stats.skipped += 1,
                }
            }
        }
        stats.mean_loss = total / stats.updates as f64;
        Ok(stats)
    }
}
