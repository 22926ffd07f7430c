//! Personalized ranking metric embedding with a geographic factor.
//!
//! Locations live in two latent spaces: a sequential space where consecutive
//! visits sit close together, and a preference space shared with the user.
//! The distance of a candidate `c` reached from `prev` is
//!
//! ```text
//! D(u, prev, c) = s(geo) * ( w * |seq[prev] - seq[c]|^2
//!                          + (1 - w) * |pref_user - pref_loc[c]|^2 )
//! s(geo) = 1 if geo <= tau else geo / tau
//! ```
//!
//! Lower is more likely. Training pushes observed transitions below a
//! sampled unobserved one via `log sigmoid(D_neg - D_pos)` with L2 decay.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{log_sigmoid, sample_unseen, sigmoid, EpochStats, ItemId, ItemSet, Query};
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::rng::SimRng;

pub const SEQ_EMBEDDINGS: &str = "seq_embeddings";
pub const PREF_LOC_EMBEDDINGS: &str = "pref_loc_embeddings";

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance in kilometres between two `(lat, lon)` points
/// given in degrees.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrmegConfig {
    pub dim: usize,
    /// Mixing weight of the sequential space, in `[0, 1]`.
    pub mix_weight: f64,
    pub lr: f64,
    pub l2: f64,
    pub tau_km: f64,
    pub init_scale: f64,
}

impl Default for PrmegConfig {
    fn default() -> Self {
        PrmegConfig {
            dim: 32,
            mix_weight: 0.2,
            lr: 0.005,
            l2: 0.03,
            tau_km: 1.0,
            init_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrmegModel {
    pub num_locations: usize,
    pub config: PrmegConfig,
    /// `(lat, lon)` per location; absent coordinates disable the spatial
    /// factor.
    pub coords: Option<Arc<Vec<(f64, f64)>>>,
}

/// Which embedding row a gradient entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Row {
    Seq(ItemId),
    PrefLoc(ItemId),
    User,
}

/// Sparse gradient of `log sigmoid(z)` over the touched rows.
#[derive(Debug, Clone, Default)]
pub struct PrmegGrad {
    pub objective: f64,
    pub rows: Vec<(Row, Vec<f64>)>,
}

impl PrmegGrad {
    fn add(&mut self, row: Row, scale: f64, diff: &[f64]) {
        let slot = match self.rows.iter().position(|(r, _)| *r == row) {
            Some(i) => i,
            None => {
                self.rows.push((row, vec![0.0; diff.len()]));
                self.rows.len() - 1
            }
        };
        for (g, d) in self.rows[slot].1.iter_mut().zip(diff) {
            *g += scale * d;
        }
    }

    pub fn row(&self, row: Row) -> Option<&[f64]> {
        self.rows.iter().find(|(r, _)| *r == row).map(|(_, g)| g.as_slice())
    }
}

impl PrmegModel {
    pub fn new(num_locations: usize, config: PrmegConfig) -> Self {
        PrmegModel {
            num_locations,
            config,
            coords: None,
        }
    }

    pub fn with_coords(mut self, coords: Arc<Vec<(f64, f64)>>) -> Self {
        self.coords = Some(coords);
        self
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn layout(&self) -> ParamVector {
        let n = self.num_locations * self.dim();
        ParamVector::zeros(&[(SEQ_EMBEDDINGS, n), (PREF_LOC_EMBEDDINGS, n)])
    }

    pub fn init_shared(&self, rng: &mut SimRng) -> ParamVector {
        let mut p = self.layout();
        let s = self.config.init_scale;
        for v in p.values_mut() {
            *v = if s > 0.0 { rng.gen_range(-s..s) } else { 0.0 };
        }
        p
    }

    pub fn init_user(&self, rng: &mut SimRng) -> Vec<f64> {
        let s = self.config.init_scale;
        (0..self.dim())
            .map(|_| if s > 0.0 { rng.gen_range(-s..s) } else { 0.0 })
            .collect()
    }

    fn check(&self, shared: &ParamVector, user: &[f64]) -> Result<()> {
        if shared.len() != 2 * self.num_locations * self.dim() {
            return Err(Error::domain(format!(
                "PRME-G parameter vector has {} values, expected {}",
                shared.len(),
                2 * self.num_locations * self.dim()
            )));
        }
        if user.len() != self.dim() {
            return Err(Error::domain("user embedding dimension mismatch"));
        }
        if !(0.0..=1.0).contains(&self.config.mix_weight) {
            return Err(Error::domain("mix weight outside [0, 1]"));
        }
        Ok(())
    }

    fn check_loc(&self, loc: ItemId) -> Result<()> {
        if (loc as usize) < self.num_locations {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "location {loc} outside vocabulary of {}",
                self.num_locations
            )))
        }
    }

    fn seq_row<'a>(&self, v: &'a [f64], loc: ItemId) -> &'a [f64] {
        let d = self.dim();
        &v[loc as usize * d..(loc as usize + 1) * d]
    }

    fn pref_row<'a>(&self, v: &'a [f64], loc: ItemId) -> &'a [f64] {
        let d = self.dim();
        let base = self.num_locations * d;
        &v[base + loc as usize * d..base + (loc as usize + 1) * d]
    }

    fn row_offset(&self, row: Row) -> Option<usize> {
        let d = self.dim();
        match row {
            Row::Seq(l) => Some(l as usize * d),
            Row::PrefLoc(l) => Some((self.num_locations + l as usize) * d),
            Row::User => None,
        }
    }

    pub fn spatial_factor(&self, geo_km: f64) -> f64 {
        if geo_km <= self.config.tau_km {
            1.0
        } else {
            geo_km / self.config.tau_km
        }
    }

    /// Geographic distance between two locations, zero without coordinates.
    pub fn geo_distance(&self, a: ItemId, b: ItemId) -> f64 {
        match &self.coords {
            Some(c) => haversine_km(c[a as usize], c[b as usize]),
            None => 0.0,
        }
    }

    fn raw_score(&self, v: &[f64], user: &[f64], prev: Option<ItemId>, cand: ItemId, geo_km: f64) -> f64 {
        let w = self.config.mix_weight;
        let seq = match prev {
            Some(p) => sq_dist(self.seq_row(v, p), self.seq_row(v, cand)),
            None => 0.0,
        };
        let pref = sq_dist(user, self.pref_row(v, cand));
        self.spatial_factor(geo_km) * (w * seq + (1.0 - w) * pref)
    }

    /// Distance-style score of visiting `cand` after `prev`; lower ranks
    /// first. Without a previous location only the preference term counts.
    pub fn score(
        &self,
        shared: &ParamVector,
        user: &[f64],
        prev: Option<ItemId>,
        cand: ItemId,
        geo_km: f64,
    ) -> Result<f64> {
        self.check(shared, user)?;
        if let Some(p) = prev {
            self.check_loc(p)?;
        }
        self.check_loc(cand)?;
        if !(geo_km >= 0.0) {
            return Err(Error::domain("geographic distance must be non-negative"));
        }
        Ok(self.raw_score(shared.values(), user, prev, cand, geo_km))
    }

    pub fn scores(
        &self,
        shared: &ParamVector,
        user: &[f64],
        prev: Option<ItemId>,
        candidates: &[ItemId],
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.check(shared, user)?;
        if let Some(p) = prev {
            self.check_loc(p)?;
        }
        out.clear();
        for &c in candidates {
            self.check_loc(c)?;
            let geo = prev.map_or(0.0, |p| self.geo_distance(p, c));
            out.push(self.raw_score(shared.values(), user, prev, c, geo));
        }
        Ok(())
    }

    /// `log sigmoid(D(neg) - D(pos))` and its gradient with respect to
    /// every touched row. Distances are geographic, in kilometres.
    #[allow(clippy::too_many_arguments)]
    pub fn log_sigmoid_grad(
        &self,
        shared: &ParamVector,
        user: &[f64],
        prev: Option<ItemId>,
        pos: ItemId,
        neg: ItemId,
        geo_pos: f64,
        geo_neg: f64,
    ) -> Result<PrmegGrad> {
        self.check(shared, user)?;
        for l in prev.into_iter().chain([pos, neg]) {
            self.check_loc(l)?;
        }
        let v = shared.values();
        let w = self.config.mix_weight;
        let d_pos = self.raw_score(v, user, prev, pos, geo_pos);
        let d_neg = self.raw_score(v, user, prev, neg, geo_neg);
        let z = d_neg - d_pos;
        let g = 1.0 - sigmoid(z);
        let mut grad = PrmegGrad {
            objective: log_sigmoid(z),
            rows: Vec::with_capacity(6),
        };
        // d/dTheta log sigmoid(z) = g * (dD_neg - dD_pos)
        for (loc, geo, sign) in [(neg, geo_neg, 1.0), (pos, geo_pos, -1.0)] {
            let s = self.spatial_factor(geo);
            if let Some(p) = prev {
                let diff: Vec<f64> = self
                    .seq_row(v, p)
                    .iter()
                    .zip(self.seq_row(v, loc))
                    .map(|(a, b)| a - b)
                    .collect();
                let c = sign * g * 2.0 * s * w;
                grad.add(Row::Seq(p), c, &diff);
                grad.add(Row::Seq(loc), -c, &diff);
            }
            let diff: Vec<f64> = user
                .iter()
                .zip(self.pref_row(v, loc))
                .map(|(a, b)| a - b)
                .collect();
            let c = sign * g * 2.0 * s * (1.0 - w);
            grad.add(Row::User, c, &diff);
            grad.add(Row::PrefLoc(loc), -c, &diff);
        }
        Ok(grad)
    }

    /// One ascent step `theta += lr * (grad - 2 * l2 * theta)` on every
    /// touched row. Returns the pre-step objective.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &self,
        shared: &mut ParamVector,
        user: &mut [f64],
        prev: Option<ItemId>,
        pos: ItemId,
        neg: ItemId,
        geo_pos: f64,
        geo_neg: f64,
    ) -> Result<f64> {
        let grad = self.log_sigmoid_grad(shared, user, prev, pos, neg, geo_pos, geo_neg)?;
        let (lr, l2) = (self.config.lr, self.config.l2);
        if lr == 0.0 {
            return Ok(grad.objective);
        }
        let d = self.dim();
        let values = shared.values_mut();
        for (row, g) in &grad.rows {
            let target: &mut [f64] = match self.row_offset(*row) {
                Some(off) => &mut values[off..off + d],
                None => user,
            };
            for (t, gk) in target.iter_mut().zip(g) {
                *t += lr * (gk - 2.0 * l2 * *t);
            }
        }
        Ok(grad.objective)
    }

    /// One pass over the training transitions. Observations for which no
    /// negative location exists are skipped and counted.
    pub fn train_epoch(
        &self,
        shared: &mut ParamVector,
        user: &mut [f64],
        train: &[Query],
        excluded: &ItemSet,
        rng: &mut SimRng,
    ) -> Result<EpochStats> {
        self.check(shared, user)?;
        if train.is_empty() {
            log::warn!("PRME-G training skipped: empty training set");
            return Ok(EpochStats {
                empty: true,
                ..Default::default()
            });
        }
        let mut order = train.to_vec();
        order.shuffle(rng);
        let mut stats = EpochStats::default();
        let mut total = 0.0;
        for q in order {
            let Some(neg) = sample_unseen(self.num_locations, excluded, rng) else {
                stats.skipped += 1;
                continue;
            };
            let (gp, gn) = match q.prev {
                Some(p) => (self.geo_distance(p, q.target), self.geo_distance(p, neg)),
                None => (0.0, 0.0),
            };
            total -= self.update(shared, user, q.prev, q.target, neg, gp, gn)?;
            stats.updates += 1;
        }
        stats.mean_loss = if stats.updates > 0 {
            total / stats.updates as f64
        } else {
            0.0
        };
        Ok(stats)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
