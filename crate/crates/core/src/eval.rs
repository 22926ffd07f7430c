//! Ranking metrics and per-node evaluation.
//!
//! Each evaluated item is ranked among itself plus a fixed pool of 100
//! items the user never interacted with. Hit ratio and NDCG follow the usual
//! single-target definitions; precision, recall and F1 treat the target as
//! the only relevant item of its candidate list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rank_position, ItemId, ItemSet, Query, Recommender};
use crate::params::ParamVector;

pub const DEFAULT_KS: [usize; 3] = [5, 10, 20];

/// One ranking task: `candidates[0]` is the target, the rest are negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    pub prev: Option<ItemId>,
    pub candidates: Vec<ItemId>,
}

impl Probe {
    pub fn new(query: Query, negatives: &[ItemId]) -> Self {
        let mut candidates = Vec::with_capacity(negatives.len() + 1);
        candidates.push(query.target);
        candidates.extend_from_slice(negatives);
        Probe {
            prev: query.prev,
            candidates,
        }
    }

    pub fn target(&self) -> ItemId {
        self.candidates[0]
    }

    pub fn negatives(&self) -> &[ItemId] {
        &self.candidates[1..]
    }

    pub fn query(&self) -> Query {
        Query {
            prev: self.prev,
            target: self.target(),
        }
    }
}

pub fn hr_at(ranked: &[ItemId], target: ItemId) -> f64 {
    if ranked.contains(&target) {
        1.0
    } else {
        0.0
    }
}

/// `log 2 / log(p + 2)` for a hit at 0-based position `p`, zero on a miss.
pub fn ndcg_at(position: Option<usize>) -> f64 {
    match position {
        Some(p) => std::f64::consts::LN_2 / ((p + 2) as f64).ln(),
        None => 0.0,
    }
}

/// Precision, recall and F1 of a top-`r` list. Fails when `relevant` is
/// empty since recall is undefined.
pub fn precision_recall_f1_at(ranked: &[ItemId], relevant: &ItemSet, r: usize) -> Result<(f64, f64, f64)> {
    if relevant.is_empty() {
        return Err(Error::domain("recall undefined for an empty relevant set"));
    }
    if r == 0 {
        return Err(Error::domain("cutoff r must be positive"));
    }
    let found = ranked.iter().take(r).filter(|&&i| relevant.contains(i)).count() as f64;
    let p = found / r as f64;
    let rec = found / relevant.len() as f64;
    Ok((p, rec, f1(p, rec)))
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Metrics of one node at each cutoff in `ks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub ks: Vec<usize>,
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
}

impl NodeMetrics {
    fn zeros(ks: &[usize]) -> Self {
        let z = vec![0.0; ks.len()];
        NodeMetrics {
            ks: ks.to_vec(),
            hr: z.clone(),
            ndcg: z.clone(),
            precision: z.clone(),
            recall: z.clone(),
            f1: z,
        }
    }

    /// Looks up a metric such as `hr@20` or `f1@10`.
    pub fn get(&self, name: &str) -> Option<f64> {
        let (metric, k) = name.split_once('@')?;
        let k: usize = k.parse().ok()?;
        let idx = self.ks.iter().position(|&x| x == k)?;
        let series = match metric {
            "hr" => &self.hr,
            "ndcg" => &self.ndcg,
            "precision" => &self.precision,
            "recall" => &self.recall,
            "f1" => &self.f1,
            _ => return None,
        };
        Some(series[idx])
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for metric in ["hr", "ndcg", "precision", "recall", "f1"] {
            for k in &self.ks {
                out.push(format!("{metric}@{k}"));
            }
        }
        out
    }
}

/// Reusable buffers for repeated evaluation.
#[derive(Debug, Default)]
pub struct Scratch {
    scores: Vec<f64>,
}

/// 0-based rank of each probe's target among its candidates.
pub fn target_positions(
    rec: &Recommender,
    shared: &ParamVector,
    user: &[f64],
    probes: &[Probe],
    scratch: &mut Scratch,
) -> Result<Vec<usize>> {
    let higher = rec.higher_is_better();
    probes
        .iter()
        .map(|probe| {
            rec.score_candidates(shared, user, probe.prev, &probe.candidates, &mut scratch.scores)?;
            Ok(rank_position(&probe.candidates, &scratch.scores, probe.target(), higher)
                .expect("target is always a candidate"))
        })
        .collect()
}

/// Averages per-probe metrics given each target's rank. Precision and
/// recall are averaged over probes, F1 is taken of the averages.
pub fn metrics_from_positions(positions: &[usize], ks: &[usize]) -> Result<NodeMetrics> {
    if positions.is_empty() {
        return Err(Error::domain("no probes to evaluate"));
    }
    let n = positions.len() as f64;
    let mut m = NodeMetrics::zeros(ks);
    for (j, &k) in ks.iter().enumerate() {
        let mut hits = 0.0;
        let mut gain = 0.0;
        for &p in positions {
            if p < k {
                hits += 1.0;
                gain += ndcg_at(Some(p));
            }
        }
        m.hr[j] = hits / n;
        m.ndcg[j] = gain / n;
        m.precision[j] = hits / (n * k as f64);
        m.recall[j] = hits / n;
        m.f1[j] = f1(m.precision[j], m.recall[j]);
    }
    Ok(m)
}

/// Ranks every test item of a node among its candidate pool and averages
/// the metrics over the node's test items.
pub fn evaluate_node(
    rec: &Recommender,
    shared: &ParamVector,
    user: &[f64],
    probes: &[Probe],
    ks: &[usize],
    scratch: &mut Scratch,
) -> Result<NodeMetrics> {
    let positions = target_positions(rec, shared, user, probes, scratch)?;
    metrics_from_positions(&positions, ks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cdf {
    /// `(x, fraction of values <= x)` for every distinct x, ascending.
    pub points: Vec<(f64, f64)>,
    /// `(percentile, value)` by nearest rank.
    pub percentiles: Vec<(f64, f64)>,
}

pub const PERCENTILES: [f64; 10] = [1.0, 5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0, 99.0, 99.9];

/// Nearest-rank percentile of already sorted values.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn cdf_and_percentiles(values: &[f64]) -> Cdf {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let y = (i + 1) as f64 / n as f64;
        match points.last_mut() {
            Some(last) if last.0 == x => last.1 = y,
            _ => points.push((x, y)),
        }
    }
    let percentiles = if n == 0 {
        Vec::new()
    } else {
        PERCENTILES.iter().map(|&p| (p, nearest_rank(&sorted, p))).collect()
    };
    Cdf { points, percentiles }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
