//! Pairwise model aggregation applied when a node receives a model.
//!
//! Every function here returns a segment-wise convex combination of its two
//! inputs. When both weights are zero the plain midpoint is used and the
//! result is flagged as degenerate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{metrics_from_positions, target_positions, Probe, Scratch};
use crate::model::{ModelFamily, Recommender};
use crate::params::{GossipModel, ModelAge, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregatorKind {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "age")]
    Age,
    #[serde(rename = "performance")]
    Performance,
    #[serde(rename = "reptile-decentralized")]
    ReptileDecentralized,
}

impl std::str::FromStr for AggregatorKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fedavg" => Ok(AggregatorKind::FedAvg),
            "age" => Ok(AggregatorKind::Age),
            "performance" => Ok(AggregatorKind::Performance),
            "reptile-decentralized" => Ok(AggregatorKind::ReptileDecentralized),
            other => Err(format!("unknown aggregator `{other}`")),
        }
    }
}

impl AggregatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggregatorKind::FedAvg => "fedavg",
            AggregatorKind::Age => "age",
            AggregatorKind::Performance => "performance",
            AggregatorKind::ReptileDecentralized => "reptile-decentralized",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub params: ParamVector,
    /// Both weights were zero and the midpoint was used instead.
    pub degenerate: bool,
}

/// `(w1 * m1 + w2 * m2) / (w1 + w2)`, element-wise.
pub fn weighted_pair(m1: &ParamVector, w1: f64, m2: &ParamVector, w2: f64) -> Result<Merge> {
    m1.check_layout(m2)?;
    if !(w1 >= 0.0 && w2 >= 0.0 && w1.is_finite() && w2.is_finite()) {
        return Err(Error::domain(format!("invalid aggregation weights {w1}, {w2}")));
    }
    let total = w1 + w2;
    let (a, b, degenerate) = if total > 0.0 {
        (w1 / total, w2 / total, false)
    } else {
        (0.5, 0.5, true)
    };
    let mut out = m1.clone();
    for (o, y) in out.values_mut().iter_mut().zip(m2.values()) {
        *o = a * *o + b * y;
    }
    Ok(Merge {
        params: out,
        degenerate,
    })
}

/// Sample-count weighted average of two models.
pub fn decentralized_fedavg(m1: &ParamVector, m2: &ParamVector, n1: u64, n2: u64) -> Result<Merge> {
    let merge = weighted_pair(m1, n1 as f64, m2, n2 as f64)?;
    if merge.degenerate {
        log::debug!("fedavg with zero sample counts, using midpoint");
    }
    Ok(merge)
}

/// Age weighted average: older models count more.
pub fn model_age_based(m1: &ParamVector, m2: &ParamVector, age1: ModelAge, age2: ModelAge) -> Result<Merge> {
    let merge = weighted_pair(m1, age1.0 as f64, m2, age2.0 as f64)?;
    if merge.degenerate {
        log::debug!("age-based aggregation of two fresh models, using midpoint");
    }
    Ok(merge)
}

/// Moves `init` a fraction `eps` of the way towards `locally_trained`.
pub fn reptile_step(init: &ParamVector, locally_trained: &ParamVector, eps: f64) -> Result<ParamVector> {
    init.check_layout(locally_trained)?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain(format!("reptile step {eps} outside [0, 1]")));
    }
    if eps == 1.0 {
        return Ok(locally_trained.clone());
    }
    let mut out = init.clone();
    for (o, t) in out.values_mut().iter_mut().zip(locally_trained.values()) {
        *o += eps * (t - *o);
    }
    Ok(out)
}

/// Quality of `shared` (paired with the local user embedding) on the
/// weighting set: HR@k for GMF, F1@k for PRME-G.
pub fn evaluate_on_weighting_set(
    rec: &Recommender,
    shared: &ParamVector,
    user: &[f64],
    ws: &[Probe],
    k: usize,
    scratch: &mut Scratch,
) -> Result<f64> {
    if ws.is_empty() {
        return Err(Error::domain("empty weighting set"));
    }
    let positions = target_positions(rec, shared, user, ws, scratch)?;
    let m = metrics_from_positions(&positions, &[k])?;
    Ok(match rec.family() {
        ModelFamily::Gmf => m.hr[0],
        ModelFamily::Prmeg => m.f1[0],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationOutcome {
    pub merged: ParamVector,
    pub received_perf: f64,
    pub local_perf: f64,
    pub new_age: ModelAge,
    pub degenerate: bool,
}

/// Weighs the local and the received model by how well each ranks the
/// node's weighting set. The caller trains the merged model afterwards.
pub fn performance_based_aggregate(
    rec: &Recommender,
    local: &GossipModel,
    received: &GossipModel,
    user: &[f64],
    ws: &[Probe],
    k: usize,
    scratch: &mut Scratch,
) -> Result<AggregationOutcome> {
    local.params.check_layout(&received.params)?;
    let received_perf = evaluate_on_weighting_set(rec, &received.params, user, ws, k, scratch)?;
    let local_perf = evaluate_on_weighting_set(rec, &local.params, user, ws, k, scratch)?;
    Ok(performance_merge(local, received, local_perf, received_perf)?)
}

/// Merge step of [`performance_based_aggregate`] once both scores are known.
pub fn performance_merge(
    local: &GossipModel,
    received: &GossipModel,
    local_perf: f64,
    received_perf: f64,
) -> Result<AggregationOutcome> {
    let merge = weighted_pair(&local.params, local_perf, &received.params, received_perf)?;
    if merge.degenerate {
        log::debug!("both models score zero on the weighting set, using midpoint");
    }
    Ok(AggregationOutcome {
        merged: merge.params,
        received_perf,
        local_perf,
        new_age: local.age.max(received.age),
        degenerate: merge.degenerate,
    })
}
