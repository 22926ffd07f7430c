#![allow(dead_code)]

pub mod gradcheck;

use std::path::PathBuf;

use gossiprec::data::{split_user, NodeSplit, SplitConfig, SplitMode};
use gossiprec::model::gmf::{GmfConfig, GmfModel};
use gossiprec::model::{ItemId, Recommender};
use gossiprec::rng::SimRng;
use rand::seq::index;
use rand::{Rng, SeedableRng};

/// Users fall into `groups` taste groups; each group draws most of its
/// items from its own slice of the catalogue.
pub fn synthetic_histories(users: usize, items: usize, groups: usize, per_user: usize, seed: u64) -> Vec<Vec<ItemId>> {
    let mut rng = SimRng::seed_from_u64(seed);
    let slice = items / groups;
    (0..users)
        .map(|u| {
            let g = u % groups;
            let own = per_user * 4 / 5;
            let mut picked: Vec<ItemId> = index::sample(&mut rng, slice, own)
                .into_iter()
                .map(|i| (g * slice + i) as ItemId)
                .collect();
            while picked.len() < per_user {
                let i = rng.gen_range(0..items) as ItemId;
                if !picked.contains(&i) {
                    picked.push(i);
                }
            }
            picked
        })
        .collect()
}

pub fn synthetic_splits(users: usize, items: usize, groups: usize, per_user: usize, seed: u64) -> Vec<NodeSplit> {
    let config = SplitConfig {
        train_ratio: 0.85,
        negatives: 100,
    };
    synthetic_histories(users, items, groups, per_user, seed)
        .iter()
        .enumerate()
        .map(|(u, h)| {
            let mut rng = SimRng::seed_from_u64(seed ^ (u as u64 + 1) * 7919);
            split_user(u as u32, h, items, SplitMode::Random, &config, &mut rng).unwrap()
        })
        .collect()
}

pub fn gmf(items: usize) -> Recommender {
    Recommender::Gmf(GmfModel::new(items, GmfConfig::default()))
}

/// Location of the ML-100k ratings file, if present.
pub fn ml100k() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("GOSSIPREC_ML100K").map(PathBuf::from),
        Some(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k/u.data")),
    ];
    candidates.into_iter().flatten().find(|p| p.is_file())
}

/// Relative agreement used by the finite-difference checks.
pub fn rel_close(analytic: f64, numeric: f64, tol: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        (analytic - numeric).abs() < 1e-9
    } else {
        (analytic - numeric).abs() / scale <= tol
    }
}

/// Brute-force reference for one ranked candidate list.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceMetrics {
    pub position: usize,
    pub hit: f64,
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Ranks by sorting every candidate (higher score first, ties to the lower
/// id), then scores the single target against cutoff `k`.
pub fn reference_metrics(candidates: &[ItemId], scores: &[f64], target: ItemId, k: usize) -> ReferenceMetrics {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(candidates[a].cmp(&candidates[b]))
    });
    let position = order.iter().position(|&i| candidates[i] == target).unwrap();
    let hits = order[..k.min(order.len())]
        .iter()
        .filter(|&&i| candidates[i] == target)
        .count() as f64;
    let precision = hits / k as f64;
    let recall = hits;
    let f1 = if hits == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    ReferenceMetrics {
        position,
        hit: hits,
        ndcg: if hits > 0.0 { 1.0 / ((position + 2) as f64).log2() } else { 0.0 },
        precision,
        recall,
        f1,
    }
}

/// Mean HR@20 of freshly initialised GMF models scoring one target among
/// 100 negatives, one model per trial.
pub fn random_scorer_hr20(trials: usize, seed: u64) -> f64 {
    use gossiprec::eval::{evaluate_node, Probe, Scratch};
    use gossiprec::model::Query;

    let model = GmfModel::new(
        101,
        GmfConfig {
            dim: 8,
            init_scale: 1.0,
            ..GmfConfig::default()
        },
    );
    let rec = Recommender::Gmf(model.clone());
    let negatives: Vec<ItemId> = (1..=100).collect();
    let probe = Probe::new(Query { prev: None, target: 0 }, &negatives);
    let mut rng = SimRng::seed_from_u64(seed);
    let mut scratch = Scratch::default();
    let mut total = 0.0;
    for _ in 0..trials {
        let shared = model.init_shared(&mut rng);
        let user = model.init_user(&mut rng);
        let m = evaluate_node(&rec, &shared, &user, std::slice::from_ref(&probe), &[20], &mut scratch).unwrap();
        total += m.hr[0];
    }
    total / trials as f64
}

/// Random candidate list with coarse integer scores so that ties occur.
pub fn random_ranked_list(rng: &mut SimRng) -> (Vec<ItemId>, Vec<f64>) {
    let n = rng.gen_range(2..=120);
    let ids: Vec<ItemId> = index::sample(rng, 5000, n).into_iter().map(|i| i as ItemId).collect();
    let levels = rng.gen_range(2..=200);
    let scores = (0..n).map(|_| rng.gen_range(0..levels) as f64 / 7.0).collect();
    (ids, scores)
}

/// Compares every single-target metric with [`reference_metrics`] on
/// `lists` random ranked lists: exact for HR, precision and recall, 1e-12
/// for NDCG and F1.
pub fn check_metric_oracles(lists: usize, seed: u64) -> Result<(), String> {
    use gossiprec::eval::{hr_at, metrics_from_positions, ndcg_at, precision_recall_f1_at};
    use gossiprec::model::{rank_items, rank_position, ItemSet};

    let mut rng = SimRng::seed_from_u64(seed);
    for case in 0..lists {
        let (ids, scores) = random_ranked_list(&mut rng);
        let target = ids[rng.gen_range(0..ids.len())];
        let k = rng.gen_range(1..=25);
        let oracle = reference_metrics(&ids, &scores, target, k);
        let fail = |what: &str| Err(format!("list {case}: {what}"));

        let pos = rank_position(&ids, &scores, target, true).ok_or("target not ranked")?;
        if pos != oracle.position {
            return fail("rank position");
        }
        let top = rank_items(&ids, &scores, k, true);
        if hr_at(&top, target) != oracle.hit {
            return fail("hr_at");
        }
        let m = metrics_from_positions(&[pos], &[k]).map_err(|e| e.to_string())?;
        if m.hr[0] != oracle.hit || m.precision[0] != oracle.precision || m.recall[0] != oracle.recall {
            return fail("integer-hit metrics");
        }
        if (m.ndcg[0] - oracle.ndcg).abs() > 1e-12 || (m.f1[0] - oracle.f1).abs() > 1e-12 {
            return fail("NDCG or F1");
        }
        let (p, r, f) = precision_recall_f1_at(&top, &ItemSet::new(vec![target]), k).map_err(|e| e.to_string())?;
        if p != oracle.precision || r != oracle.recall || (f - oracle.f1).abs() > 1e-12 {
            return fail("precision_recall_f1_at");
        }
        if (ndcg_at(top.iter().position(|&i| i == target)) - oracle.ndcg).abs() > 1e-12 {
            return fail("ndcg_at");
        }
    }
    Ok(())
}

fn random_params(rng: &mut SimRng, n: usize) -> gossiprec::params::ParamVector {
    let scale = 10f64.powi(rng.gen_range(-3..=2));
    gossiprec::params::ParamVector::from_flat((0..n).map(|_| rng.gen_range(-scale..scale)).collect())
}

/// Convex-combination invariants of every pairwise aggregator and the
/// agreement of all three at equal weights.
pub fn check_aggregation_algebra(pairs: usize, seed: u64) -> Result<(), String> {
    use gossiprec::aggregation::{decentralized_fedavg, model_age_based, performance_merge, reptile_step, weighted_pair};
    use gossiprec::params::{GossipModel, ModelAge};

    let mut rng = SimRng::seed_from_u64(seed);
    for case in 0..pairs {
        let n = rng.gen_range(1..64);
        let m1 = random_params(&mut rng, n);
        let m2 = random_params(&mut rng, n);
        let w1 = rng.gen_range(0.0..1.0);
        let w2 = rng.gen_range(0.0..1.0);
        let fail = |what: &str| Err(format!("pair {case}: {what}"));

        let merged = weighted_pair(&m1, w1, &m2, w2).map_err(|e| e.to_string())?.params;
        let a = w1 / (w1 + w2);
        for ((x, y), z) in m1.values().iter().zip(m2.values()).zip(merged.values()) {
            let lo = x.min(*y);
            let hi = x.max(*y);
            let tol = 1e-12 * (1.0 + x.abs().max(y.abs()));
            if *z < lo - tol || *z > hi + tol {
                return fail("merged value outside the segment");
            }
            if (z - (a * x + (1.0 - a) * y)).abs() > tol {
                return fail("merge is not the normalised weighted mean");
            }
        }
        let swapped = weighted_pair(&m2, w2, &m1, w1).map_err(|e| e.to_string())?.params;
        if merged.values().iter().zip(swapped.values()).any(|(p, q)| (p - q).abs() > 1e-12 * (1.0 + p.abs())) {
            return fail("merge depends on argument order");
        }
        let scaled = weighted_pair(&m1, 3.5 * w1, &m2, 3.5 * w2).map_err(|e| e.to_string())?.params;
        if merged.values().iter().zip(scaled.values()).any(|(p, q)| (p - q).abs() > 1e-12 * (1.0 + p.abs())) {
            return fail("merge is not scale invariant in the weights");
        }
        if weighted_pair(&m1, 0.0, &m2, w2 + 0.1).map_err(|e| e.to_string())?.params != m2 {
            return fail("zero local weight does not return the received model");
        }
        if weighted_pair(&m1, w1 + 0.1, &m2, 0.0).map_err(|e| e.to_string())?.params != m1 {
            return fail("zero received weight does not return the local model");
        }
        let same = weighted_pair(&m1, w1, &m1, w2).map_err(|e| e.to_string())?.params;
        if same.values().iter().zip(m1.values()).any(|(p, q)| (p - q).abs() > 1e-12 * (1.0 + q.abs())) {
            return fail("merging a model with itself changes it");
        }

        // equal weights: all three aggregators give the midpoint
        let count = rng.gen_range(1..500u64);
        let age = ModelAge(rng.gen_range(1..500u64));
        let perf = rng.gen_range(0.01..1.0);
        let fed = decentralized_fedavg(&m1, &m2, count, count).map_err(|e| e.to_string())?.params;
        let aged = model_age_based(&m1, &m2, age, age).map_err(|e| e.to_string())?.params;
        let local = GossipModel::new(m1.clone(), 0, count);
        let received = GossipModel::new(m2.clone(), 1, count);
        let out = performance_merge(&local, &received, perf, perf).map_err(|e| e.to_string())?;
        for i in 0..n {
            let mid = 0.5 * (m1.values()[i] + m2.values()[i]);
            let tol = 1e-12 * (1.0 + mid.abs());
            for (name, v) in [("fedavg", &fed), ("age", &aged), ("performance", &out.merged)] {
                if (v.values()[i] - mid).abs() > tol {
                    return fail(&format!("{name} differs from the midpoint at equal weights"));
                }
            }
        }

        let eps = rng.gen_range(0.0..1.0);
        if reptile_step(&m1, &m2, 0.0).map_err(|e| e.to_string())? != m1 {
            return fail("reptile step 0 moved the model");
        }
        if reptile_step(&m1, &m2, 1.0).map_err(|e| e.to_string())? != m2 {
            return fail("reptile step 1 did not reach the target");
        }
        let step = reptile_step(&m1, &m2, eps).map_err(|e| e.to_string())?;
        for ((x, y), z) in m1.values().iter().zip(m2.values()).zip(step.values()) {
            if (z - (x + eps * (y - x))).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                return fail("reptile step is not linear in eps");
            }
        }
    }
    Ok(())
}

/// With alpha 0 and a warm ledger the view is the ledger top; with alpha 1
/// the ledger has no influence on the drawn view.
pub fn check_peer_sampling_contract(trials: usize, seed: u64) -> Result<(), String> {
    use gossiprec::peersampling::{random_view, update_view, PerfLedger};
    use rand::seq::SliceRandom;

    let mut rng = SimRng::seed_from_u64(seed);
    for trial in 0..trials {
        let nodes = rng.gen_range(8..400usize);
        let v = rng.gen_range(1..=6usize.min(nodes - 1));
        let owner = rng.gen_range(0..nodes) as u32;
        let view = random_view(owner, nodes, v, &mut rng).map_err(|e| e.to_string())?;
        let senders = rng.gen_range(v..nodes);
        let mut pool: Vec<u32> = (0..nodes as u32).filter(|&n| n != owner).collect();
        pool.shuffle(&mut rng);
        let mut records: Vec<(u32, f64, f64)> = pool[..senders]
            .iter()
            .map(|&n| (n, (rng.gen_range(0..20) as f64) / 19.0, rng.gen_range(0.0..1000.0)))
            .collect();
        let mut ledger = PerfLedger::new();
        for &(n, p, t) in &records {
            ledger.record(n, p, t).map_err(|e| e.to_string())?;
        }
        // oracle: sort by performance, then recency, then id
        let mut sorted = records.clone();
        sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(&b.0)));
        let expect: Vec<u32> = sorted.iter().take(v).map(|r| r.0).collect();
        if ledger.top(v) != expect {
            return Err(format!("trial {trial}: ledger order differs from the sort oracle"));
        }

        let neighbour: Vec<u32> = pool[..v.min(pool.len())].to_vec();
        let stream = rng.gen::<u64>();
        let exploit = update_view(&view, &ledger, 0.0, |_| Some(neighbour.as_slice()), nodes, &mut SimRng::seed_from_u64(stream))
            .map_err(|e| e.to_string())?;
        let mut got = exploit.peers().to_vec();
        got.sort_unstable();
        let mut want = expect.clone();
        want.sort_unstable();
        if got != want {
            return Err(format!("trial {trial}: alpha 0 view {got:?} is not the ledger top {want:?}"));
        }

        let explore = |ledger: &PerfLedger| {
            update_view(&view, ledger, 1.0, |_| Some(neighbour.as_slice()), nodes, &mut SimRng::seed_from_u64(stream))
                .map(|v| v.peers().to_vec())
                .map_err(|e| e.to_string())
        };
        let base = explore(&ledger)?;
        records.shuffle(&mut rng);
        let mut permuted = PerfLedger::new();
        for &(n, _, t) in &records {
            permuted.record(n, rng.gen_range(0.0..=1.0), t).map_err(|e| e.to_string())?;
        }
        if explore(&permuted)? != base || explore(&PerfLedger::new())? != base {
            return Err(format!("trial {trial}: alpha 1 view depends on the ledger"));
        }
    }
    Ok(())
}

/// In-memory dataset from `(user, item)` pairs; record `i` gets timestamp `i`.
pub fn dataset_from_pairs(pairs: &[(u32, u32)]) -> gossiprec::data::InteractionDataset {
    use gossiprec::data::{InteractionDataset, Record};
    let mut ds = InteractionDataset::default();
    for (t, &(u, i)) in pairs.iter().enumerate() {
        let user = ds.users.intern(&u.to_string());
        let item = ds.items.intern(&i.to_string());
        ds.records.push(Record {
            user,
            item,
            value: 1.0,
            timestamp: t as i64,
            coords: None,
            category: None,
        });
    }
    ds
}

/// Clustered synthetic dataset in memory, see [`synthetic_histories`].
pub fn synthetic_dataset(users: usize, items: usize, groups: usize, per_user: usize, seed: u64) -> gossiprec::data::InteractionDataset {
    let pairs: Vec<(u32, u32)> = synthetic_histories(users, items, groups, per_user, seed)
        .into_iter()
        .enumerate()
        .flat_map(|(u, h)| h.into_iter().map(move |i| (u as u32, i)))
        .collect();
    dataset_from_pairs(&pairs)
}
