mod common;

use common::{check_metric_oracles, random_ranked_list, random_scorer_hr20, reference_metrics};
use gossiprec::eval::{
    cdf_and_percentiles, metrics_from_positions, precision_recall_f1_at, PERCENTILES,
};
use gossiprec::model::{rank_items, rank_position, ItemId, ItemSet};
use gossiprec::rng::SimRng;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

#[test]
fn single_target_metrics_match_brute_force() {
    if let Err(e) = check_metric_oracles(1000, 7) {
        panic!("{e}");
    }
}

#[test]
fn lower_is_better_ranking_mirrors_negated_scores() {
    let mut rng = SimRng::seed_from_u64(8);
    for _ in 0..200 {
        let (ids, scores) = random_ranked_list(&mut rng);
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let target = ids[rng.gen_range(0..ids.len())];
        assert_eq!(
            rank_position(&ids, &scores, target, false),
            rank_position(&ids, &neg, target, true)
        );
        assert_eq!(rank_items(&ids, &scores, 10, false), rank_items(&ids, &neg, 10, true));
    }
}

#[test]
fn node_averages_match_brute_force() {
    let mut rng = SimRng::seed_from_u64(9);
    let ks = [5, 10, 20];
    for _ in 0..200 {
        let probes = rng.gen_range(1..=15);
        let mut positions = Vec::new();
        let mut refs = vec![Vec::new(); ks.len()];
        for _ in 0..probes {
            let (ids, scores) = random_ranked_list(&mut rng);
            let target = ids[rng.gen_range(0..ids.len())];
            positions.push(rank_position(&ids, &scores, target, true).unwrap());
            for (j, &k) in ks.iter().enumerate() {
                refs[j].push(reference_metrics(&ids, &scores, target, k));
            }
        }
        let m = metrics_from_positions(&positions, &ks).unwrap();
        for (j, r) in refs.iter().enumerate() {
            let n = r.len() as f64;
            let hr = r.iter().map(|x| x.hit).sum::<f64>() / n;
            let ndcg = r.iter().map(|x| x.ndcg).sum::<f64>() / n;
            let p = r.iter().map(|x| x.precision).sum::<f64>() / n;
            let rec = r.iter().map(|x| x.recall).sum::<f64>() / n;
            let f1 = if p + rec == 0.0 { 0.0 } else { 2.0 * p * rec / (p + rec) };
            assert_eq!(m.hr[j], hr);
            assert!((m.ndcg[j] - ndcg).abs() <= 1e-12);
            assert!((m.precision[j] - p).abs() <= 1e-12);
            assert_eq!(m.recall[j], rec);
            assert!((m.f1[j] - f1).abs() <= 1e-12);
        }
    }
}

#[test]
fn multi_item_precision_recall_match_brute_force() {
    let mut rng = SimRng::seed_from_u64(10);
    for _ in 0..1000 {
        let (ids, scores) = random_ranked_list(&mut rng);
        let r = rng.gen_range(1..=30);
        let ranked = rank_items(&ids, &scores, ids.len(), true);
        let relevant: Vec<ItemId> = ids.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
        if relevant.is_empty() {
            continue;
        }
        let hits = ranked.iter().take(r).filter(|i| relevant.contains(i)).count() as f64;
        let p = hits / r as f64;
        let rec = hits / relevant.len() as f64;
        let f = if hits == 0.0 { 0.0 } else { 2.0 * p * rec / (p + rec) };
        let (p2, r2, f2) = precision_recall_f1_at(&ranked, &ItemSet::new(relevant), r).unwrap();
        assert_eq!(p2, p);
        assert_eq!(r2, rec);
        assert!((f2 - f).abs() <= 1e-12);
    }
}

/// Smallest value whose empirical CDF reaches `pct` percent.
fn percentile_oracle(values: &[f64], pct: f64) -> f64 {
    let n = values.len() as f64;
    let mut candidates = values.to_vec();
    candidates.sort_by(f64::total_cmp);
    *candidates
        .iter()
        .find(|&&x| values.iter().filter(|&&v| v <= x).count() as f64 / n >= pct / 100.0 - 1e-12)
        .unwrap()
}

proptest! {
    #[test]
    fn percentiles_match_oracle(values in prop::collection::vec(0u32..50, 1..200)) {
        let values: Vec<f64> = values.into_iter().map(|v| v as f64 / 10.0).collect();
        let cdf = cdf_and_percentiles(&values);
        prop_assert_eq!(cdf.percentiles.len(), PERCENTILES.len());
        for (p, v) in cdf.percentiles {
            prop_assert_eq!(v, percentile_oracle(&values, p));
        }
        let mut last = 0.0;
        for (x, y) in &cdf.points {
            let frac = values.iter().filter(|&&v| v <= *x).count() as f64 / values.len() as f64;
            prop_assert!((y - frac).abs() < 1e-12);
            prop_assert!(*y > last);
            last = *y;
        }
        prop_assert_eq!(last, 1.0);
    }

    #[test]
    fn metrics_stay_in_unit_interval(positions in prop::collection::vec(0usize..101, 1..50)) {
        let m = metrics_from_positions(&positions, &[1, 5, 10, 20, 101]).unwrap();
        for series in [&m.hr, &m.ndcg, &m.precision, &m.recall, &m.f1] {
            prop_assert!(series.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        prop_assert!(m.hr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(m.hr[4], 1.0);
    }
}

#[test]
fn random_scorer_is_calibrated() {
    let hr = random_scorer_hr20(10_000, 12);
    let expect = 20.0 / 101.0;
    assert!((hr - expect).abs() <= 0.01, "random HR@20 {hr} vs {expect}");
}
