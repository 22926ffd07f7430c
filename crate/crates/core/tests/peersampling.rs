mod common;

use std::collections::BTreeSet;

use common::check_peer_sampling_contract;
use gossiprec::peersampling::{exploitation_count, random_view, update_view, PerfLedger, View};
use gossiprec::rng::SimRng;
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn exploitation_and_exploration_contract() {
    check_peer_sampling_contract(1000, 0x5eed).unwrap();
}

#[test]
fn random_view_is_uniform() {
    // chi-square over the 9 possible peers of node 4 among 10 nodes
    let mut rng = SimRng::seed_from_u64(99);
    let draws = 100_000;
    let mut counts = [0u64; 10];
    for _ in 0..draws {
        for &p in random_view(4, 10, 3, &mut rng).unwrap().peers() {
            counts[p as usize] += 1;
        }
    }
    assert_eq!(counts[4], 0);
    let expect = draws as f64 * 3.0 / 9.0;
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != 4)
        .map(|(_, &c)| (c as f64 - expect).powi(2) / expect)
        .sum();
    // 8 degrees of freedom, 99.9% quantile
    assert!(chi2 < 26.12, "chi-square {chi2}");
}

#[test]
fn neighbour_exploration_draws_from_peer_views() {
    let mut rng = SimRng::seed_from_u64(5);
    let view = View::new(0, 4, vec![1, 2, 3, 4]).unwrap();
    let views: Vec<Vec<u32>> = (0..50).map(|i| vec![(i * 7 + 10) % 50, (i * 3 + 20) % 50]).collect();
    let allowed: BTreeSet<u32> = view.peers().iter().flat_map(|&p| views[p as usize].clone()).collect();
    for _ in 0..200 {
        let out = update_view(&view, &PerfLedger::new(), 1.0, |p| Some(views[p as usize].as_slice()), 50, &mut rng).unwrap();
        assert!(out.peers().iter().all(|p| allowed.contains(p) && *p != 0));
    }
}

proptest! {
    #[test]
    fn updated_views_are_well_formed(
        seed in any::<u64>(),
        nodes in 5usize..200,
        v in 1usize..6,
        alpha in prop::sample::select(vec![0.0, 0.2, 0.4, 0.5, 0.8, 1.0]),
        senders in prop::collection::vec((0u32..200, 0u32..=10), 0..40),
    ) {
        prop_assume!(v < nodes);
        let mut rng = SimRng::seed_from_u64(seed);
        let owner = (seed % nodes as u64) as u32;
        let view = random_view(owner, nodes, v, &mut rng).unwrap();
        let mut ledger = PerfLedger::new();
        for (i, &(n, p)) in senders.iter().enumerate() {
            if (n as usize) < nodes {
                ledger.record(n, p as f64 / 10.0, i as f64).unwrap();
            }
        }
        let out = update_view(&view, &ledger, alpha, |_| None, nodes, &mut rng).unwrap();
        let peers = out.peers();
        prop_assert_eq!(peers.len(), v);
        prop_assert!(!out.contains(owner));
        prop_assert_eq!(peers.iter().collect::<BTreeSet<_>>().len(), v);
        prop_assert!(peers.iter().all(|&p| (p as usize) < nodes));
        // every exploitation slot is filled from the ledger top
        let top: Vec<u32> = ledger.entries().iter().map(|e| e.node).filter(|&n| n != owner).collect();
        let t = exploitation_count(alpha, v).min(top.len());
        for n in &top[..t] {
            prop_assert!(out.contains(*n));
        }
    }

    #[test]
    fn ledger_keeps_one_entry_per_sender(records in prop::collection::vec((0u32..30, 0u32..=4), 0..100)) {
        let mut ledger = PerfLedger::new();
        for (i, &(n, p)) in records.iter().enumerate() {
            ledger.record(n, p as f64 / 4.0, i as f64).unwrap();
        }
        let distinct: BTreeSet<u32> = records.iter().map(|r| r.0).collect();
        prop_assert_eq!(ledger.len(), distinct.len());
        for e in ledger.entries() {
            let last = records.iter().rposition(|r| r.0 == e.node).unwrap();
            prop_assert_eq!(e.perf, records[last].1 as f64 / 4.0);
        }
        prop_assert!(ledger.entries().windows(2).all(|w| w[0].perf >= w[1].perf));
    }
}
