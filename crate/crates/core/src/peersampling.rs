//! View management.
//!
//! A node's view is the set of peers it pushes its model to. The
//! personalized sampler refills a fraction `1 - alpha` of the view with the
//! senders whose models scored best locally, and the rest with peers drawn
//! at random from the neighbours' views.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::NodeId;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Random,
    Personalized,
}

impl std::str::FromStr for SamplerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "random" => Ok(SamplerKind::Random),
            "personalized" => Ok(SamplerKind::Personalized),
            other => Err(format!("unknown sampler `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    owner: NodeId,
    peers: Vec<NodeId>,
    capacity: usize,
}

impl View {
    pub fn new(owner: NodeId, capacity: usize, peers: Vec<NodeId>) -> Result<Self> {
        let unique: BTreeSet<_> = peers.iter().collect();
        if unique.len() != peers.len() {
            return Err(Error::domain("view contains duplicates"));
        }
        if peers.contains(&owner) {
            return Err(Error::domain("view contains its owner"));
        }
        if peers.len() > capacity {
            return Err(Error::domain("view exceeds its capacity"));
        }
        Ok(View {
            owner,
            peers,
            capacity,
        })
    }

    pub fn empty(owner: NodeId) -> Self {
        View {
            owner,
            peers: Vec::new(),
            capacity: 0,
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn peers(&self) -> &[NodeId] {
        &self.peers
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.peers.contains(&node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub node: NodeId,
    pub perf: f64,
    pub last_update: f64,
}

/// Last performance of each sender's model, best first. Ties go to the
/// more recent entry, then to the lower node id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerfLedger {
    entries: Vec<LedgerEntry>,
}

fn ledger_order(a: &LedgerEntry, b: &LedgerEntry) -> std::cmp::Ordering {
    b.perf
        .total_cmp(&a.perf)
        .then(b.last_update.total_cmp(&a.last_update))
        .then(a.node.cmp(&b.node))
}

impl PerfLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the entry for `sender` with its latest performance.
    pub fn record(&mut self, sender: NodeId, perf: f64, now: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&perf) {
            return Err(Error::domain(format!("performance {perf} outside [0, 1]")));
        }
        self.entries.retain(|e| e.node != sender);
        let entry = LedgerEntry {
            node: sender,
            perf,
            last_update: now,
        };
        let at = self
            .entries
            .partition_point(|e| ledger_order(e, &entry) == std::cmp::Ordering::Less);
        self.entries.insert(at, entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, t: usize) -> Vec<NodeId> {
        self.entries.iter().take(t).map(|e| e.node).collect()
    }
}

/// Number of exploitation slots in a view of size `v`, rounded half away
/// from zero.
pub fn exploitation_count(alpha: f64, v: usize) -> usize {
    (((1.0 - alpha) * v as f64).round() as usize).min(v)
}

/// `v` distinct peers drawn uniformly from `0..num_nodes` minus `owner`.
pub fn random_view(owner: NodeId, num_nodes: usize, v: usize, rng: &mut SimRng) -> Result<View> {
    if num_nodes == 0 || num_nodes - 1 < v {
        return Err(Error::domain(format!(
            "cannot draw {v} peers from {num_nodes} nodes"
        )));
    }
    let peers = index::sample(rng, num_nodes - 1, v)
        .into_iter()
        .map(|i| {
            let i = i as NodeId;
            if i >= owner {
                i + 1
            } else {
                i
            }
        })
        .collect();
    View::new(owner, v, peers)
}

/// Refreshes `view` from the ledger and the neighbours' views.
///
/// `neighbor_views` yields the current view of each peer in `view`, or
/// `None` when that peer's view is unknown.
pub fn update_view<'a, F>(
    view: &View,
    ledger: &PerfLedger,
    alpha: f64,
    mut neighbor_views: F,
    num_nodes: usize,
    rng: &mut SimRng,
) -> Result<View>
where
    F: FnMut(NodeId) -> Option<&'a [NodeId]>,
{
    let v = view.capacity;
    let owner = view.owner;
    if v == 0 {
        return Err(Error::domain("view capacity must be positive"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha {alpha} outside [0, 1]")));
    }
    if num_nodes == 0 || num_nodes - 1 < v {
        return Err(Error::domain("not enough nodes to fill the view"));
    }

    let t = exploitation_count(alpha, v);
    let exploit: Vec<NodeId> = ledger
        .entries
        .iter()
        .map(|e| e.node)
        .filter(|&n| n != owner)
        .take(t)
        .collect();
    let r = v - exploit.len();

    let mut pool = BTreeSet::new();
    for &peer in &view.peers {
        if let Some(peers) = neighbor_views(peer) {
            pool.extend(peers.iter().copied());
        }
    }
    pool.remove(&owner);
    for n in &exploit {
        pool.remove(n);
    }
    let pool: Vec<NodeId> = pool.into_iter().collect();

    let mut explore: Vec<NodeId> = if pool.len() <= r {
        pool
    } else {
        index::sample(rng, pool.len(), r)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    };
    // not enough known neighbours: fall back to the whole network
    while explore.len() < r {
        let cand = rng.gen_range(0..num_nodes) as NodeId;
        if cand != owner && !exploit.contains(&cand) && !explore.contains(&cand) {
            explore.push(cand);
        }
    }

    explore.extend(exploit);
    View::new(owner, v, explore)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn ledger_replaces_sender_entry() {
        let mut l = PerfLedger::new();
        l.record(4, 0.2, 1.0).unwrap();
        assert_eq!(l.len(), 1);
        l.record(4, 0.9, 2.0).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.entries()[0].perf, 0.9);
        assert!(l.record(1, 1.5, 3.0).is_err());
    }

    #[test]
    fn ledger_tie_breaks() {
        let mut l = PerfLedger::new();
        l.record(5, 0.5, 1.0).unwrap();
        l.record(2, 0.5, 1.0).unwrap();
        l.record(9, 0.5, 3.0).unwrap();
        l.record(1, 0.7, 0.0).unwrap();
        assert_eq!(l.top(4), vec![1, 9, 2, 5]);
    }

    #[test]
    fn exploitation_rounding() {
        assert_eq!(exploitation_count(0.4, 3), 2);
        assert_eq!(exploitation_count(1.0, 3), 0);
        assert_eq!(exploitation_count(0.0, 3), 3);
        assert_eq!(exploitation_count(0.5, 3), 2);
        assert_eq!(exploitation_count(0.4, 6), 4);
    }

    #[test]
    fn alpha_point_four_keeps_two_best() {
        let mut rng = SimRng::seed_from_u64(1);
        let view = View::new(0, 3, vec![1, 2, 3]).unwrap();
        let mut l = PerfLedger::new();
        for (n, p) in [(10, 0.9), (11, 0.8), (12, 0.7), (13, 0.1)] {
            l.record(n, p, 0.0).unwrap();
        }
        let nv = vec![20u32, 21, 22];
        let out = update_view(&view, &l, 0.4, |_| Some(nv.as_slice()), 50, &mut rng).unwrap();
        assert_eq!(out.peers().len(), 3);
        assert_eq!(&out.peers()[1..], &[10, 11]);
        assert!(nv.contains(&out.peers()[0]));
    }

    #[test]
    fn full_neighbourhood_view() {
        let mut rng = SimRng::seed_from_u64(2);
        let v = random_view(3, 6, 5, &mut rng).unwrap();
        let mut peers = v.peers().to_vec();
        peers.sort();
        assert_eq!(peers, vec![0, 1, 2, 4, 5]);
        assert!(random_view(0, 3, 3, &mut rng).is_err());
    }

    #[test]
    fn random_view_reproducible() {
        let a = random_view(0, 100, 3, &mut SimRng::seed_from_u64(8)).unwrap();
        let b = random_view(0, 100, 3, &mut SimRng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_capacity_rejected() {
        let mut rng = SimRng::seed_from_u64(0);
        let view = View::empty(0);
        assert!(update_view(&view, &PerfLedger::new(), 0.4, |_| None, 10, &mut rng).is_err());
    }

    #[test]
    fn unknown_neighbours_fall_back_to_global() {
        let mut rng = SimRng::seed_from_u64(3);
        let view = View::new(0, 3, vec![1, 2, 3]).unwrap();
        let out = update_view(&view, &PerfLedger::new(), 1.0, |_| None, 10, &mut rng).unwrap();
        assert_eq!(out.peers().len(), 3);
        assert!(!out.contains(0));
    }
}
