use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::params::{GossipModel, NodeId};

#[derive(Debug, Clone)]
pub enum EventKind {
    PushModel(NodeId),
    Deliver {
        model: Arc<GossipModel>,
        /// Sender's user embedding, when user embeddings are gossiped.
        user: Option<Arc<Vec<f64>>>,
        from: NodeId,
        to: NodeId,
        sent_at: f64,
    },
    ViewUpdate(NodeId),
    Checkpoint,
}

#[derive(Debug, Clone)]
pub struct SimEvent {
    pub fire_time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    // reversed so the max-heap pops the earliest (time, seq) first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_time
            .total_cmp(&self.fire_time)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Min-queue on `(fire_time, seq)`; `seq` is assigned on insertion so
/// equal-time events pop in insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, fire_time: f64, kind: EventKind) {
        debug_assert!(fire_time.is_finite());
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent { fire_time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.fire_time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
