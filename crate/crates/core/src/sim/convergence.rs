use crate::error::{Error, Result};

/// Per-node plateau detection on a stream of checkpoint metrics.
///
/// After checkpoint `t` a node is converged when the best value of the
/// last `window - 1` checkpoints beats the best value seen up to checkpoint
/// `t - window + 1` by less than `delta`. A constant stream therefore
/// converges at exactly `window` checkpoints.
#[derive(Debug, Clone)]
pub struct ConvergenceTracker {
    window: usize,
    delta: f64,
    history: Vec<Vec<f64>>,
    converged_at: Vec<Option<u64>>,
}

impl ConvergenceTracker {
    pub fn new(nodes: usize, window: usize, delta: f64) -> Self {
        ConvergenceTracker {
            window: window.max(1),
            delta,
            history: vec![Vec::new(); nodes],
            converged_at: vec![None; nodes],
        }
    }

    /// Feeds one checkpoint metric; `rounds` is the node's communication
    /// round count, frozen on convergence.
    pub fn observe(&mut self, node: usize, metric: f64, rounds: u64) -> Result<bool> {
        if !(0.0..=1.0).contains(&metric) {
            return Err(Error::domain(format!("metric {metric} outside [0, 1]")));
        }
        if self.converged_at[node].is_some() {
            return Ok(true);
        }
        let h = &mut self.history[node];
        h.push(metric);
        let t = h.len();
        if t < self.window {
            return Ok(false);
        }
        let split = t - self.window + 1;
        let best_before = h[..split].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best_recent = h[split..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if best_recent - best_before < self.delta {
            self.converged_at[node] = Some(rounds);
            return Ok(true);
        }
        Ok(false)
    }

    pub fn converged_at(&self, node: usize) -> Option<u64> {
        self.converged_at[node]
    }

    pub fn checkpoints_seen(&self, node: usize) -> usize {
        self.history[node].len()
    }

    pub fn all_converged(&self) -> bool {
        self.converged_at.iter().all(Option::is_some)
    }
}
