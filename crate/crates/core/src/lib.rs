//! Gossip learning for decentralized recommenders.
//!
//! Every user is a node that keeps its data and its user embedding local,
//! trains the shared part of a recommender model, and periodically pushes
//! that part to a small view of peers. The crate provides the models, the
//! pairwise aggregators, view management, a deterministic discrete-event
//! simulator, federated baselines and the evaluation pipeline.

pub mod aggregation;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod params;
pub mod peersampling;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

/// Environment variable capping worker threads. It never changes results.
pub const THREADS_ENV: &str = "GOSSIPREC_THREADS";

/// Worker pool sized by `GOSSIPREC_THREADS`, defaulting to all cores.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v} is not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}
