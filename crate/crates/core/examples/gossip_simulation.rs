//! A full gossip run: every user is a node, models travel over simulated
//! links, and the report summarises per-node quality and cost.
//!
//! ```text
//! cargo run --release --example gossip_simulation [path/to/u.data]
//! ```
//!
//! Without an argument a small clustered dataset is generated.

mod common;

use std::path::Path;

use gossiprec::aggregation::AggregatorKind;
use gossiprec::data::{binarize, load_movielens, split_all, SplitConfig};
use gossiprec::model::gmf::{GmfConfig, GmfModel};
use gossiprec::model::Recommender;
use gossiprec::sim::{run_simulation, SimConfig};

fn main() -> gossiprec::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(path) => binarize(&load_movielens(Path::new(&path))?),
        None => common::clustered_ratings(80, 500, 4, 50, 2),
    };
    let (splits, _) = split_all(&ds, &SplitConfig::default(), 42)?;
    let rec = Recommender::Gmf(GmfModel::new(
        ds.num_items(),
        GmfConfig {
            lr: 0.01,
            ..GmfConfig::default()
        },
    ));
    println!("{} nodes, {} items", splits.len(), ds.num_items());

    for aggregator in [AggregatorKind::Performance, AggregatorKind::FedAvg, AggregatorKind::Age] {
        let config = SimConfig {
            aggregator,
            max_sim_time: 6_000.0,
            ..SimConfig::default()
        };
        let report = run_simulation(&config, &splits, &rec, 42)?;
        println!(
            "{:<12} HR@10 {:.3}  HR@20 {:.3}  rounds to convergence {:.1}  messages {}  ended {:?} at {:.0} s",
            aggregator.as_str(),
            report.mean("hr@10").unwrap_or(f64::NAN),
            report.mean("hr@20").unwrap_or(f64::NAN),
            report.mean_rounds_to_convergence(),
            report.messages_sent(),
            report.status,
            report.end_time
        );
    }
    Ok(())
}
