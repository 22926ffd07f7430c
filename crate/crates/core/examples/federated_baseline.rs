//! Centralized FedAvg with client sampling and its Reptile-personalized
//! variant on the same splits the gossip runs use.
//!
//! ```text
//! cargo run --release --example federated_baseline
//! ```

mod common;

use gossiprec::baselines::{fl_run, reptile_run, FlRoundConfig};
use gossiprec::data::{split_all, SplitConfig};
use gossiprec::model::gmf::{GmfConfig, GmfModel};
use gossiprec::model::Recommender;

fn main() -> gossiprec::Result<()> {
    let ds = common::clustered_ratings(80, 500, 4, 50, 2);
    let (splits, _) = split_all(&ds, &SplitConfig::default(), 42)?;
    let rec = Recommender::Gmf(GmfModel::new(
        ds.num_items(),
        GmfConfig {
            lr: 0.05,
            ..GmfConfig::default()
        },
    ));
    let config = FlRoundConfig {
        client_fraction: 0.25,
        local_epochs: 3,
        total_rounds: 150,
        ..FlRoundConfig::default()
    };

    let fl = fl_run(&config, &splits, &rec, 42)?;
    println!(
        "FedAvg   HR@10 {:.3}  {} clients per round",
        fl.report.mean("hr@10").unwrap_or(f64::NAN),
        config.clients_per_round(splits.len())
    );
    let reptile = reptile_run(&config, &splits, &rec, 0.5, 5, 42)?;
    println!("Reptile  HR@10 {:.3}", reptile.report.mean("hr@10").unwrap_or(f64::NAN));
    Ok(())
}
