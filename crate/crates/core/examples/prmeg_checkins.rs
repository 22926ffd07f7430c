//! Chronological check-in splits and the metric-embedding model with its
//! geographic factor.
//!
//! ```text
//! cargo run --release --example prmeg_checkins
//! ```

mod common;

use std::sync::Arc;

use gossiprec::data::{split_all, SplitConfig};
use gossiprec::eval::{evaluate_node, Scratch};
use gossiprec::model::prmeg::{haversine_km, PrmegConfig, PrmegModel};
use gossiprec::model::Recommender;
use gossiprec::params::GossipModel;
use gossiprec::rng::{stream_rng, Stream};

fn main() -> gossiprec::Result<()> {
    let ds = common::grid_checkins(40, 20, 80, 3);
    let coords = ds.item_coords().expect("check-ins carry coordinates");
    println!(
        "{} venues, corner to corner {:.2} km",
        coords.len(),
        haversine_km((40.70, -74.00), (40.89, -73.81))
    );

    let split = SplitConfig {
        negatives: 100,
        ..SplitConfig::default()
    };
    let (splits, _) = split_all(&ds, &split, 5)?;
    let model = PrmegModel::new(ds.num_items(), PrmegConfig::default()).with_coords(Arc::new(coords));
    let rec = Recommender::Prmeg(model);

    // one model trained on everybody's history, each user keeps a vector
    let mut rng = stream_rng(5, u64::MAX, Stream::Bootstrap);
    let mut shared = GossipModel::new(rec.init_shared(&mut rng), 0, 0);
    let mut users: Vec<Vec<f64>> = splits.iter().map(|_| rec.init_user(&mut rng)).collect();
    let mut scratch = Scratch::default();
    let ks = [1, 10];
    let quality = |shared: &GossipModel, users: &[Vec<f64>], scratch: &mut Scratch| -> gossiprec::Result<String> {
        let (mut hr1, mut f1) = (0.0, 0.0);
        for (s, u) in splits.iter().zip(users) {
            let m = evaluate_node(&rec, &shared.params, u, &s.test, &ks, scratch)?;
            hr1 += m.hr[0];
            f1 += m.f1[1];
        }
        let n = splits.len() as f64;
        Ok(format!("HR@1 {:.4}  F1@10 {:.4}", hr1 / n, f1 / n))
    };
    println!("untrained       {}", quality(&shared, &users, &mut scratch)?);

    let mut rng = stream_rng(5, 0, Stream::Training);
    for _ in 0..20 {
        for (s, u) in splits.iter().zip(users.iter_mut()) {
            rec.train_epoch(&mut shared, u, &s.train, &s.training_items(), &mut rng)?;
        }
    }
    println!("after 20 passes {}", quality(&shared, &users, &mut scratch)?);
    Ok(())
}
