//! Trains one GMF model centrally over every user's training data and
//! compares ranking quality with the freshly initialised model.
//!
//! ```text
//! cargo run --release --example train_gmf
//! ```

mod common;

use gossiprec::data::{split_all, SplitConfig};
use gossiprec::eval::{evaluate_node, Scratch};
use gossiprec::model::gmf::{GmfConfig, GmfModel};
use gossiprec::model::Recommender;
use gossiprec::params::GossipModel;
use gossiprec::rng::{stream_rng, Stream};

fn main() -> gossiprec::Result<()> {
    let ds = common::clustered_ratings(60, 400, 4, 60, 1);
    let (splits, _) = split_all(&ds, &SplitConfig::default(), 7)?;
    let rec = Recommender::Gmf(GmfModel::new(ds.num_items(), GmfConfig::default()));
    let ks = [5, 10, 20];
    let mut scratch = Scratch::default();

    let mut rng = stream_rng(7, u64::MAX, Stream::Bootstrap);
    let mut model = GossipModel::new(rec.init_shared(&mut rng), 0, 0);
    let mut users: Vec<Vec<f64>> = splits.iter().map(|_| rec.init_user(&mut rng)).collect();
    let mut hr10 = |model: &GossipModel, users: &[Vec<f64>]| -> gossiprec::Result<f64> {
        let mut total = 0.0;
        for (s, u) in splits.iter().zip(users) {
            total += evaluate_node(&rec, &model.params, u, &s.test, &ks, &mut scratch)?.hr[1];
        }
        Ok(total / splits.len() as f64)
    };
    println!("{} users, {} items", splits.len(), ds.num_items());
    println!("HR@10 untrained {:.3}", hr10(&model, &users)?);

    let mut rng = stream_rng(7, 0, Stream::Training);
    for epoch in 1..=40 {
        for (s, u) in splits.iter().zip(users.iter_mut()) {
            rec.train_epoch(&mut model, u, &s.train, &s.training_items(), &mut rng)?;
        }
        if epoch % 5 == 0 {
            println!("HR@10 after {epoch} epochs {:.3}", hr10(&model, &users)?);
        }
    }
    Ok(())
}
