//! Clusters users by taste and derives the dense and sparse sub-datasets.
//!
//! ```text
//! cargo run --release --example density_splits [path/to/u.data]
//! ```

mod common;

use std::path::Path;

use gossiprec::data::{binarize, density_splits, load_movielens, sparsity};
use gossiprec::rng::{stream_rng, Stream};

fn main() -> gossiprec::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(path) => binarize(&load_movielens(Path::new(&path))?),
        None => common::clustered_ratings(200, 600, 5, 40, 8),
    };
    let mut rng = stream_rng(42, 0, Stream::Clustering);
    let d = density_splits(&ds, 8, &mut rng)?;
    println!("k-means finished after {} iterations", d.clustering.iterations);
    for (name, part) in [("original", &ds), ("dense", &d.dense), ("sparse", &d.sparse)] {
        println!(
            "{name:<9} {:>5} users {:>5} items  sparsity {:.4}",
            part.num_users(),
            part.num_items(),
            sparsity(part)
        );
    }
    Ok(())
}
