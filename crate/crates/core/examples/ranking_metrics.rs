//! Ranking metrics for a few hand-built candidate lists and the CDF
//! summary used in reports.
//!
//! ```text
//! cargo run --example ranking_metrics
//! ```

use gossiprec::eval::{cdf_and_percentiles, metrics_from_positions, ndcg_at};

fn main() -> gossiprec::Result<()> {
    // 0-based rank of the held-out item among its 101 candidates, per probe
    let positions = [0, 3, 7, 12, 25, 60];
    let m = metrics_from_positions(&positions, &[5, 10, 20])?;
    for name in m.names() {
        println!("{name:<14} {:.4}", m.get(&name).unwrap());
    }
    println!("NDCG of a hit at rank 3: {:.4}", ndcg_at(Some(2)));

    let per_node = [0.1, 0.3, 0.3, 0.5, 0.6, 0.6, 0.6, 0.8, 0.9, 1.0];
    let cdf = cdf_and_percentiles(&per_node);
    for (x, frac) in &cdf.points {
        println!("P(HR <= {x:.1}) = {frac:.1}");
    }
    println!("median {:.1}", cdf.percentiles.iter().find(|(p, _)| *p == 50.0).unwrap().1);
    Ok(())
}
