//! How the exploration weight changes which peers end up in a view.
//!
//! ```text
//! cargo run --example peer_sampling
//! ```

use gossiprec::peersampling::{exploitation_count, random_view, update_view, PerfLedger};
use gossiprec::rng::{stream_rng, Stream};

fn main() -> gossiprec::Result<()> {
    let n = 50;
    let v = 6;
    let mut rng = stream_rng(9, 0, Stream::Views);
    let view = random_view(0, n, v, &mut rng)?;
    println!("bootstrap view of node 0: {:?}", view.peers());

    // node 0 has scored models from a handful of senders
    let mut ledger = PerfLedger::new();
    for (t, (sender, perf)) in [(11, 0.42), (23, 0.71), (7, 0.15), (38, 0.66), (4, 0.71), (19, 0.30)]
        .into_iter()
        .enumerate()
    {
        ledger.record(sender, perf, t as f64)?;
    }
    println!("ledger best first: {:?}", ledger.top(ledger.len()));

    for alpha in [0.0, 0.4, 1.0] {
        let next = update_view(&view, &ledger, alpha, |_| None, n, &mut rng)?;
        println!(
            "alpha {alpha:.1}: {} slots from the ledger -> {:?}",
            exploitation_count(alpha, v),
            next.peers()
        );
    }
    Ok(())
}
