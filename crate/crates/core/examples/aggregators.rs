//! The pairwise merge rules on two hand-made models.
//!
//! ```text
//! cargo run --example aggregators
//! ```

use gossiprec::aggregation::{decentralized_fedavg, model_age_based, performance_merge, reptile_step};
use gossiprec::params::{GossipModel, ModelAge, ParamVector};

fn show(label: &str, p: &ParamVector) {
    let cells: Vec<String> = p.values().iter().map(|v| format!("{v:6.3}")).collect();
    println!("{label:<28} [{}]", cells.join(", "));
}

fn main() -> gossiprec::Result<()> {
    let local = ParamVector::from_flat(vec![0.0, 1.0, 2.0, 3.0]);
    let received = ParamVector::from_flat(vec![4.0, 3.0, 2.0, 1.0]);
    show("local", &local);
    show("received", &received);

    let m = decentralized_fedavg(&local, &received, 30, 10)?;
    show("fedavg, 30 vs 10 samples", &m.params);

    let m = model_age_based(&local, &received, ModelAge(5), ModelAge(15))?;
    show("age, 5 vs 15 epochs", &m.params);

    let mut a = GossipModel::new(local.clone(), 0, 30);
    a.age = ModelAge(5);
    let mut b = GossipModel::new(received.clone(), 1, 10);
    b.age = ModelAge(15);
    let out = performance_merge(&a, &b, 0.2, 0.6)?;
    show("performance, 0.2 vs 0.6", &out.merged);
    println!("merged model age {}", out.new_age.0);

    let out = performance_merge(&a, &b, 0.0, 0.0)?;
    show("performance, both zero", &out.merged);
    println!("degenerate merge flagged: {}", out.degenerate);

    show("reptile step 0.25", &reptile_step(&local, &received, 0.25)?);
    Ok(())
}
