mod common;

use common::{gmf, synthetic_splits};
use gossiprec::baselines::{fl_run, reptile_run, weighted_average, FlRoundConfig};
use gossiprec::model::Recommender;
use gossiprec::params::{GossipModel, ParamVector};
use gossiprec::rng::{stream_rng, SimRng, Stream};
use rand::{Rng, SeedableRng};

fn config(fraction: f64, rounds: usize) -> FlRoundConfig {
    FlRoundConfig {
        client_fraction: fraction,
        total_rounds: rounds,
        ..FlRoundConfig::default()
    }
}

#[test]
fn single_client_federation_is_local_training() {
    let splits = synthetic_splits(1, 200, 1, 40, 1);
    let rec = gmf(200);
    let seed = 5;
    let out = fl_run(&config(1.0, 7), &splits, &rec, seed).unwrap();

    let mut model = GossipModel::new(rec.init_shared(&mut stream_rng(seed, u64::MAX, Stream::Bootstrap)), 0, 0);
    let mut user = rec.init_user(&mut stream_rng(seed, 0, Stream::Bootstrap));
    let mut rng = stream_rng(seed, 0, Stream::Federated);
    let observed = splits[0].training_items();
    for _ in 0..7 {
        rec.train_epoch(&mut model, &mut user, &splits[0].train, &observed, &mut rng).unwrap();
    }
    assert_eq!(out.global, model.params);
    assert_eq!(out.clients[0].user, user);
    assert_eq!(out.clients[0].participations, 7);
}

#[test]
fn participation_matches_client_fraction() {
    let splits = synthetic_splits(23, 200, 3, 30, 2);
    let c = config(0.3, 12);
    let out = fl_run(&c, &splits, &gmf(200), 6).unwrap();
    let m = c.clients_per_round(23);
    assert_eq!(m, 7);
    let total: u64 = out.clients.iter().map(|c| c.participations).sum();
    assert_eq!(total, (12 * m) as u64);
    assert_eq!(out.report.nodes.len(), 23);
    for (n, c) in out.report.nodes.iter().zip(&out.clients) {
        assert_eq!(n.rounds, c.participations);
    }
}

#[test]
fn federated_runs_are_reproducible() {
    let splits = synthetic_splits(15, 200, 3, 30, 3);
    let a = fl_run(&config(0.4, 5), &splits, &gmf(200), 9).unwrap();
    let b = fl_run(&config(0.4, 5), &splits, &gmf(200), 9).unwrap();
    assert_eq!(a.global, b.global);
    assert_eq!(a.report.report_csv(), b.report.report_csv());
}

#[test]
fn weighted_average_is_order_free_and_convex() {
    let mut rng = SimRng::seed_from_u64(4);
    for _ in 0..200 {
        let k = rng.gen_range(1..8);
        let n = rng.gen_range(1..30);
        let models: Vec<(ParamVector, u64)> = (0..k)
            .map(|_| {
                (
                    ParamVector::from_flat((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()),
                    rng.gen_range(0..50),
                )
            })
            .collect();
        let avg = weighted_average(&models).unwrap();
        let mut rev = models.clone();
        rev.reverse();
        let avg_rev = weighted_average(&rev).unwrap();
        for j in 0..n {
            let lo = models.iter().map(|m| m.0.values()[j]).fold(f64::INFINITY, f64::min);
            let hi = models.iter().map(|m| m.0.values()[j]).fold(f64::NEG_INFINITY, f64::max);
            let v = avg.values()[j];
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            assert!((v - avg_rev.values()[j]).abs() < 1e-12);
        }
    }
    assert!(weighted_average(&[]).is_err());
}

#[test]
fn reptile_step_size_identities() {
    let splits = synthetic_splits(8, 200, 2, 30, 5);
    let rec: Recommender = gmf(200);
    let c = config(0.5, 4);
    let at = |eps: f64| reptile_run(&c, &splits, &rec, eps, 3, 7).unwrap();
    let zero = at(0.0);
    let one = at(1.0);
    let half = at(0.5);
    assert!(zero.personalized.iter().all(|p| *p == zero.global));
    assert_eq!(zero.global, one.global);
    for ((z, o), h) in zero.personalized.iter().zip(&one.personalized).zip(&half.personalized) {
        assert_ne!(z, o);
        for ((a, b), m) in z.values().iter().zip(o.values()).zip(h.values()) {
            assert!((m - 0.5 * (a + b)).abs() < 1e-12);
        }
    }
    assert!(reptile_run(&c, &splits, &rec, 1.5, 3, 7).is_err());
}

#[test]
fn invalid_fractions_are_rejected() {
    let splits = synthetic_splits(3, 200, 1, 30, 6);
    for f in [0.0, -0.1, 1.5, f64::NAN] {
        assert!(fl_run(&config(f, 2), &splits, &gmf(200), 0).is_err());
    }
}
