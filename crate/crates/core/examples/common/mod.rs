//! Synthetic datasets shared by the examples.
#![allow(dead_code)]

use gossiprec::data::{DatasetKind, InteractionDataset, Record};
use gossiprec::rng::SimRng;
use rand::seq::index;
use rand::{Rng, SeedableRng};

/// Users fall into `groups` taste groups; 80% of each history comes from the
/// group's slice of the catalogue.
pub fn clustered_ratings(users: u32, items: u32, groups: u32, per_user: usize, seed: u64) -> InteractionDataset {
    let mut rng = SimRng::seed_from_u64(seed);
    let slice = items / groups;
    let mut ds = InteractionDataset::default();
    for u in 0..users {
        let g = u % groups;
        let own = per_user * 4 / 5;
        let mut picked: Vec<u32> = index::sample(&mut rng, slice as usize, own)
            .into_iter()
            .map(|i| g * slice + i as u32)
            .collect();
        while picked.len() < per_user {
            let i = rng.gen_range(0..items);
            if !picked.contains(&i) {
                picked.push(i);
            }
        }
        for (t, raw_item) in picked.into_iter().enumerate() {
            let user = ds.users.intern(&u.to_string());
            let item = ds.items.intern(&raw_item.to_string());
            ds.records.push(Record {
                user,
                item,
                value: 4.0,
                timestamp: 1_000 + t as i64,
                coords: None,
                category: None,
            });
        }
    }
    ds
}

/// Check-ins on a grid of venues around a point. Users mostly walk between
/// neighbouring venues and now and then jump anywhere on the grid.
pub fn grid_checkins(users: u32, side: u32, per_user: usize, seed: u64) -> InteractionDataset {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut ds = InteractionDataset {
        kind: DatasetKind::Checkins,
        ..Default::default()
    };
    let coord = |v: u32| (40.70 + 0.01 * (v / side) as f64, -74.00 + 0.01 * (v % side) as f64);
    for u in 0..users {
        let (mut x, mut y) = (rng.gen_range(0..side), rng.gen_range(0..side));
        for t in 0..per_user {
            if rng.gen_bool(0.3) {
                (x, y) = (rng.gen_range(0..side), rng.gen_range(0..side));
            }
            x = (x as i64 + rng.gen_range(-1..=1)).clamp(0, side as i64 - 1) as u32;
            y = (y as i64 + rng.gen_range(-1..=1)).clamp(0, side as i64 - 1) as u32;
            let venue = x * side + y;
            let user = ds.users.intern(&u.to_string());
            let item = ds.items.intern(&venue.to_string());
            ds.records.push(Record {
                user,
                item,
                value: 1.0,
                timestamp: 1_600_000_000 + 3_600 * t as i64,
                coords: Some(coord(venue)),
                category: None,
            });
        }
    }
    ds
}
