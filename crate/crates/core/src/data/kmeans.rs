//! Lloyd's k-means over user profiles and the dense / sparse user splits
//! derived from it.
//!
//! Profiles are binary user-item rows scaled to unit length, so clusters
//! group users by taste rather than by activity level. Users far from their
//! centroid are the outliers.

use std::collections::BTreeSet;

use rand::Rng;

use super::{sparsity, InteractionDataset};
use crate::error::{Error, Result};
use crate::eval::nearest_rank;
use crate::rng::SimRng;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding followed by at most `max_iter` Lloyd iterations.
pub fn kmeans(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut SimRng) -> Result<KMeans> {
    if k < 1 || k > points.len() {
        return Err(Error::domain(format!("cannot form {k} clusters from {} points", points.len())));
    }
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centroids.last().unwrap()));
        }
    }

    let dim = points[0].len();
    let mut assignment = vec![usize::MAX; points.len()];
    let mut objective_trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let mut changed = false;
        let mut objective = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            objective += d;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        objective_trace.push(objective);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            // empty clusters keep their previous centroid
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(KMeans {
        centroids,
        assignment,
        objective_trace,
        iterations,
    })
}

#[derive(Debug, Clone)]
pub struct DensitySplits {
    pub dense: InteractionDataset,
    pub sparse: InteractionDataset,
    pub dense_users: BTreeSet<u32>,
    pub sparse_users: BTreeSet<u32>,
    pub clustering: KMeans,
}

/// Unit-length binary profile of every user.
pub fn user_profiles(ds: &InteractionDataset) -> Vec<Vec<f64>> {
    ds.user_items()
        .into_iter()
        .map(|items| {
            let mut row = vec![0.0; ds.num_items()];
            let norm = (items.len() as f64).sqrt();
            for i in items {
                row[i as usize] = 1.0 / norm;
            }
            row
        })
        .collect()
}

/// Dense = the cluster whose members have the lowest sparsity; Sparse =
/// users whose distance to their centroid exceeds the 75th percentile.
pub fn density_splits(ds: &InteractionDataset, k: usize, rng: &mut SimRng) -> Result<DensitySplits> {
    if k < 2 {
        return Err(Error::domain("density splits need at least two clusters"));
    }
    if k > ds.num_users() {
        return Err(Error::domain(format!("{k} clusters for {} users", ds.num_users())));
    }
    let points = user_profiles(ds);
    let clustering = kmeans(&points, k, 100, rng)?;

    let mut members: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); k];
    for (u, &c) in clustering.assignment.iter().enumerate() {
        members[c].insert(u as u32);
    }
    let counts: Vec<usize> = ds.user_items().iter().map(|s| s.len()).collect();
    let dense_cluster = (0..k)
        .filter(|&c| !members[c].is_empty())
        .max_by(|&a, &b| {
            let mean = |c: usize| {
                members[c].iter().map(|&u| counts[u as usize] as f64).sum::<f64>() / members[c].len() as f64
            };
            mean(a).total_cmp(&mean(b)).then(b.cmp(&a))
        })
        .expect("at least one non-empty cluster");
    let dense_users = members[dense_cluster].clone();

    let dists: Vec<f64> = points
        .iter()
        .zip(&clustering.assignment)
        .map(|(p, &c)| sq_dist(p, &clustering.centroids[c]).sqrt())
        .collect();
    let mut sorted = dists.clone();
    sorted.sort_by(f64::total_cmp);
    let cutoff = nearest_rank(&sorted, 75.0);
    let sparse_users: BTreeSet<u32> = dists
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > cutoff)
        .map(|(u, _)| u as u32)
        .collect();

    let dense = ds.restrict_users(&dense_users);
    let sparse = ds.restrict_users(&sparse_users);
    log::info!(
        "density splits: dense {} users (sparsity {:.3}), sparse {} users (sparsity {:.3})",
        dense.num_users(),
        sparsity(&dense),
        sparse.num_users(),
        sparsity(&sparse)
    );
    Ok(DensitySplits {
        dense,
        sparse,
        dense_users,
        sparse_users,
        clustering,
    })
}
