use nalgebra::DMatrix;
use rand::Rng;

use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::par::{map_indices, Exec};
use crate::rng::{indexed_rng, Stream};

const MAX_LLOYD_ITERATIONS: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Picks an index with probability proportional to `weights`, or uniformly
/// among `fallback` when all weights vanish.
pub(crate) fn weighted_pick<R: Rng>(rng: &mut R, weights: &[f64], fallback: &[usize]) -> usize {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        let mut target = rng.random::<f64>() * total;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                if target < w {
                    return i;
                }
                target -= w;
            }
        }
        // rounding: last positive weight
        return weights.iter().rposition(|&w| w > 0.0).expect("positive total");
    }
    fallback[rng.random_range(0..fallback.len())]
}

fn seed_plus_plus<R: Rng>(rows: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![rows[first].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let unchosen: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
        let weights: Vec<f64> = (0..n).map(|i| if chosen[i] { 0.0 } else { d2[i] }).collect();
        let next = weighted_pick(rng, &weights, &unchosen);
        chosen[next] = true;
        centers.push(rows[next].clone());
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &rows[next]));
        }
    }
    centers
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(rows: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let n = rows.len();
    let dim = rows[0].len();
    let k = centers.len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for (i, r) in rows.iter().enumerate() {
            let (c, d) = nearest(r, &centers);
            dists[i] = d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, r) in rows.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, x) in sums[labels[i]].iter_mut().zip(r) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // empty cluster takes the point farthest from its center
                let far = (0..n).fold(0, |b, i| if dists[i] > dists[b] { i } else { b });
                centers[c] = rows[far].clone();
                dists[far] = 0.0;
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = rows.iter().map(|r| nearest(r, &centers).1).sum();
    let labels = rows.iter().map(|r| nearest(r, &centers).0).collect();
    (labels, inertia)
}

/// Lloyd's k-means from k-means++ seeding; keeps the restart with the lowest
/// inertia (earliest on ties).
pub fn kmeans(x: &DMatrix<f64>, k: usize, seed: u64, restarts: usize, exec: Exec) -> Result<ClusterAssignment> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(Error::config(format!("k={k} invalid for {n} objects")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("embedding has non-finite entries"));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let runs = map_indices(exec, restarts.max(1), |r| {
        let mut rng = indexed_rng(seed, Stream::KMeans, r as u64);
        lloyd(&rows, seed_plus_plus(&rows, k, &mut rng))
    });
    let (labels, inertia) = runs
        .into_iter()
        .reduce(|best, run| if run.1 < best.1 { run } else { best })
        .expect("at least one restart");
    Ok(ClusterAssignment { labels, k, seed, inertia })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, f64::NAN]);
        assert!(matches!(kmeans(&x, 1, 0, 1, Exec::Sequential), Err(Error::Numeric(_))));
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0]);
        let a = kmeans(&x, 4, 1, 3, Exec::Sequential).unwrap();
        assert_eq!(a.inertia, 0.0);
        let mut l = a.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    #[test]
    fn duplicate_groups_recovered() {
        let mut data = Vec::new();
        for i in 0..10 {
            if i % 2 == 0 {
                data.extend([1.0, 2.0, 3.0]);
            } else {
                data.extend([-4.0, 0.5, 9.0]);
            }
        }
        let x = DMatrix::from_row_slice(10, 3, &data);
        let a = kmeans(&x, 2, 5, 1, Exec::Sequential).unwrap();
        assert_eq!(a.inertia, 0.0);
        for i in 0..10 {
            assert_eq!(a.labels[i] == a.labels[0], i % 2 == 0);
        }
    }

    #[test]
    fn rejects_too_many_clusters_and_is_deterministic() {
        let x = DMatrix::from_fn(20, 2, |i, j| ((i * 7 + j * 3) % 11) as f64);
        assert!(kmeans(&x, 21, 0, 1, Exec::Sequential).is_err());
        let a = kmeans(&x, 3, 9, 4, Exec::Sequential).unwrap();
        let b = kmeans(&x, 3, 9, 4, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
