use super::kmeans::weighted_pick;
use super::ClusterAssignment;
use crate::dataset::CategoricalDataset;
use crate::error::{Error, Result};
use crate::par::{map_indices, Exec};
use crate::rng::{indexed_rng, Stream};
use rand::Rng;

const MAX_ITERATIONS: usize = 100;

fn hamming(ds: &CategoricalDataset, i: usize, mode: &[usize]) -> usize {
    mode.iter().enumerate().filter(|&(j, &v)| ds.cell(i, j) != v).count()
}

fn row(ds: &CategoricalDataset, i: usize) -> Vec<usize> {
    (0..ds.n_attributes()).map(|j| ds.cell(i, j)).collect()
}

fn assign(ds: &CategoricalDataset, modes: &[Vec<usize>]) -> Vec<(usize, usize)> {
    (0..ds.n_objects())
        .map(|i| {
            let mut best = (0, usize::MAX);
            for (c, m) in modes.iter().enumerate() {
                let d = hamming(ds, i, m);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect()
}

fn run<R: Rng>(ds: &CategoricalDataset, k: usize, rng: &mut R) -> (Vec<usize>, f64) {
    let n = ds.n_objects();
    // k-means++ style seeding under Hamming distance
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut modes = vec![row(ds, first)];
    let mut dist: Vec<f64> = (0..n).map(|i| hamming(ds, i, &modes[0]) as f64).collect();
    while modes.len() < k {
        let unchosen: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
        let weights: Vec<f64> = (0..n).map(|i| if chosen[i] { 0.0 } else { dist[i] }).collect();
        let next = weighted_pick(rng, &weights, &unchosen);
        chosen[next] = true;
        let m = row(ds, next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(hamming(ds, i, &m) as f64);
        }
        modes.push(m);
    }

    let mut labels: Vec<usize> = vec![usize::MAX; n];
    for _ in 0..MAX_ITERATIONS {
        let a = assign(ds, &modes);
        let new_labels: Vec<usize> = a.iter().map(|&(c, _)| c).collect();
        if new_labels == labels {
            break;
        }
        labels = new_labels;
        for (c, mode) in modes.iter_mut().enumerate() {
            for (j, slot) in mode.iter_mut().enumerate() {
                let mut counts = vec![0usize; ds.n_values_in(j)];
                let mut any = false;
                for i in (0..n).filter(|&i| labels[i] == c) {
                    counts[ds.cell(i, j)] += 1;
                    any = true;
                }
                if any {
                    // most frequent value, smallest code on ties
                    *slot = (0..counts.len()).fold(0, |b, v| if counts[v] > counts[b] { v } else { b });
                }
            }
        }
    }
    let a = assign(ds, &modes);
    let cost = a.iter().map(|&(_, d)| d as f64).sum();
    (a.into_iter().map(|(c, _)| c).collect(), cost)
}

/// k-modes under Hamming dissimilarity with per-attribute modes as centers.
pub fn kmodes(ds: &CategoricalDataset, k: usize, seed: u64, restarts: usize, exec: Exec) -> Result<ClusterAssignment> {
    let n = ds.n_objects();
    if k == 0 || k > n {
        return Err(Error::config(format!("k={k} invalid for {n} objects")));
    }
    let runs = map_indices(exec, restarts.max(1), |r| {
        let mut rng = indexed_rng(seed, Stream::KModes, r as u64);
        run(ds, k, &mut rng)
    });
    let (labels, inertia) = runs
        .into_iter()
        .reduce(|best, r| if r.1 < best.1 { r } else { best })
        .expect("at least one restart");
    Ok(ClusterAssignment { labels, k, seed, inertia })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::read_csv;

    #[test]
    fn singletons_cost_zero() {
        let ds = read_csv("a,x\nb,y\nc,x\nd,z\n".as_bytes(), false, None).unwrap();
        let a = kmodes(&ds, 4, 0, 2, Exec::Sequential).unwrap();
        assert_eq!(a.inertia, 0.0);
    }

    #[test]
    fn two_repeated_rows_recovered() {
        let text = "a,x,p\nb,y,q\na,x,p\nb,y,q\na,x,p\nb,y,q\n";
        let ds = read_csv(text.as_bytes(), false, None).unwrap();
        for seed in 0..10 {
            let a = kmodes(&ds, 2, seed, 1, Exec::Sequential).unwrap();
            assert_eq!(a.inertia, 0.0);
            for i in 0..6 {
                assert_eq!(a.labels[i] == a.labels[0], i % 2 == 0);
            }
        }
        assert!(kmodes(&ds, 7, 0, 1, Exec::Sequential).is_err());
    }
}
