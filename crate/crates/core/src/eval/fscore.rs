use pathfinding::prelude::{kuhn_munkres, Matrix};

use crate::error::{Error, Result};

fn dense_ids(ids: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = ids
        .iter()
        .map(|&x| {
            let next = map.len();
            *map.entry(x).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Class-weighted F1 after one-to-one cluster/class matching that maximises
/// total overlap. Unmatched classes score 0.
pub fn f_score(assignment: &[usize], labels: &[usize]) -> Result<f64> {
    if assignment.len() != labels.len() {
        return Err(Error::data(format!(
            "{} assignments for {} labels",
            assignment.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::data("no labels to score against"));
    }
    let (clusters, n_clusters) = dense_ids(assignment);
    let (classes, n_classes) = dense_ids(labels);
    let size = n_clusters.max(n_classes);
    let mut overlap = Matrix::new(size, size, 0i64);
    let mut cluster_size = vec![0usize; size];
    let mut class_size = vec![0usize; size];
    for (&c, &l) in clusters.iter().zip(&classes) {
        overlap[(c, l)] += 1;
        cluster_size[c] += 1;
        class_size[l] += 1;
    }
    let (_, matching) = kuhn_munkres(&overlap);
    let n = labels.len() as f64;
    let mut score = 0.0;
    for (c, &l) in matching.iter().enumerate() {
        let hit = overlap[(c, l)] as f64;
        if hit == 0.0 {
            continue;
        }
        let precision = hit / cluster_size[c] as f64;
        let recall = hit / class_size[l] as f64;
        score += class_size[l] as f64 / n * 2.0 * precision * recall / (precision + recall);
    }
    Ok(score)
}
