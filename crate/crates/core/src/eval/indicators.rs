//! Heterogeneity indicators computed against ground-truth classes.

use nalgebra::DMatrix;

use crate::coupling::CouplingSpace;
use crate::dataset::CategoricalDataset;
use crate::error::{Error, Result};

fn euclid_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Normalises the norm of a class-distribution vector so that a one-class
/// value maps to 1 and a uniformly spread value maps to 0.
fn normalize(x: f64, n_classes: usize) -> f64 {
    let uniform = euclid_norm(&vec![1.0 / n_classes as f64; n_classes]);
    1.0 - (1.0 - x) / (1.0 - uniform)
}

/// Intra-coupling heterogeneity: per value, the normalised norm of its class
/// distribution; averaged over values within an attribute, then over
/// attributes.
pub fn intra_indicator(ds: &CategoricalDataset, labels: &[usize]) -> Result<f64> {
    if labels.len() != ds.n_objects() {
        return Err(Error::data("label count differs from object count"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    if n_classes < 2 {
        return Err(Error::data("intra indicator needs at least two classes"));
    }
    let mut total = 0.0;
    for j in 0..ds.n_attributes() {
        let nv = ds.n_values_in(j);
        let mut joint = vec![vec![0.0; n_classes]; nv];
        let mut counts = vec![0.0; nv];
        for (i, &l) in labels.iter().enumerate() {
            let v = ds.cell(i, j);
            joint[v][l] += 1.0;
            counts[v] += 1.0;
        }
        let attr_mean: f64 = joint
            .iter()
            .zip(&counts)
            .map(|(row, &c)| {
                let dist: Vec<f64> = row.iter().map(|x| x / c).collect();
                normalize(euclid_norm(&dist), n_classes)
            })
            .sum::<f64>()
            / nv as f64;
        total += attr_mean;
    }
    Ok(total / ds.n_attributes() as f64)
}

/// Pairwise Euclidean distances between the value vectors of a space.
pub fn coupling_matrix(space: &CouplingSpace) -> DMatrix<f64> {
    let n = space.n_values();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = (space.vectors.row(i) - space.vectors.row(j)).norm();
            c[(i, j)] = d;
            c[(j, i)] = d;
        }
    }
    c
}

/// Inter-coupling heterogeneity of one attribute's coupling matrices:
/// root of the mean (over ordered matrix pairs) of the mean squared entry
/// difference.
pub fn inter_indicator(matrices: &[DMatrix<f64>]) -> Result<f64> {
    let first = matrices.first().ok_or_else(|| Error::data("no coupling matrices"))?;
    let nv = first.nrows();
    if matrices.iter().any(|m| m.nrows() != nv || m.ncols() != nv) {
        return Err(Error::data("coupling matrices differ in shape"));
    }
    let nm = matrices.len() as f64;
    let mut acc = 0.0;
    for a in matrices {
        for b in matrices {
            acc += (a - b).map(|x| x * x).sum() / (nv * nv) as f64;
        }
    }
    Ok((acc / (nm * nm)).sqrt())
}
