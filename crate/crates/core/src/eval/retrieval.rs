use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par::{map_indices, Exec};

/// Mean fraction of same-class objects among each object's `k` nearest
/// neighbours (Euclidean, self excluded, ties by lower index).
pub fn precision_at_k(x: &DMatrix<f64>, labels: &[usize], k: usize, exec: Exec) -> Result<f64> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::data("label count differs from embedding rows"));
    }
    if k == 0 || k >= n {
        return Err(Error::config(format!("k={k} must be in 1..{n}")));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let hits = map_indices(exec, n, |q| {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&o| o != q)
            .map(|o| {
                let d: f64 = rows[q].iter().zip(&rows[o]).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, o)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(k - 1, cmp);
        cand[..k].iter().filter(|&&(_, o)| labels[o] == labels[q]).count() as f64 / k as f64
    });
    Ok(hits.iter().sum::<f64>() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_retrieve_each_other() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 9.0, 9.0]);
        assert_eq!(precision_at_k(&x, &[0, 0, 1, 1], 1, Exec::Sequential).unwrap(), 1.0);
    }

    #[test]
    fn all_neighbours_give_class_share() {
        let x = DMatrix::from_fn(5, 2, |i, j| (i * 3 + j) as f64);
        let labels = [0, 0, 0, 1, 1];
        let p = precision_at_k(&x, &labels, 4, Exec::Sequential).unwrap();
        let expect = (3.0 * 2.0 / 4.0 + 2.0 * 1.0 / 4.0) / 5.0;
        assert!((p - expect).abs() < 1e-15);
        assert!(precision_at_k(&x, &labels, 5, Exec::Sequential).is_err());
    }
}
