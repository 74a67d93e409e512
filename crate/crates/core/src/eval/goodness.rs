//! (epsilon, gamma)-goodness curves of a similarity matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub gamma: f64,
}

/// Per object, mean similarity to its own class (excluding itself) minus
/// mean similarity to all other classes.
pub fn margins(s: &DMatrix<f64>, labels: &[usize]) -> Result<Vec<f64>> {
    let n = labels.len();
    if s.nrows() != n || s.ncols() != n {
        return Err(Error::data("similarity shape differs from label count"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_classes];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::data("goodness curve needs at least two classes"));
    }
    if sizes.iter().any(|&c| c == 1) {
        return Err(Error::data("goodness curve needs every class to have two members"));
    }
    Ok((0..n)
        .map(|o| {
            let (mut same, mut other) = (0.0, 0.0);
            for q in 0..n {
                if q == o {
                    continue;
                }
                if labels[q] == labels[o] {
                    same += s[(o, q)];
                } else {
                    other += s[(o, q)];
                }
            }
            same / (sizes[labels[o]] - 1) as f64 - other / (n - sizes[labels[o]]) as f64
        })
        .collect())
}

/// Samples `epsilon = i / steps` for `i = 0..=steps`. `gamma(epsilon)` is the
/// largest margin met by at least a `1 - epsilon` fraction of objects; only
/// points with `gamma >= 0` are returned.
pub fn goodness_curve(s: &DMatrix<f64>, labels: &[usize], steps: usize) -> Result<Vec<CurvePoint>> {
    if steps == 0 {
        return Err(Error::config("goodness grid needs at least one step"));
    }
    let mut m = margins(s, labels)?;
    m.sort_by(|a, b| b.total_cmp(a));
    let n = m.len();
    Ok((0..=steps)
        .filter_map(|i| {
            // ceil((1 - i/steps) * n), in integers
            let covered = ((steps - i) * n).div_ceil(steps).max(1);
            let gamma = m[covered - 1];
            (gamma >= 0.0).then_some(CurvePoint {
                epsilon: i as f64 / steps as f64,
                gamma,
            })
        })
        .collect())
}
