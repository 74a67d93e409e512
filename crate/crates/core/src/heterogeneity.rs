//! Heterogeneity weights and the wrapper-kernel representation they induce.
//!
//! Every kernel entry `p` carries a nonnegative diagonal weight block `w_p`,
//! one weight per value of its attribute. Object similarity is
//! `S_ij = sum_p K_p[vi,:] diag(w_p) K_p[vj,:]^T`, and the explicit feature map
//! `x_i = concat_p sqrt(w_p) * K_p[vi,:]` satisfies `S = X X^T`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::KernelStack;
use crate::par::{map_indices, Exec};

/// Flat weight vector, blocked per kernel entry.
///
/// Feasible set: all entries `>= 0` and summing to the entry count, which
/// keeps the all-ones start feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityParams {
    weights: Vec<f64>,
    offsets: Vec<usize>,
}

impl HeterogeneityParams {
    /// All-ones weights for a stack.
    pub fn ones(stack: &KernelStack) -> Self {
        Self::from_flat(stack, vec![1.0; stack.n_weights()]).expect("ones are valid")
    }

    pub fn zeros(stack: &KernelStack) -> Self {
        Self::from_flat(stack, vec![0.0; stack.n_weights()]).expect("zeros are valid")
    }

    /// Wraps a flat weight vector laid out in stack order. Only shape and
    /// finiteness are checked; use [`is_feasible`](Self::is_feasible) for the
    /// simplex constraint.
    pub fn from_flat(stack: &KernelStack, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != stack.n_weights() {
            return Err(Error::data(format!(
                "{} weights for a stack expecting {}",
                weights.len(),
                stack.n_weights()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::numeric("non-finite heterogeneity weight"));
        }
        Ok(Self {
            weights,
            offsets: (0..stack.len()).map(|p| stack.offset(p)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn block(&self, p: usize) -> &[f64] {
        let start = self.offsets[p];
        let end = self.offsets.get(p + 1).copied().unwrap_or(self.weights.len());
        &self.weights[start..end]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * c).collect(),
            offsets: self.offsets.clone(),
        }
    }

    pub(crate) fn set_weights(&mut self, weights: Vec<f64>) {
        debug_assert_eq!(weights.len(), self.weights.len());
        self.weights = weights;
    }

    /// Nonnegative and summing to `len()` within `tol` relative.
    pub fn is_feasible(&self, tol: f64) -> bool {
        let n = self.weights.len() as f64;
        self.weights.iter().all(|&w| w >= 0.0) && (self.weights.iter().sum::<f64>() - n).abs() <= tol * n.max(1.0)
    }

    fn check_nonnegative(&self) -> Result<()> {
        match self.weights.iter().position(|&w| w < 0.0) {
            Some(i) => Err(Error::numeric(format!("negative heterogeneity weight at index {i}"))),
            None => Ok(()),
        }
    }
}

/// Projects a raw weight vector onto the feasible set: negatives clip to 0,
/// then the sum is rescaled to the length. An all-zero vector resets to ones.
pub fn project_feasible(raw: &[f64]) -> Vec<f64> {
    let n = raw.len() as f64;
    let clipped: Vec<f64> = raw.iter().map(|&w| if w > 0.0 { w } else { 0.0 }).collect();
    let sum: f64 = clipped.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return vec![1.0; raw.len()];
    }
    let scale = n / sum;
    clipped.into_iter().map(|w| w * scale).collect()
}

/// Wrapper-kernel similarity of two objects.
pub fn object_similarity(stack: &KernelStack, params: &HeterogeneityParams, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for (p, entry) in stack.entries.iter().enumerate() {
        let (vi, vj) = (stack.value_index(i, p), stack.value_index(j, p));
        for (t, &w) in params.block(p).iter().enumerate() {
            s += w * entry.matrix[(vi, t)] * entry.matrix[(vj, t)];
        }
    }
    s
}

/// Per attribute, the weighted value-level Gram matrix
/// `sum_{p on attr} K_p diag(w_p) K_p`. Exactly symmetric.
pub fn value_similarity(stack: &KernelStack, params: &HeterogeneityParams) -> Vec<DMatrix<f64>> {
    let n_a = stack.n_attributes();
    let mut out: Vec<Option<DMatrix<f64>>> = vec![None; n_a];
    for (p, entry) in stack.entries.iter().enumerate() {
        let k = &entry.matrix;
        let n = k.nrows();
        let w = params.block(p);
        let acc = out[entry.attr].get_or_insert_with(|| DMatrix::zeros(n, n));
        for u in 0..n {
            for v in u..n {
                let mut s = 0.0;
                for t in 0..n {
                    s += w[t] * (k[(u, t)] * k[(v, t)]);
                }
                acc[(u, v)] += s;
                if u != v {
                    acc[(v, u)] += s;
                }
            }
        }
    }
    out.into_iter()
        .map(|m| m.unwrap_or_else(|| DMatrix::zeros(0, 0)))
        .collect()
}

/// Similarity among a subset of objects, in the order given.
pub fn similarity_submatrix(stack: &KernelStack, value_sim: &[DMatrix<f64>], objects: &[usize]) -> DMatrix<f64> {
    let m = objects.len();
    let mut s = DMatrix::zeros(m, m);
    for (a, w) in value_sim.iter().enumerate() {
        if w.is_empty() {
            continue;
        }
        let codes = stack.codes(a);
        for (r, &i) in objects.iter().enumerate() {
            let ci = codes[i] as usize;
            for (c, &j) in objects.iter().enumerate().skip(r) {
                s[(r, c)] += w[(ci, codes[j] as usize)];
            }
        }
    }
    for r in 0..m {
        for c in 0..r {
            s[(r, c)] = s[(c, r)];
        }
    }
    s
}

/// Full `n_o x n_o` similarity matrix.
pub fn similarity_matrix(stack: &KernelStack, params: &HeterogeneityParams, exec: Exec) -> DMatrix<f64> {
    let n = stack.n_objects();
    let value_sim = value_similarity(stack, params);
    let rows = map_indices(exec, n, |i| {
        let mut row = vec![0.0; n];
        for (a, w) in value_sim.iter().enumerate() {
            if w.is_empty() {
                continue;
            }
            let codes = stack.codes(a);
            let ci = codes[i] as usize;
            for j in i..n {
                row[j] += w[(ci, codes[j] as usize)];
            }
        }
        row
    });
    let mut s = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for j in i..n {
            s[(i, j)] = row[j];
            s[(j, i)] = row[j];
        }
    }
    s
}

/// Explicit embedding `X` (`n_o x n_weights`) with `X X^T = S`.
pub fn vector_representation(
    stack: &KernelStack,
    params: &HeterogeneityParams,
    exec: Exec,
) -> Result<DMatrix<f64>> {
    params.check_nonnegative()?;
    let n_w = stack.n_weights();
    // per entry, rows of sqrt(w) * K
    let scaled: Vec<DMatrix<f64>> = stack
        .entries
        .iter()
        .enumerate()
        .map(|(p, e)| {
            let w = params.block(p);
            DMatrix::from_fn(e.n_values(), e.n_values(), |u, t| w[t].sqrt() * e.matrix[(u, t)])
        })
        .collect();
    let rows = map_indices(exec, stack.n_objects(), |i| {
        let mut row = Vec::with_capacity(n_w);
        for (p, r) in scaled.iter().enumerate() {
            let u = stack.value_index(i, p);
            row.extend(r.row(u).iter().copied());
        }
        row
    });
    Ok(DMatrix::from_row_iterator(stack.n_objects(), n_w, rows.into_iter().flatten()))
}

/// Learned representation together with fit metadata.
#[derive(Debug, Clone)]
pub struct Representation {
    pub similarity: Option<DMatrix<f64>>,
    pub embedding: DMatrix<f64>,
    pub config: Vec<(String, String)>,
    pub seed: u64,
    pub losses: Vec<f64>,
    pub iterations: usize,
}
