//! Intra- and inter-attribute coupling spaces.
//!
//! An intra space maps each value of an attribute to its relative frequency.
//! An inter space maps each value to its conditional probabilities given every
//! value of every other attribute.

use nalgebra::DMatrix;

use crate::dataset::CategoricalDataset;
use crate::io::fmt_f64;
use crate::par::{map_indices, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    Intra,
    Inter,
}

impl CouplingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CouplingKind::Intra => "intra",
            CouplingKind::Inter => "inter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpace {
    pub attr: usize,
    pub kind: CouplingKind,
    /// One row per value of `attr`, in dictionary order.
    pub vectors: DMatrix<f64>,
    /// For inter spaces, the `(attribute, value)` each column conditions on.
    pub column_key: Vec<(usize, usize)>,
}

impl CouplingSpace {
    pub fn n_values(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn row(&self, value: usize) -> Vec<f64> {
        self.vectors.row(value).iter().copied().collect()
    }

    /// CSV dump: one row per value, header from the column key.
    pub fn to_csv(&self, ds: &CategoricalDataset) -> String {
        let mut out = String::from("value");
        match self.kind {
            CouplingKind::Intra => out.push_str(",frequency"),
            CouplingKind::Inter => {
                for &(k, v) in &self.column_key {
                    out.push(',');
                    out.push_str(&format!("{}={}", ds.attr_names()[k], ds.value_dict(k)[v]));
                }
            }
        }
        out.push('\n');
        for (i, name) in ds.value_dict(self.attr).iter().enumerate() {
            out.push_str(name);
            for x in self.vectors.row(i).iter() {
                out.push(',');
                out.push_str(&fmt_f64(*x));
            }
            out.push('\n');
        }
        out
    }
}

/// Relative frequency of every value of attribute `attr`.
pub fn intra_coupling(ds: &CategoricalDataset, attr: usize) -> CouplingSpace {
    let n_o = ds.n_objects() as f64;
    let counts = ds.value_counts(attr);
    CouplingSpace {
        attr,
        kind: CouplingKind::Intra,
        vectors: DMatrix::from_iterator(counts.len(), 1, counts.iter().map(|&c| c as f64 / n_o)),
        column_key: Vec::new(),
    }
}

/// Conditional probability `p(v | u) = |g(v) ∩ g(u)| / |g(u)|` of each value
/// `v` of `attr` given each value `u` of every other attribute.
///
/// Returns `None` for single-attribute tables, where the space is empty.
pub fn inter_coupling(ds: &CategoricalDataset, attr: usize) -> Option<CouplingSpace> {
    if ds.n_attributes() < 2 {
        return None;
    }
    let column_key: Vec<(usize, usize)> = (0..ds.n_attributes())
        .filter(|&k| k != attr)
        .flat_map(|k| (0..ds.n_values_in(k)).map(move |u| (k, u)))
        .collect();
    let n_rows = ds.n_values_in(attr);
    let n_cols = column_key.len();

    // joint[v, col] = |g(v) ∩ g(u)|, denom[col] = |g(u)|
    let mut joint = DMatrix::<f64>::zeros(n_rows, n_cols);
    let mut denom = vec![0.0; n_cols];
    let own = ds.column(attr);
    let mut base = 0;
    for k in (0..ds.n_attributes()).filter(|&k| k != attr) {
        for (i, &u) in ds.column(k).iter().enumerate() {
            let col = base + u as usize;
            joint[(own[i] as usize, col)] += 1.0;
            denom[col] += 1.0;
        }
        base += ds.n_values_in(k);
    }
    for (col, d) in denom.iter().enumerate() {
        for v in 0..n_rows {
            joint[(v, col)] /= d;
        }
    }
    Some(CouplingSpace {
        attr,
        kind: CouplingKind::Inter,
        vectors: joint,
        column_key,
    })
}

/// All coupling spaces: intra spaces for every attribute, then inter spaces
/// for every attribute (omitted when there is only one attribute).
pub fn build_all(ds: &CategoricalDataset, exec: Exec) -> Vec<CouplingSpace> {
    let n_a = ds.n_attributes();
    let mut spaces: Vec<CouplingSpace> = (0..n_a).map(|j| intra_coupling(ds, j)).collect();
    spaces.extend(map_indices(exec, n_a, |j| inter_coupling(ds, j)).into_iter().flatten());
    spaces
}
