//! Measurement apparatus: clustering baselines, F-score, heterogeneity
//! indicators, goodness curves and retrieval precision.

pub mod fscore;
pub mod goodness;
pub mod indicators;
pub mod kmeans;
pub mod kmodes;
pub mod retrieval;

use std::fmt::Write;

use nalgebra::DMatrix;

use crate::coupling::build_all;
use crate::dataset::CategoricalDataset;
use crate::error::{Error, Result};
use crate::par::Exec;

pub use fscore::f_score;
pub use goodness::{goodness_curve, CurvePoint};
pub use indicators::{coupling_matrix, inter_indicator, intra_indicator};
pub use kmeans::kmeans;
pub use kmodes::kmodes;
pub use retrieval::precision_at_k;

/// Result of a hard clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster id in `0..k` for every object.
    pub labels: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    /// Objective of the producing algorithm (squared distances for k-means,
    /// mismatch count for k-modes).
    pub inertia: f64,
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Evaluation summary for one representation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    /// F-scores of k-means on the embedding, one per seed.
    pub f_scores: Vec<f64>,
    /// F-scores of the k-modes baseline, one per seed.
    pub baseline_f_scores: Option<Vec<f64>>,
    pub i_intra: f64,
    /// Per attribute, the inter indicator over its coupling matrices.
    pub i_inter: Vec<f64>,
    pub curve: Vec<CurvePoint>,
    /// `(k, precision@k)`.
    pub precision: Vec<(usize, f64)>,
    /// Extra provenance lines echoed into the summary.
    pub metadata: Vec<(String, String)>,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "f_score_alignment=hungarian_class_weighted_f1");
        if !self.f_scores.is_empty() {
            let _ = writeln!(out, "f_score_median={:?}", median(&self.f_scores));
            let _ = writeln!(out, "f_score_mean={:?}", mean(&self.f_scores));
        }
        if let Some(b) = &self.baseline_f_scores {
            let _ = writeln!(out, "kmodes_f_score_median={:?}", median(b));
            let _ = writeln!(out, "kmodes_f_score_mean={:?}", mean(b));
        }
        let _ = writeln!(out, "i_intra={:?}", self.i_intra);
        if !self.i_inter.is_empty() {
            let _ = writeln!(out, "i_inter_mean={:?}", mean(&self.i_inter));
        }
        for (k, p) in &self.precision {
            let _ = writeln!(out, "precision_at_{k}={p:?}");
        }
        out
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("epsilon,gamma\n");
        for p in &self.curve {
            let _ = writeln!(out, "{:?},{:?}", p.epsilon, p.gamma);
        }
        out
    }

    pub fn precision_csv(&self) -> String {
        let mut out = String::from("k,precision\n");
        for (k, p) in &self.precision {
            let _ = writeln!(out, "{k},{p:?}");
        }
        out
    }
}

/// What `evaluate` measures.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Clusters for k-means and k-modes; defaults to the class count.
    pub n_clusters: Option<usize>,
    /// Seeds `0..seeds`, one clustering each.
    pub seeds: u64,
    pub restarts: usize,
    pub k_list: Vec<usize>,
    /// Epsilon grid resolution for the goodness curve.
    pub curve_steps: usize,
    /// Also cluster the raw table with k-modes.
    pub baseline: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_clusters: None,
            seeds: 20,
            restarts: 1,
            k_list: vec![1, 5, 10],
            curve_steps: 100,
            baseline: false,
        }
    }
}

/// Scores embedding `x` of labeled table `ds`. The goodness curve uses
/// `S = X X^T`.
pub fn evaluate(ds: &CategoricalDataset, x: &DMatrix<f64>, opts: &EvalOptions, exec: Exec) -> Result<EvalReport> {
    let labels = ds
        .label_ids()
        .ok_or_else(|| Error::config("evaluation needs a label column"))?;
    if x.nrows() != ds.n_objects() {
        return Err(Error::data(format!(
            "embedding has {} rows, table has {} objects",
            x.nrows(),
            ds.n_objects()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("embedding has non-finite entries"));
    }
    if opts.seeds == 0 {
        return Err(Error::config("seeds must be at least 1"));
    }
    let k = opts.n_clusters.unwrap_or(ds.n_classes());
    let mut f_scores = Vec::with_capacity(opts.seeds as usize);
    for seed in 0..opts.seeds {
        let a = kmeans(x, k, seed, opts.restarts, exec)?;
        f_scores.push(f_score(&a.labels, &labels)?);
    }
    let baseline_f_scores = if opts.baseline {
        let mut b = Vec::with_capacity(opts.seeds as usize);
        for seed in 0..opts.seeds {
            let a = kmodes(ds, k, seed, opts.restarts, exec)?;
            b.push(f_score(&a.labels, &labels)?);
        }
        Some(b)
    } else {
        None
    };

    let i_intra = intra_indicator(ds, &labels)?;
    let spaces = build_all(&ds.without_labels(), exec);
    let i_inter = (0..ds.n_attributes())
        .map(|j| {
            let mats: Vec<DMatrix<f64>> = spaces.iter().filter(|s| s.attr == j).map(coupling_matrix).collect();
            inter_indicator(&mats)
        })
        .collect::<Result<Vec<_>>>()?;

    let s = x * x.transpose();
    let curve = goodness_curve(&s, &labels, opts.curve_steps)?;
    let precision = opts
        .k_list
        .iter()
        .map(|&kk| Ok((kk, precision_at_k(x, &labels, kk, exec)?)))
        .collect::<Result<Vec<_>>>()?;

    Ok(EvalReport {
        f_scores,
        baseline_f_scores,
        i_intra,
        i_inter,
        curve,
        precision,
        metadata: vec![
            ("n_clusters".into(), k.to_string()),
            ("seeds".into(), opts.seeds.to_string()),
            ("restarts".into(), opts.restarts.to_string()),
        ],
    })
}
