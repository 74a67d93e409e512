//! Alternating optimisation of the heterogeneity weights against the relaxed
//! kernel k-means objective `Tr(S (I - H H^T))`.
//!
//! Each outer iteration takes `H` from the top eigenvectors of the current
//! similarity, then moves the weights with `H` fixed. The objective is linear
//! in the weights, so the full-batch weight step is a simplex vertex; the
//! stochastic step is one projected Adam update on a batch of object pairs.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::coupling::build_all;
use crate::dataset::CategoricalDataset;
use crate::error::{Error, Result};
use crate::heterogeneity::{
    project_feasible, similarity_matrix, similarity_submatrix, value_similarity, vector_representation,
    HeterogeneityParams, Representation,
};
use crate::kernel::{bank_to_string, build_stack, KernelFunction, KernelStack};
use crate::par::{map_indices, Exec};
use crate::rng::{component_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Exact eigen-step on the full similarity and exact linear weight step.
    Full,
    /// Per-iteration batch of object pairs and a projected Adam step.
    #[default]
    Stochastic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Stochastic => "stochastic",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "stochastic" => Ok(Mode::Stochastic),
            other => Err(Error::config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub n_clusters: usize,
    pub mode: Mode,
    pub learning_rate: f64,
    /// Object pairs per stochastic batch.
    pub batch_size: usize,
    pub max_iterations: usize,
    /// Stop once the loss change is at most this.
    pub delta: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Also return the dense similarity matrix.
    pub keep_similarity: bool,
    pub exec: Exec,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_clusters: 2,
            mode: Mode::Stochastic,
            learning_rate: 1e-3,
            batch_size: 20,
            max_iterations: 1000,
            delta: 1e-6,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            keep_similarity: false,
            exec: Exec::Parallel,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, n_objects: usize) -> Result<()> {
        if self.n_clusters < 2 {
            return Err(Error::config("n_clusters must be at least 2"));
        }
        if self.n_clusters > n_objects {
            return Err(Error::config(format!(
                "n_clusters {} exceeds object count {n_objects}",
                self.n_clusters
            )));
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            return Err(Error::config("delta must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return Err(Error::config("adam hyperparameters out of range"));
        }
        Ok(())
    }

    /// `key=value` pairs describing this config, for provenance.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("n_clusters".into(), self.n_clusters.to_string()),
            ("mode".into(), self.mode.to_string()),
            ("learning_rate".into(), format!("{:?}", self.learning_rate)),
            ("batch_size".into(), self.batch_size.to_string()),
            ("max_iterations".into(), self.max_iterations.to_string()),
            ("delta".into(), format!("{:?}", self.delta)),
            ("seed".into(), self.seed.to_string()),
            ("beta1".into(), format!("{:?}", self.beta1)),
            ("beta2".into(), format!("{:?}", self.beta2)),
            ("epsilon".into(), format!("{:?}", self.epsilon)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub loss: f64,
    pub delta: f64,
    pub omega_hash: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    pub rows: Vec<TraceRow>,
}

impl FitTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    pub fn last_delta(&self) -> Option<f64> {
        self.rows.last().map(|r| r.delta)
    }

    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str(&format!("# {c}\n"));
        }
        out.push_str("iteration,loss,delta,omega_hash\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:?},{:?},{:016x}\n", r.iteration, r.loss, r.delta, r.omega_hash));
        }
        out
    }
}

/// FNV-1a over the bit patterns of the weights.
pub fn weights_hash(w: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in w {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Top-`n_clusters` eigenvectors of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// `n x n_clusters`, orthonormal columns.
    pub h: DMatrix<f64>,
    /// Matching eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

/// Eigen-step: columns of `H` are the eigenvectors of the `n_clusters`
/// largest eigenvalues, each signed so its largest-magnitude entry is positive.
pub fn h_step(s: &DMatrix<f64>, n_clusters: usize) -> Result<Spectrum> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::data("similarity matrix is not square"));
    }
    if n_clusters > n {
        return Err(Error::config(format!("{n_clusters} eigenvectors requested from a {n}x{n} matrix")));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("similarity matrix has non-finite entries"));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::numeric("symmetric eigensolver did not converge"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut h = DMatrix::zeros(n, n_clusters);
    let mut eigenvalues = Vec::with_capacity(n_clusters);
    for (c, &k) in order.iter().take(n_clusters).enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        h.set_column(c, &(v * sign));
        eigenvalues.push(eig.eigenvalues[k]);
    }
    Ok(Spectrum { h, eigenvalues })
}

/// Error-free running sum: `hi + lo` carries the exact value of every added
/// term up to the final rounding.
#[derive(Default)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let z = s - self.hi;
        self.lo += (self.hi - (s - z)) + (x - z);
        self.hi = s;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.lo += a.mul_add(b, -p);
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// `Tr(S) - Tr(H^T S H)`.
///
/// The two traces nearly cancel near the optimum, so both are accumulated
/// with compensated sums and products.
pub fn loss(s: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64> {
    if s.nrows() != s.ncols() || h.nrows() != s.nrows() {
        return Err(Error::data(format!(
            "shape mismatch: S is {}x{}, H is {}x{}",
            s.nrows(),
            s.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let n = s.nrows();
    let mut acc = Compensated::default();
    for i in 0..n {
        acc.add(s[(i, i)]);
    }
    for c in 0..h.ncols() {
        let col = h.column(c);
        for i in 0..n {
            let mut row = Compensated::default();
            for j in 0..n {
                row.add_product(s[(i, j)], col[j]);
            }
            acc.add_product(-col[i], row.value());
        }
    }
    Ok(acc.value())
}

/// Which entries of `A = I - H H^T` enter the weight gradient.
#[derive(Debug, Clone, PartialEq)]
pub enum PairBatch {
    /// Every ordered pair of rows of `H`.
    All,
    /// Ordered pairs of row indices of `H`.
    Pairs(Vec<(usize, usize)>),
}

/// Gradient of the batch loss `sum_{(r,c)} S[o_r, o_c] A[r, c]` with respect
/// to every heterogeneity weight, where row `r` of `h` belongs to object
/// `objects[r]`.
///
/// The loss is linear in the weights; the coefficient of weight `t` of entry
/// `p` is `sum_{(r,c)} K_p[v_r, t] K_p[v_c, t] A[r, c]`.
pub fn omega_gradient(
    stack: &KernelStack,
    h: &DMatrix<f64>,
    objects: &[usize],
    batch: &PairBatch,
    exec: Exec,
) -> Result<Vec<f64>> {
    if h.nrows() != objects.len() {
        return Err(Error::data("H rows and object list differ in length"));
    }
    let n_a = stack.n_attributes();
    let n_values: Vec<usize> = (0..n_a)
        .map(|a| stack.entries.iter().find(|e| e.attr == a).map_or(0, |e| e.n_values()))
        .collect();

    // value-level aggregation of A per attribute
    let agg: Vec<DMatrix<f64>> = map_indices(exec, n_a, |a| {
        let nv = n_values[a];
        let codes = stack.codes(a);
        let code = |r: usize| codes[objects[r]] as usize;
        if nv == 0 {
            return DMatrix::zeros(0, 0);
        }
        match batch {
            PairBatch::All => {
                // M^T (I - H H^T) M = diag(counts) - (M^T H)(M^T H)^T
                let mut g = DMatrix::<f64>::zeros(nv, h.ncols());
                let mut counts = vec![0.0; nv];
                for r in 0..objects.len() {
                    let u = code(r);
                    counts[u] += 1.0;
                    for c in 0..h.ncols() {
                        g[(u, c)] += h[(r, c)];
                    }
                }
                let mut b: DMatrix<f64> = -(&g * g.transpose());
                for (u, n) in counts.into_iter().enumerate() {
                    b[(u, u)] += n;
                }
                b
            }
            PairBatch::Pairs(pairs) => {
                let mut b = DMatrix::zeros(nv, nv);
                for &(r, c) in pairs {
                    let hh = h.row(r).dot(&h.row(c));
                    let a_rc = if r == c { 1.0 - hh } else { -hh };
                    b[(code(r), code(c))] += a_rc;
                }
                b
            }
        }
    });
    if let PairBatch::Pairs(pairs) = batch {
        if pairs.iter().any(|&(r, c)| r >= objects.len() || c >= objects.len()) {
            return Err(Error::data("pair index out of range"));
        }
    }

    let blocks = map_indices(exec, stack.len(), |p| {
        let e = &stack.entries[p];
        let k = &e.matrix;
        let b = &agg[e.attr];
        let n = k.nrows();
        (0..n)
            .map(|t| {
                let mut s = 0.0;
                for u in 0..n {
                    let ku = k[(u, t)];
                    if ku == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for v in 0..n {
                        inner += b[(u, v)] * k[(v, t)];
                    }
                    s += ku * inner;
                }
                s
            })
            .collect::<Vec<f64>>()
    });
    Ok(blocks.into_iter().flatten().collect())
}

/// First and second moment estimates for the Adam weight step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One weight update. Stochastic mode: Adam then projection onto the feasible
/// set. Full mode: exact minimiser of the linear objective over the feasible
/// set, i.e. all mass on the smallest coefficient (lowest index on ties).
pub fn omega_step(
    params: &HeterogeneityParams,
    gradient: &[f64],
    config: &FitConfig,
    adam: &mut AdamState,
) -> Result<HeterogeneityParams> {
    if gradient.len() != params.len() {
        return Err(Error::data("gradient length differs from weight count"));
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("non-finite weight gradient"));
    }
    let n = params.len();
    let mut next = params.clone();
    match config.mode {
        Mode::Full => {
            let best = gradient
                .iter()
                .enumerate()
                .fold(0, |best, (i, &g)| if g < gradient[best] { i } else { best });
            let mut w = vec![0.0; n];
            w[best] = n as f64;
            next.set_weights(w);
        }
        Mode::Stochastic => {
            adam.t += 1;
            let (b1, b2) = (config.beta1, config.beta2);
            let c1 = 1.0 - b1.powi(adam.t);
            let c2 = 1.0 - b2.powi(adam.t);
            let raw: Vec<f64> = (0..n)
                .map(|i| {
                    let g = gradient[i];
                    adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * g;
                    adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * g * g;
                    let m_hat = adam.m[i] / c1;
                    let v_hat = adam.v[i] / c2;
                    params.as_slice()[i] - config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon)
                })
                .collect();
            next.set_weights(project_feasible(&raw));
        }
    }
    Ok(next)
}

/// Everything a fit produces.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub representation: Representation,
    pub params: HeterogeneityParams,
    pub trace: FitTrace,
    pub stack: KernelStack,
}

/// Builds coupling spaces and the kernel stack for a table.
pub fn prepare_stack(ds: &CategoricalDataset, bank: &[KernelFunction], exec: Exec) -> Result<KernelStack> {
    let spaces = build_all(ds, exec);
    build_stack(&spaces, bank, ds, exec)
}

/// Runs the alternating loop from all-ones weights. Returns the learned
/// weights and the per-iteration trace.
pub fn learn_heterogeneity(stack: &KernelStack, config: &FitConfig) -> Result<(HeterogeneityParams, FitTrace)> {
    let n_o = stack.n_objects();
    config.validate(n_o)?;
    let mut params = HeterogeneityParams::ones(stack);
    let mut trace = FitTrace::default();

    if config.n_clusters == n_o {
        trace.rows.push(TraceRow {
            iteration: 1,
            loss: 0.0,
            delta: f64::INFINITY,
            omega_hash: weights_hash(params.as_slice()),
        });
        return Ok((params, trace));
    }

    let mut adam = AdamState::new(params.len());
    let mut rng = component_rng(config.seed, Stream::Solver);
    let all_objects: Vec<usize> = (0..n_o).collect();
    let mut prev = f64::INFINITY;
    let mut iteration = 0;
    let mut s_full = match config.mode {
        Mode::Full => Some(similarity_matrix(stack, &params, config.exec)),
        Mode::Stochastic => None,
    };

    // at least one pass, even when delta is infinite
    loop {
        iteration += 1;
        let l = match config.mode {
            Mode::Full => {
                let s = s_full.as_ref().expect("full mode keeps S");
                let spec = h_step(s, config.n_clusters)?;
                let grad = omega_gradient(stack, &spec.h, &all_objects, &PairBatch::All, config.exec)?;
                params = omega_step(&params, &grad, config, &mut adam)?;
                let s_next = similarity_matrix(stack, &params, config.exec);
                let l = loss(&s_next, &spec.h)?;
                s_full = Some(s_next);
                l
            }
            Mode::Stochastic => {
                let pairs: Vec<(usize, usize)> = (0..config.batch_size)
                    .map(|_| (rng.random_range(0..n_o), rng.random_range(0..n_o)))
                    .collect();
                let mut objects: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
                objects.sort_unstable();
                objects.dedup();
                let local = |o: usize| objects.binary_search(&o).expect("object sampled");
                let local_pairs: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (local(a), local(b))).collect();

                let grad = if config.n_clusters >= objects.len() {
                    // H spans the whole batch, so A = 0
                    vec![0.0; params.len()]
                } else {
                    let vs = value_similarity(stack, &params);
                    let s_sub = similarity_submatrix(stack, &vs, &objects);
                    let spec = h_step(&s_sub, config.n_clusters)?;
                    omega_gradient(stack, &spec.h, &objects, &PairBatch::Pairs(local_pairs), Exec::Sequential)?
                };
                params = omega_step(&params, &grad, config, &mut adam)?;
                // the batch loss is linear in the weights
                params.as_slice().iter().zip(&grad).map(|(w, g)| w * g).sum()
            }
        };
        let delta = (l - prev).abs();
        prev = l;
        trace.rows.push(TraceRow {
            iteration,
            loss: l,
            delta,
            omega_hash: weights_hash(params.as_slice()),
        });
        if delta <= config.delta || iteration >= config.max_iterations {
            break;
        }
    }
    Ok((params, trace))
}

/// Full pipeline: couplings, kernel stack, weight learning, then `X` (and
/// optionally `S`) for every object. Labels are dropped before learning.
pub fn fit(ds: &CategoricalDataset, bank: &[KernelFunction], config: &FitConfig) -> Result<FitOutput> {
    config.validate(ds.n_objects())?;
    let unlabeled = ds.without_labels();
    let stack = prepare_stack(&unlabeled, bank, config.exec)?;
    let (params, trace) = learn_heterogeneity(&stack, config)?;
    let embedding = vector_representation(&stack, &params, config.exec)?;
    let similarity = config
        .keep_similarity
        .then(|| similarity_matrix(&stack, &params, config.exec));
    let mut echo = config.echo();
    echo.push(("kernels".into(), bank_to_string(bank)));
    let representation = Representation {
        similarity,
        embedding,
        config: echo,
        seed: config.seed,
        losses: trace.losses(),
        iterations: trace.rows.len(),
    };
    Ok(FitOutput {
        representation,
        params,
        trace,
        stack,
    })
}
