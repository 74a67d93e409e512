//! Kernel functions and the stack of value-level kernel matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::coupling::{CouplingKind, CouplingSpace};
use crate::dataset::CategoricalDataset;
use crate::error::{Error, Result};
use crate::par::{map_indices, Exec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFunction {
    /// `exp(-|a-b|^2 / (2 w^2))`
    Gaussian { width: f64 },
    /// `(a.b + 1)^d`
    Polynomial { order: u32 },
    Linear,
}

impl KernelFunction {
    pub fn gaussian(width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::config(format!("gaussian width must be positive, got {width}")));
        }
        Ok(KernelFunction::Gaussian { width })
    }

    pub fn polynomial(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("polynomial order must be at least 1"));
        }
        Ok(KernelFunction::Polynomial { order })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::data(format!("kernel inputs differ in dimension: {} vs {}", a.len(), b.len())));
        }
        Ok(self.eval_unchecked(a, b))
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelFunction::Gaussian { width } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * width * width)).exp()
            }
            KernelFunction::Polynomial { order } => (dot(a, b) + 1.0).powi(order as i32),
            KernelFunction::Linear => dot(a, b),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Free-function form of [`KernelFunction::eval`].
pub fn kernel_eval(f: &KernelFunction, a: &[f64], b: &[f64]) -> Result<f64> {
    f.eval(a, b)
}

impl fmt::Display for KernelFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFunction::Gaussian { width } => write!(f, "gaussian:{width:?}"),
            KernelFunction::Polynomial { order } => write!(f, "poly:{order}"),
            KernelFunction::Linear => write!(f, "linear"),
        }
    }
}

fn parse_real(s: &str) -> Option<f64> {
    // accepts plain reals and powers of two written as 2^k
    match s.split_once('^') {
        Some((base, exp)) => Some(base.trim().parse::<f64>().ok()?.powi(exp.trim().parse::<i32>().ok()?)),
        None => s.trim().parse().ok(),
    }
}

impl FromStr for KernelFunction {
    type Err = Error;

    fn from_str(token: &str) -> Result<Self> {
        let token = token.trim();
        let bad = || Error::config(format!("unknown kernel token {token:?}"));
        match token.split_once(':') {
            None if token == "linear" => Ok(KernelFunction::Linear),
            Some(("gaussian", w)) => KernelFunction::gaussian(parse_real(w).ok_or_else(bad)?),
            Some(("poly", d)) => KernelFunction::polynomial(d.trim().parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

/// 11 gaussians with widths 2^-5 ..= 2^5, then polynomials of order 1 ..= 3.
pub fn default_bank() -> Vec<KernelFunction> {
    let mut bank: Vec<KernelFunction> = (-5..=5)
        .map(|k| KernelFunction::Gaussian { width: 2f64.powi(k) })
        .collect();
    bank.extend((1..=3).map(|order| KernelFunction::Polynomial { order }));
    bank
}

/// Parses a comma- or whitespace-separated list of kernel tokens.
pub fn parse_bank(spec: &str) -> Result<Vec<KernelFunction>> {
    let bank: Vec<KernelFunction> = spec
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if bank.is_empty() {
        return Err(Error::config("empty kernel bank"));
    }
    Ok(bank)
}

pub fn bank_to_string(bank: &[KernelFunction]) -> String {
    bank.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Kernel matrix over the value rows of a coupling space. Only the upper
/// triangle is evaluated; the lower one is mirrored.
pub fn build_kernel_matrix(space: &CouplingSpace, f: &KernelFunction) -> DMatrix<f64> {
    let n = space.n_values();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| space.row(i)).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = f.eval_unchecked(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelEntry {
    /// Index of the source coupling space.
    pub space: usize,
    pub attr: usize,
    pub kind: CouplingKind,
    pub func: KernelFunction,
    pub matrix: DMatrix<f64>,
}

impl KernelEntry {
    pub fn n_values(&self) -> usize {
        self.matrix.nrows()
    }
}

/// All kernel matrices, ordered space-major then kernel-minor, plus the
/// object-to-value index used to pick rows out of them.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStack {
    pub entries: Vec<KernelEntry>,
    /// Per attribute, the value code of every object.
    codes: Vec<Vec<u32>>,
    /// Start of each entry's block inside the flat weight vector.
    offsets: Vec<usize>,
}

impl KernelStack {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_objects(&self) -> usize {
        self.codes[0].len()
    }

    pub fn n_attributes(&self) -> usize {
        self.codes.len()
    }

    /// Row of object `object` inside entry `p`'s kernel matrix.
    pub fn value_index(&self, object: usize, p: usize) -> usize {
        self.codes[self.entries[p].attr][object] as usize
    }

    pub fn codes(&self, attr: usize) -> &[u32] {
        &self.codes[attr]
    }

    /// Total number of heterogeneity weights, one per (entry, value).
    pub fn n_weights(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0)
            + self.entries.last().map_or(0, KernelEntry::n_values)
    }

    pub fn offset(&self, p: usize) -> usize {
        self.offsets[p]
    }

    /// Block sizes of the flat weight vector, one per entry.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.entries.iter().map(KernelEntry::n_values).collect()
    }

    /// Same kernels, different object rows (e.g. an out-of-sample table
    /// re-coded against the training dictionaries).
    pub fn with_codes(&self, ds: &CategoricalDataset) -> Result<Self> {
        if ds.n_attributes() != self.n_attributes() {
            return Err(Error::data("attribute count differs from the kernel stack"));
        }
        for e in &self.entries {
            if ds.n_values_in(e.attr) != e.n_values() {
                return Err(Error::data("value dictionaries differ from the kernel stack"));
            }
        }
        Ok(Self {
            entries: self.entries.clone(),
            codes: (0..ds.n_attributes()).map(|j| ds.column(j).to_vec()).collect(),
            offsets: self.offsets.clone(),
        })
    }

    /// Keeps only entries whose index satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Self {
        let entries: Vec<KernelEntry> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(p, _)| keep(*p))
            .map(|(_, e)| e.clone())
            .collect();
        Self::assemble(entries, self.codes.clone())
    }

    fn assemble(entries: Vec<KernelEntry>, codes: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(entries.len());
        let mut acc = 0;
        for e in &entries {
            offsets.push(acc);
            acc += e.n_values();
        }
        Self {
            entries,
            codes,
            offsets,
        }
    }
}

/// Builds `|spaces| x |funcs|` kernel matrices.
pub fn build_stack(
    spaces: &[CouplingSpace],
    funcs: &[KernelFunction],
    ds: &CategoricalDataset,
    exec: Exec,
) -> Result<KernelStack> {
    if funcs.is_empty() {
        return Err(Error::config("kernel bank is empty"));
    }
    let n_f = funcs.len();
    let entries = map_indices(exec, spaces.len() * n_f, |idx| {
        let (s, f) = (idx / n_f, idx % n_f);
        KernelEntry {
            space: s,
            attr: spaces[s].attr,
            kind: spaces[s].kind,
            func: funcs[f],
            matrix: build_kernel_matrix(&spaces[s], &funcs[f]),
        }
    });
    let codes = (0..ds.n_attributes()).map(|j| ds.column(j).to_vec()).collect();
    Ok(KernelStack::assemble(entries, codes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{build_all, inter_coupling, intra_coupling};
    use crate::dataset::{read_csv, LabelColumn};
    use proptest::prelude::*;

    fn watermelon() -> CategoricalDataset {
        let text = "Texture,Color,RootShape,Sweetness
clear,white,straight,low
blurry,yellow,straight,low
blurry,yellow,curled,low
clear,green,slightly curled,low
blurry,green,curled,high
clear,black,slightly curled,high
";
        read_csv(text.as_bytes(), true, Some(&LabelColumn::Name("Sweetness".into()))).unwrap()
    }

    #[test]
    fn linear_self_kernel_of_yellow() {
        let ds = watermelon();
        let color = inter_coupling(&ds, 1).unwrap();
        let yellow = color.row(1);
        let green = color.row(2);
        assert!((kernel_eval(&KernelFunction::Linear, &yellow, &yellow).unwrap() - 17.0 / 18.0).abs() < 1e-12);
        assert!((kernel_eval(&KernelFunction::Linear, &yellow, &green).unwrap() - 17.0 / 36.0).abs() < 1e-12);
        let k = build_kernel_matrix(&color, &KernelFunction::Linear);
        assert_eq!(k.shape(), (4, 4));
        assert!((k[(1, 1)] - 17.0 / 18.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_and_constant_rows() {
        let ds = watermelon();
        for space in build_all(&ds, Exec::Sequential) {
            let k = build_kernel_matrix(&space, &KernelFunction::Gaussian { width: 0.5 });
            assert!(k.diagonal().iter().all(|&d| d == 1.0));
        }
        let texture = intra_coupling(&ds, 0);
        for f in default_bank() {
            let k = build_kernel_matrix(&texture, &f);
            assert!(k.iter().all(|&x| x == k[(0, 0)]));
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(KernelFunction::Linear.eval(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn tokens_round_trip() {
        let bank = default_bank();
        assert_eq!(bank.len(), 14);
        assert_eq!(parse_bank(&bank_to_string(&bank)).unwrap(), bank);
        assert_eq!("gaussian:2^-5".parse::<KernelFunction>().unwrap(), KernelFunction::Gaussian { width: 0.03125 });
        assert_eq!("linear".parse::<KernelFunction>().unwrap(), KernelFunction::Linear);
        for bad in ["rbf:1", "gaussian:-1", "poly:0", "poly:x", "gaussian", ""] {
            assert!(matches!(bad.parse::<KernelFunction>(), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn stack_counts_and_order() {
        let ds = watermelon();
        let spaces = build_all(&ds, Exec::Sequential);
        let stack = build_stack(&spaces, &default_bank(), &ds, Exec::Sequential).unwrap();
        assert_eq!(stack.len(), 84);
        assert_eq!(stack.entries[15].space, 1);
        assert_eq!(stack.entries[15].func, default_bank()[1]);
        let lin = build_stack(&spaces, &[KernelFunction::Linear], &ds, Exec::Sequential).unwrap();
        assert_eq!(lin.len(), 6);
        // weights: 14 * 2 * (2 + 4 + 3)
        assert_eq!(stack.n_weights(), 14 * 2 * 9);
        assert_eq!(stack.value_index(2, 4), 1);
        assert_eq!(stack, build_stack(&spaces, &default_bank(), &ds, Exec::Parallel).unwrap());
        assert!(build_stack(&spaces, &[], &ds, Exec::Sequential).is_err());
    }

    #[test]
    fn kernel_matrices_are_psd() {
        let ds = watermelon();
        let stack = build_stack(&build_all(&ds, Exec::Sequential), &default_bank(), &ds, Exec::Sequential).unwrap();
        for e in &stack.entries {
            assert_eq!(e.matrix, e.matrix.transpose());
            let eig = nalgebra::SymmetricEigen::new(e.matrix.clone()).eigenvalues;
            let max = eig.max();
            assert!(eig.min() >= -1e-8 * max.max(1.0), "{} {:?}", e.func, eig);
        }
    }

    proptest! {
        #[test]
        fn kernel_eval_symmetric(a in prop::collection::vec(0.0f64..1.0, 4), b in prop::collection::vec(0.0f64..1.0, 4), w in 0.01f64..10.0, d in 1u32..4) {
            for f in [KernelFunction::Gaussian { width: w }, KernelFunction::Polynomial { order: d }, KernelFunction::Linear] {
                prop_assert_eq!(f.eval(&a, &b).unwrap(), f.eval(&b, &a).unwrap());
            }
        }
    }
}
