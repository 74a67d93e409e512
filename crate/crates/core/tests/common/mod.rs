//! Oracles and fixtures shared by integration tests. Nothing here calls the
//! library routine it is used to check.
#![allow(dead_code)]

use catcouple::dataset::{read_csv, synth_generate, CategoricalDataset, LabelColumn, SynthSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOY: &str = "Texture,Color,RootShape,Sweetness
clear,white,straight,low
blurry,yellow,straight,low
blurry,yellow,curled,low
clear,green,slightly curled,low
blurry,green,curled,high
clear,black,slightly curled,high
";

pub fn toy() -> CategoricalDataset {
    read_csv(TOY.as_bytes(), true, Some(&LabelColumn::Name("Sweetness".into()))).unwrap()
}

pub fn zoo_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/zoo.csv")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small labeled synthetic table with randomly drawn factors.
pub fn random_small(seed: u64, max_objects: usize) -> CategoricalDataset {
    let mut r = rng(seed ^ 0x5eed);
    let n_clusters = r.random_range(2..=3);
    let n_mv = r.random_range(2..=4);
    let spec = SynthSpec {
        n_o: r.random_range(12..=max_objects),
        n_a: r.random_range(2..=4),
        n_mv,
        n_clusters,
        separation: r.random_range(0.3..0.95),
        seed,
    };
    synth_generate(&spec).unwrap()
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// descending eigenvalue. Eigenvectors are the columns of the second matrix.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 0.5 * (m[(i, j)] + m[(j, i)])).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut().chain(v.iter_mut()) {
                    let (kp, kq) = (row[p], row[q]);
                    row[p] = c * kp - s * kq;
                    row[q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (a[p][k], a[q][k]);
                    a[p][k] = c * pk - s * qk;
                    a[q][k] = s * pk + c * qk;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[r][order[c]]);
    (values, vectors)
}

pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    jacobi_eigen(m).0
}

/// Double-word accumulator built from error-free transformations.
#[derive(Default, Clone, Copy)]
pub struct DoubleWord {
    hi: f64,
    lo: f64,
}

impl DoubleWord {
    pub fn push(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
        self.lo += err;
    }

    pub fn push_mul(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.push(p);
        self.lo += a.mul_add(b, -p);
    }

    pub fn get(self) -> f64 {
        self.hi + self.lo
    }
}

/// `Tr(S)` minus the sum of its `n_c` largest eigenvalues, each eigenvalue
/// refined as the Rayleigh quotient of its Jacobi eigenvector in double-word
/// arithmetic.
pub fn spectral_residual(s: &DMatrix<f64>, n_c: usize) -> f64 {
    let (_, vecs) = jacobi_eigen(s);
    let n = s.nrows();
    let mut total = DoubleWord::default();
    for i in 0..n {
        total.push(s[(i, i)]);
    }
    for c in 0..n_c {
        let v = vecs.column(c);
        let mut norm = DoubleWord::default();
        let mut quad = DoubleWord::default();
        for i in 0..n {
            norm.push_mul(v[i], v[i]);
            let mut sv = DoubleWord::default();
            for j in 0..n {
                sv.push_mul(s[(i, j)], v[j]);
            }
            quad.push_mul(v[i], sv.get());
        }
        total.push(-quad.get() / norm.get());
    }
    total.get()
}

/// Margins by explicit class member lists.
pub fn brute_margins(s: &DMatrix<f64>, labels: &[usize]) -> Vec<f64> {
    let n = labels.len();
    (0..n)
        .map(|o| {
            let same: Vec<usize> = (0..n).filter(|&q| q != o && labels[q] == labels[o]).collect();
            let other: Vec<usize> = (0..n).filter(|&q| labels[q] != labels[o]).collect();
            let mut a = 0.0;
            for &q in &same {
                a += s[(o, q)];
            }
            let mut b = 0.0;
            for &q in &other {
                b += s[(o, q)];
            }
            a / same.len() as f64 - b / other.len() as f64
        })
        .collect()
}

/// `(epsilon, gamma)` pairs: gamma is the largest margin `m` such that the
/// share of objects with margin `>= m` is at least `1 - epsilon`, compared in
/// exact integer arithmetic; only `gamma >= 0` kept.
pub fn brute_curve(s: &DMatrix<f64>, labels: &[usize], steps: usize) -> Vec<(f64, f64)> {
    let m = brute_margins(s, labels);
    let n = m.len();
    let mut out = Vec::new();
    for i in 0..=steps {
        let mut best = f64::NEG_INFINITY;
        for &cand in &m {
            let count = m.iter().filter(|&&x| x >= cand).count();
            if count * steps >= (steps - i) * n && cand > best {
                best = cand;
            }
        }
        if best >= 0.0 {
            out.push((i as f64 / steps as f64, best));
        }
    }
    out
}

/// Precision@k by fully sorting every object's neighbours.
pub fn brute_precision(x: &DMatrix<f64>, labels: &[usize], k: usize) -> f64 {
    let n = x.nrows();
    let mut total = 0.0;
    for q in 0..n {
        let mut d: Vec<(f64, usize)> = Vec::new();
        for o in 0..n {
            if o == q {
                continue;
            }
            let mut acc = 0.0;
            for c in 0..x.ncols() {
                let diff = x[(q, c)] - x[(o, c)];
                acc += diff * diff;
            }
            d.push((acc, o));
        }
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        total += d[..k].iter().filter(|&&(_, o)| labels[o] == labels[q]).count() as f64 / k as f64;
    }
    total / n as f64
}

/// Ordinary least-squares line fit; returns R².
pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}
