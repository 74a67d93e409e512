//! Unsupervised representation learning for categorical data.
//!
//! Values are embedded through intra-attribute (frequency) and
//! inter-attribute (conditional probability) coupling spaces, each coupling
//! space is lifted through a bank of kernels, and per-value weights over all
//! kernel spaces are learned against the relaxed kernel k-means objective.
//! The result is an object similarity matrix `S` and an explicit embedding
//! `X` with `S = X X^T`.
//!
//! ```no_run
//! use catcouple::{dataset, kernel, solver};
//! let ds = dataset::load_csv("zoo.csv".as_ref(), true, Some(&"type".parse().unwrap())).unwrap();
//! let cfg = solver::FitConfig { n_clusters: 7, ..Default::default() };
//! let out = solver::fit(&ds, &kernel::default_bank(), &cfg).unwrap();
//! println!("{:?}", out.representation.embedding.shape());
//! ```

pub mod coupling;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod heterogeneity;
pub mod io;
pub mod kernel;
pub mod model;
pub mod par;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use par::Exec;
