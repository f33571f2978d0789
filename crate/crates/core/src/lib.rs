//! Sparse principal component analysis with proximal-gradient (ISTA) and
//! FISTA solvers, plus a face-recognition style evaluation pipeline:
//! PCA / sparse-PCA reduction, nearest-neighbor and kernel ridge regression
//! classifiers, and the one-vs-rest Q accuracy.

pub mod classify;
pub mod cli;
pub mod datamat;
pub mod error;
pub mod metrics;
pub mod prox;
pub mod spca;

pub use datamat::{CenteredDataset, DataMatrix, LabelVector};
pub use error::{Error, Result};
pub use prox::{Method, SolverConfig, SolverTrace, Step};
pub use spca::{LoadingMatrix, Reducer, SpcaReport};
