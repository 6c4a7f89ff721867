//! Certified upper bounds on the Lipschitz constant of ReLU networks.
//!
//! The crate computes the bounds K*, K1, K2, K3 and K4 for dense networks,
//! the explicit and implicit variants for convolutional networks with
//! max-pooling, and the exact activation-relaxed constant K by enumeration
//! for small networks. Benchmark generators build the x², xy, random and
//! MNIST-shaped networks used to study how sharp the bounds are.

pub mod error;
pub mod linalg;
pub mod par;

pub use error::{Error, Result};
pub use linalg::{abs_matrix, matmul, norm, svd, CsrMatrix, Matrix, NormKind, SvdFactors};
pub use par::Execution;
pub mod lowering;
pub mod netmodel;
pub mod subsets;
pub mod report;
pub mod bounds_dense;
pub mod bounds_conv;
pub mod benchgen;
pub mod study;
pub mod cli;
mod corners;
