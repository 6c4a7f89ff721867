//! Dense and sparse real matrices, induced norms and the SVD.

mod dense;
mod norms;
mod sparse;
mod svd;

pub use dense::Matrix;
pub use norms::{abs_matrix, norm, NormKind};
pub use sparse::CsrMatrix;
pub use svd::{svd, SvdFactors};

use crate::error::Result;

/// Standard matrix product `a·b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}
