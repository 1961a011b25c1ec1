//! Dense and sparse matrices of `f64`.

mod dense;
mod sparse;

pub use dense::DenseMatrix;
pub use sparse::SparseCsr;

pub(crate) use dense::dot as dense_dot;
