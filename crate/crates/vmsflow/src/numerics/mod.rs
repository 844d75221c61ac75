//! Sparse and dense linear algebra kernels.
//!
//! All assembled forms live in [`sparse::Csr`]; linear systems go through the
//! direct factorization in [`lu`]; the POD/ROM side uses the row-major
//! [`dense::DenseMatrix`] plus symmetric eigen- and singular-value
//! decompositions. Everything is f64.

pub mod dense;
pub mod lu;
pub mod sparse;

pub use dense::{dot, norm2, symmetric_eig, thin_svd, DenseLu, DenseMatrix};
pub use lu::{sparse_lu_factor, LuFactorization};
pub use sparse::{Coo, Csr};
