//! Direct sparse LU factorization and solve (faer backend).
//!
//! faer's global parallelism is pinned to sequential once, before the first
//! factorization: linear solves must produce identical bits whether or not
//! the element loops run under rayon.

use std::sync::Once;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::numerics::dense::DenseMatrix;
use crate::numerics::sparse::Csr;

static PIN_SEQUENTIAL: Once = Once::new();

fn pin_sequential() {
    PIN_SEQUENTIAL.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// Immutable LU factorization; concurrent solves with distinct right-hand
/// sides are safe.
pub struct LuFactorization {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

/// Factors a square sparse matrix. Fails with [`Error::Singular`] when the
/// factorization itself reports a problem; numerically singular pivots that
/// only surface as non-finite solution entries are caught in
/// [`LuFactorization::solve`].
pub fn sparse_lu_factor(a: &Csr) -> Result<LuFactorization> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::Dimension(format!(
            "cannot factor a {}x{} matrix",
            a.n_rows(),
            a.n_cols()
        )));
    }
    pin_sequential();
    let triplets: Vec<Triplet<usize, usize, f64>> =
        a.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.n_rows(), a.n_cols(), &triplets)
        .map_err(|e| Error::Singular(format!("sparse matrix construction failed: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::Singular(format!("sparse LU factorization failed: {e:?}")))?;
    Ok(LuFactorization { n: a.n_rows(), lu })
}

impl LuFactorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!(
                "right-hand side length {} does not match system size {}",
                b.len(),
                self.n
            )));
        }
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(
                "solve produced non-finite entries (numerically singular pivot)".into(),
            ));
        }
        Ok(out)
    }

    /// Multi right-hand-side solve; columns of `b` are independent systems.
    pub fn solve_mat(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.n_rows() != self.n {
            return Err(Error::Dimension(format!(
                "right-hand side height {} does not match system size {}",
                b.n_rows(),
                self.n
            )));
        }
        let rhs = Mat::from_fn(self.n, b.n_cols(), |i, j| b[(i, j)]);
        let x = self.lu.solve(&rhs);
        let mut out = DenseMatrix::zeros(self.n, b.n_cols());
        for i in 0..self.n {
            for j in 0..b.n_cols() {
                let v = x[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Singular(
                        "solve produced non-finite entries (numerically singular pivot)".into(),
                    ));
                }
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}
