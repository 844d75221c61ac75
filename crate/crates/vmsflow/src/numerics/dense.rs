//! Row-major dense matrices and the factorizations behind POD and the
//! reduced solvers (nalgebra backend).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(n_rows, n_cols);
        for r in 0..n_rows {
            for c in 0..n_cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "row-major data length mismatch");
        DenseMatrix { n_rows, n_cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[f64]) {
        assert_eq!(v.len(), self.n_rows);
        for r in 0..self.n_rows {
            self[(r, c)] = v[r];
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n_cols, self.n_rows, |r, c| self[(c, r)])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension mismatch");
        (0..self.n_rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, other.n_rows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for r in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(r, k)];
                if a != 0.0 {
                    for c in 0..other.n_cols {
                        out[(r, c)] += a * other[(k, c)];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.data)
    }

    fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        &self.data[r * self.n_cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        &mut self.data[r * self.n_cols + c]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Generalized symmetric eigendecomposition A·v = λ·M·v.
///
/// Returns eigenvalues sorted descending with M-orthonormal eigenvectors as
/// the columns of the returned matrix. M must be symmetric positive definite
/// (detected through its Cholesky factorization); A symmetric.
pub fn symmetric_eig(a: &DenseMatrix, m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.n_rows();
    if a.n_cols() != n || m.n_rows() != n || m.n_cols() != n {
        return Err(Error::Dimension("eigenproblem matrices must be square and same size".into()));
    }
    let chol = m
        .to_na()
        .cholesky()
        .ok_or_else(|| Error::Invalid("eigenproblem mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // B = L⁻¹ A L⁻ᵀ, symmetrized to guard against roundoff drift.
    let c = l
        .solve_lower_triangular(&a.to_na())
        .ok_or_else(|| Error::Singular("triangular solve failed in eigenproblem".into()))?;
    let b = l
        .solve_lower_triangular(&c.transpose())
        .ok_or_else(|| Error::Singular("triangular solve failed in eigenproblem".into()))?;
    let b = (&b + b.transpose()).scale(0.5);
    let eig = b.symmetric_eigen();
    // Back-transform and sort descending.
    let y = eig.eigenvectors;
    let x = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Singular("triangular solve failed in eigenproblem".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| x[(r, order[c])]);
    Ok((values, vectors))
}

/// Thin singular value decomposition A = U Σ Vᵀ with σ sorted descending and
/// U, V carrying orthonormal columns.
pub fn thin_svd(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let svd = a.to_na().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let vt = svd.v_t.expect("right singular vectors requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap()
    });
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = DenseMatrix::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let v_sorted = DenseMatrix::from_fn(vt.ncols(), k, |r, c| vt[(order[c], r)]);
    (u_sorted, sigma, v_sorted)
}

/// Cholesky factor L with A = L·Lᵀ; fails when A is not positive definite.
pub fn cholesky_lower(a: &DenseMatrix) -> Result<DenseMatrix> {
    let chol = a
        .to_na()
        .cholesky()
        .ok_or_else(|| Error::Invalid("matrix is not positive definite".into()))?;
    Ok(DenseMatrix::from_na(&chol.l()))
}

/// Dense LU with partial pivoting, reused across right-hand sides by the
/// reduced solvers.
pub struct DenseLu {
    n: usize,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn new(a: &DenseMatrix) -> Result<DenseLu> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::Dimension(format!(
                "cannot factor a {}x{} matrix",
                a.n_rows(),
                a.n_cols()
            )));
        }
        Ok(DenseLu { n: a.n_rows(), lu: a.to_na().lu() })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!(
                "right-hand side length {} does not match system size {}",
                b.len(),
                self.n
            )));
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        let x = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("dense system is singular".into()))?;
        let out: Vec<f64> = x.iter().copied().collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("dense solve produced non-finite entries".into()));
        }
        Ok(out)
    }
}

/// One-shot dense solve.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    DenseLu::new(a)?.solve(b)
}
