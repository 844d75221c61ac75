//! Proper orthogonal decomposition by the method of snapshots.
//!
//! The correlation matrix C_ij = (s_i, s_j)_W is diagonalized and each
//! retained mode is the combination S·y_k/√λ_k, which makes the block
//! W-orthonormal by construction. No 1/N scaling is applied, so two
//! W-orthogonal snapshots come back with eigenvalues equal to their squared
//! W-norms.

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::numerics::dense::{dot, symmetric_eig, DenseMatrix};
use crate::numerics::sparse::Csr;

/// Eigenvalues this far below the largest one are treated as numerical rank
/// deficiency rather than retained energy.
pub const POD_DROP_RELATIVE: f64 = 1e-12;

/// Gramian-orthonormal modes together with the full correlation spectrum.
#[derive(Debug, Clone)]
pub struct PodModes {
    /// One column per retained mode, orthonormal in the requested product.
    pub modes: DenseMatrix,
    /// All correlation eigenvalues, descending; the retained modes own the
    /// first `modes.n_cols()` of them.
    pub eigenvalues: Vec<f64>,
}

impl PodModes {
    pub fn rank(&self) -> usize {
        self.modes.n_cols()
    }

    /// Fraction of the total spectrum carried by the first `r` eigenvalues.
    pub fn energy_fraction(&self, r: usize) -> f64 {
        let total: f64 = self.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
        if total == 0.0 {
            return 0.0;
        }
        let kept: f64 = self.eigenvalues.iter().take(r).map(|&l| l.max(0.0)).sum();
        kept / total
    }
}

/// Compresses the columns of `snapshots` to `r` modes, orthonormal in the
/// inner product induced by `gramian`.
pub fn pod(snapshots: &DenseMatrix, gramian: &Csr, r: usize) -> Result<PodModes> {
    let n = snapshots.n_rows();
    let n_snaps = snapshots.n_cols();
    if gramian.n_rows() != n || gramian.n_cols() != n {
        return Err(Error::Dimension(format!(
            "gramian is {}x{} but snapshots have {} rows",
            gramian.n_rows(),
            gramian.n_cols(),
            n
        )));
    }
    if r < 1 || r > n_snaps {
        return Err(Error::Invalid(format!(
            "cannot retain {r} modes from {n_snaps} snapshots"
        )));
    }

    let cols: Vec<Vec<f64>> = (0..n_snaps).map(|j| snapshots.col(j)).collect();
    // W·s_j once per snapshot; correlation entries are then plain dots,
    // computed in parallel over the upper triangle and mirrored.
    let weighted = map_indexed(n_snaps, |j| gramian.matvec(&cols[j]));
    let upper = map_indexed(n_snaps * n_snaps, |idx| {
        let (i, j) = (idx / n_snaps, idx % n_snaps);
        if i <= j {
            dot(&cols[i], &weighted[j])
        } else {
            0.0
        }
    });
    let corr = DenseMatrix::from_fn(n_snaps, n_snaps, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        upper[a * n_snaps + b]
    });

    let (eigenvalues, vectors) = symmetric_eig(&corr, &DenseMatrix::identity(n_snaps))?;
    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let achievable = eigenvalues
        .iter()
        .filter(|&&l| l > 0.0 && l >= POD_DROP_RELATIVE * lambda_max)
        .count();
    if achievable < r {
        return Err(Error::RankDeficient { requested: r, achievable });
    }

    let columns = map_indexed(r, |k| {
        let y = vectors.col(k);
        // Canonical sign: the dominant combination weight is positive, so
        // repeated builds and oracle comparisons agree without sign fixes.
        let mut dom = 0usize;
        for (i, v) in y.iter().enumerate() {
            if v.abs() > y[dom].abs() {
                dom = i;
            }
        }
        let scale = if y[dom] < 0.0 { -1.0 } else { 1.0 } / eigenvalues[k].sqrt();
        let mut col = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            let s = scale * yj;
            for (out, v) in col.iter_mut().zip(&cols[j]) {
                *out += s * v;
            }
        }
        col
    });
    let mut modes = DenseMatrix::zeros(n, r);
    for (k, col) in columns.iter().enumerate() {
        modes.set_col(k, col);
    }
    Ok(PodModes { modes, eigenvalues })
}
