//! Strong Dirichlet enforcement by row identity + column elimination.
//!
//! Constrained rows become identity rows; the eliminated columns are kept in
//! a separate coupling matrix so any right-hand side can be corrected with
//! one sparse product. Solutions then carry the prescribed trace bitwise —
//! the boundary values never pass through the solver.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::fem::space::{BcSpec, TaylorHoodSpace};
use crate::numerics::sparse::{Coo, Csr};

/// Prescribed values for constrained dofs.
#[derive(Debug, Clone, Default)]
pub struct BoundaryValues {
    values: BTreeMap<usize, f64>,
}

impl BoundaryValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, dof: usize, value: f64) {
        self.values.insert(dof, value);
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.values.get(&dof).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&d, &v)| (d, v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Overwrites the prescribed entries of a coefficient vector in place.
    pub fn apply_trace(&self, u: &mut [f64]) {
        for (&d, &v) in &self.values {
            u[d] = v;
        }
    }
}

/// Evaluates a boundary condition at every constrained velocity node.
pub fn velocity_dirichlet_values(sp: &TaylorHoodSpace, bc: &BcSpec, t: f64) -> BoundaryValues {
    let mut out = BoundaryValues::new();
    for (&node, &tag) in sp.dirichlet_nodes() {
        let (gx, gy) = bc.eval(sp.node_coords()[node], t, tag);
        out.set(2 * node, gx);
        out.set(2 * node + 1, gy);
    }
    out
}

/// A square system with constrained dofs eliminated.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    matrix: Csr,
    coupling: Csr,
    constrained: BTreeSet<usize>,
}

/// Replaces constrained rows by identity rows and moves their columns (at
/// free rows) into the coupling matrix.
pub fn constrain_system(a: &Csr, constrained: &BTreeSet<usize>) -> ConstrainedSystem {
    assert_eq!(a.n_rows(), a.n_cols(), "constrained systems must be square");
    let n = a.n_rows();
    let mut mat = Coo::with_capacity(n, n, a.nnz() + constrained.len());
    let mut coupling = Coo::new(n, n);
    for r in 0..n {
        if constrained.contains(&r) {
            mat.push(r, r, 1.0);
            continue;
        }
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if constrained.contains(&c) {
                coupling.push(r, c, v);
            } else {
                mat.push(r, c, v);
            }
        }
    }
    ConstrainedSystem {
        matrix: mat.to_csr(),
        coupling: coupling.to_csr(),
        constrained: constrained.clone(),
    }
}

impl ConstrainedSystem {
    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn constrained(&self) -> &BTreeSet<usize> {
        &self.constrained
    }

    /// rhs with eliminated columns folded in: free rows get
    /// `rhs − C·g`, constrained rows get the prescribed value itself.
    pub fn apply_rhs(&self, rhs: &[f64], values: &BoundaryValues) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.matrix.n_rows());
        let mut g = vec![0.0; rhs.len()];
        for &d in &self.constrained {
            g[d] = values.get(d).ok_or(Error::MissingBoundaryValue { dof: d })?;
        }
        let elim = self.coupling.matvec(&g);
        let mut out = Vec::with_capacity(rhs.len());
        for r in 0..rhs.len() {
            if self.constrained.contains(&r) {
                out.push(g[r]);
            } else {
                out.push(rhs[r] - elim[r]);
            }
        }
        Ok(out)
    }
}
