//! Pressure supremizers: velocity representatives of the discrete inf-sup
//! pairing, used to enrich the reduced velocity space so the projected
//! saddle system stays solvable.

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_divergence, assemble_mass, assemble_stiffness};
use crate::fem::dirichlet::{constrain_system, BoundaryValues, ConstrainedSystem};
use crate::fem::space::{FieldKind, TaylorHoodSpace};
use crate::numerics::lu::{sparse_lu_factor, LuFactorization};
use crate::numerics::sparse::Csr;

/// Solves (s, τ)_{A+M} = (p, ∇·τ) for all admissible τ with homogeneous
/// Dirichlet data on s; the factorization is shared across pressures.
pub struct SupremizerSolver {
    n_velocity: usize,
    n_pressure: usize,
    divergence_t: Csr,
    u_product: Csr,
    sys: ConstrainedSystem,
    lu: LuFactorization,
    homogeneous: BoundaryValues,
}

impl SupremizerSolver {
    pub fn new(sp: &TaylorHoodSpace) -> Result<SupremizerSolver> {
        let mass = assemble_mass(sp, FieldKind::Velocity);
        let stiffness = assemble_stiffness(sp, FieldKind::Velocity);
        let u_product = Csr::linear_combination(&[(1.0, &stiffness), (1.0, &mass)]);
        let divergence_t = assemble_divergence(sp).transpose();
        let sys = constrain_system(&u_product, &sp.dirichlet_velocity_dofs());
        let lu = sparse_lu_factor(sys.matrix())?;
        let mut homogeneous = BoundaryValues::new();
        for &d in sys.constrained() {
            homogeneous.set(d, 0.0);
        }
        Ok(SupremizerSolver {
            n_velocity: sp.n_velocity_dofs(),
            n_pressure: sp.n_pressure_dofs(),
            divergence_t,
            u_product,
            sys,
            lu,
            homogeneous,
        })
    }

    /// The unconstrained H¹-type product matrix A + M, also the Gramian the
    /// supremizer modes are orthonormalized in.
    pub fn u_product(&self) -> &Csr {
        &self.u_product
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.n_pressure {
            return Err(Error::Dimension(format!(
                "pressure has {} coefficients, expected {}",
                p.len(),
                self.n_pressure
            )));
        }
        let rhs = self.sys.apply_rhs(&self.divergence_t.matvec(p), &self.homogeneous)?;
        let s = self.lu.solve(&rhs)?;
        debug_assert_eq!(s.len(), self.n_velocity);
        Ok(s)
    }
}
