//! Reduced-space construction: velocity modes from lifted snapshots, a
//! supremizer block from the pressure snapshots, and pressure modes, with a
//! joint-independence guard on the combined velocity space.

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::fem::assembly::assemble_mass;
use crate::fem::space::{Field, FieldKind, TaylorHoodSpace};
use crate::numerics::dense::{symmetric_eig, DenseMatrix};
use crate::numerics::sparse::Csr;
use crate::rom::pod::{pod, POD_DROP_RELATIVE};
use crate::rom::supremizer::SupremizerSolver;
use crate::strategies::SnapshotSet;

/// POD blocks spanning the reduced spaces. Velocity and pressure modes are
/// L²-orthonormal, supremizer modes orthonormal in the A+M product; the
/// combined velocity block is linearly independent but not orthogonal as a
/// whole. The lift carries the inhomogeneous boundary data, so every mode
/// has (numerically) zero Dirichlet trace.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    velocity: DenseMatrix,
    supremizer: DenseMatrix,
    pressure: DenseMatrix,
    lift: Vec<f64>,
    pub velocity_spectrum: Vec<f64>,
    pub supremizer_spectrum: Vec<f64>,
    pub pressure_spectrum: Vec<f64>,
}

impl ReducedBasis {
    /// Reassembles a basis from stored blocks, revalidating the dimensions
    /// that tie them together.
    pub fn from_parts(
        velocity: DenseMatrix,
        supremizer: DenseMatrix,
        pressure: DenseMatrix,
        lift: Vec<f64>,
        velocity_spectrum: Vec<f64>,
        supremizer_spectrum: Vec<f64>,
        pressure_spectrum: Vec<f64>,
    ) -> Result<ReducedBasis> {
        if velocity.n_rows() != lift.len()
            || (supremizer.n_cols() > 0 && supremizer.n_rows() != lift.len())
        {
            return Err(Error::Dimension(
                "velocity blocks and lift disagree on the number of dofs".into(),
            ));
        }
        if velocity.n_cols() > velocity_spectrum.len()
            || supremizer.n_cols() > supremizer_spectrum.len()
            || pressure.n_cols() > pressure_spectrum.len()
        {
            return Err(Error::Dimension(
                "spectra are shorter than the retained mode counts".into(),
            ));
        }
        Ok(ReducedBasis {
            velocity,
            supremizer,
            pressure,
            lift,
            velocity_spectrum,
            supremizer_spectrum,
            pressure_spectrum,
        })
    }

    pub fn r_u(&self) -> usize {
        self.velocity.n_cols()
    }

    pub fn r_s(&self) -> usize {
        self.supremizer.n_cols()
    }

    pub fn r_p(&self) -> usize {
        self.pressure.n_cols()
    }

    pub fn r_us(&self) -> usize {
        self.r_u() + self.r_s()
    }

    pub fn n_velocity_dofs(&self) -> usize {
        self.lift.len()
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.pressure.n_rows()
    }

    pub fn velocity_modes(&self) -> &DenseMatrix {
        &self.velocity
    }

    pub fn supremizer_modes(&self) -> &DenseMatrix {
        &self.supremizer
    }

    pub fn pressure_modes(&self) -> &DenseMatrix {
        &self.pressure
    }

    pub fn lift(&self) -> &[f64] {
        &self.lift
    }

    /// Column `j` of the combined velocity block: POD modes first, then the
    /// supremizer modes.
    pub fn velocity_mode(&self, j: usize) -> Vec<f64> {
        if j < self.r_u() {
            self.velocity.col(j)
        } else {
            self.supremizer.col(j - self.r_u())
        }
    }

    /// The combined velocity block as one matrix, [velocity | supremizer].
    pub fn combined_velocity(&self) -> DenseMatrix {
        let r_u = self.r_u();
        DenseMatrix::from_fn(self.n_velocity_dofs(), self.r_us(), |i, j| {
            if j < r_u {
                self.velocity.data()[i * r_u + j]
            } else {
                self.supremizer.data()[i * self.r_s() + (j - r_u)]
            }
        })
    }

    /// Lift plus the coefficient combination of the combined velocity block.
    pub fn expand_velocity(&self, a: &[f64], time: f64) -> Result<Field> {
        if a.len() != self.r_us() {
            return Err(Error::Dimension(format!(
                "{} velocity coefficients for a basis of {} modes",
                a.len(),
                self.r_us()
            )));
        }
        let mut coeffs = self.lift.clone();
        for (j, &c) in a.iter().enumerate() {
            let phi = self.velocity_mode(j);
            for (out, v) in coeffs.iter_mut().zip(&phi) {
                *out += c * v;
            }
        }
        Ok(Field::velocity(coeffs, time))
    }

    pub fn expand_pressure(&self, b: &[f64], time: f64) -> Result<Field> {
        if b.len() != self.r_p() {
            return Err(Error::Dimension(format!(
                "{} pressure coefficients for a basis of {} modes",
                b.len(),
                self.r_p()
            )));
        }
        let mut coeffs = vec![0.0; self.n_pressure_dofs()];
        for (q, &c) in b.iter().enumerate() {
            let psi = self.pressure.col(q);
            for (out, v) in coeffs.iter_mut().zip(&psi) {
                *out += c * v;
            }
        }
        Ok(Field::pressure(coeffs, time))
    }
}

/// Expands a reduced coefficient pair to full-order fields.
pub fn expand(basis: &ReducedBasis, a_u: &[f64], a_p: &[f64], time: f64) -> Result<(Field, Field)> {
    Ok((basis.expand_velocity(a_u, time)?, basis.expand_pressure(a_p, time)?))
}

/// Builds the three POD blocks from a snapshot set. `lift` is subtracted
/// from every velocity snapshot before compression and stored for
/// expansion; pass zeros when the data is already homogeneous.
pub fn build_basis(
    sp: &TaylorHoodSpace,
    snaps: &SnapshotSet,
    lift: &[f64],
    r_u: usize,
    r_s: usize,
    r_p: usize,
) -> Result<ReducedBasis> {
    let n_u = sp.n_velocity_dofs();
    let n_p = sp.n_pressure_dofs();
    if snaps.n_velocity_dofs() != n_u || snaps.n_pressure_dofs() != n_p || lift.len() != n_u {
        return Err(Error::Dimension(
            "snapshots, lift, and space disagree on dof counts".into(),
        ));
    }
    let n_snaps = snaps.len();
    if r_u < 1 {
        return Err(Error::Invalid("at least one velocity mode is required".into()));
    }
    if n_snaps < r_u.max(r_s).max(r_p) {
        return Err(Error::Invalid(format!(
            "{n_snaps} snapshots cannot support ranks ({r_u}, {r_s}, {r_p})"
        )));
    }

    let mass_u = assemble_mass(sp, FieldKind::Velocity);
    let mass_p = assemble_mass(sp, FieldKind::Pressure);

    let lifted = DenseMatrix::from_fn(n_u, n_snaps, |i, j| {
        snaps.snapshots()[j].velocity[i] - lift[i]
    });
    let velocity_pod = pod(&lifted, &mass_u, r_u)?;

    let (supremizer, supremizer_spectrum) = if r_s > 0 {
        let solver = SupremizerSolver::new(sp)?;
        let columns: Vec<Result<Vec<f64>>> =
            map_indexed(n_snaps, |j| solver.apply(&snaps.snapshots()[j].pressure));
        let mut sup_snaps = DenseMatrix::zeros(n_u, n_snaps);
        for (j, col) in columns.into_iter().enumerate() {
            sup_snaps.set_col(j, &col?);
        }
        let sup_pod = pod(&sup_snaps, solver.u_product(), r_s)?;
        (sup_pod.modes, sup_pod.eigenvalues)
    } else {
        (DenseMatrix::zeros(n_u, 0), Vec::new())
    };

    let (pressure, pressure_spectrum) = if r_p > 0 {
        let pressures =
            DenseMatrix::from_fn(n_p, n_snaps, |i, j| snaps.snapshots()[j].pressure[i]);
        let p_pod = pod(&pressures, &mass_p, r_p)?;
        (p_pod.modes, p_pod.eigenvalues)
    } else {
        (DenseMatrix::zeros(n_p, 0), Vec::new())
    };

    let basis = ReducedBasis {
        velocity: velocity_pod.modes,
        supremizer,
        pressure,
        lift: lift.to_vec(),
        velocity_spectrum: velocity_pod.eigenvalues,
        supremizer_spectrum,
        pressure_spectrum,
    };
    check_joint_independence(&basis, &mass_u)?;
    Ok(basis)
}

/// The combined velocity block must be safely invertible in the L² product:
/// a supremizer falling inside the velocity span would make every reduced
/// mass matrix singular.
fn check_joint_independence(basis: &ReducedBasis, mass_u: &Csr) -> Result<()> {
    if basis.r_s() == 0 {
        return Ok(());
    }
    let r_us = basis.r_us();
    let weighted = map_indexed(r_us, |j| mass_u.matvec(&basis.velocity_mode(j)));
    let gram = DenseMatrix::from_fn(r_us, r_us, |i, j| {
        crate::numerics::dense::dot(&basis.velocity_mode(i), &weighted[j])
    });
    let (eigenvalues, _) = symmetric_eig(&gram, &DenseMatrix::identity(r_us))?;
    let largest = eigenvalues[0].max(0.0);
    let achievable = eigenvalues
        .iter()
        .filter(|&&l| l > 0.0 && l >= POD_DROP_RELATIVE * largest)
        .count();
    if achievable < r_us {
        return Err(Error::RankDeficient { requested: r_us, achievable });
    }
    Ok(())
}
