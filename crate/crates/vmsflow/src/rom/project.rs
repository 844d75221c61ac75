//! Galerkin projection of the full-order operators onto a reduced basis,
//! plus the dense filter solves the reduced steppers share.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::fem::assembly::{
    apply_convection, assemble_convection_matrix, assemble_divergence, assemble_graddiv,
    assemble_mass, assemble_stiffness,
};
use crate::fem::space::{FieldKind, TaylorHoodSpace};
use crate::numerics::dense::{dot, DenseLu, DenseMatrix};
use crate::numerics::sparse::Csr;
use crate::rom::basis::ReducedBasis;

/// Dense projections of the full-order forms. The convection tensor is kept
/// as one matrix per convecting mode: `convection[j][i, k] = ĉ(φ_j; φ_k, φ_i)`,
/// each antisymmetric in (i, k) because the underlying form is skew.
pub struct ReducedOperators {
    pub mass: DenseMatrix,
    pub stiffness: DenseMatrix,
    pub graddiv: DenseMatrix,
    /// r_p × r_us, entry (q, j) = b(φ_j, ψ_q).
    pub divergence: DenseMatrix,
    pub convection: Vec<DenseMatrix>,
    /// ĉ(u_L; φ_k, φ_i): the lift convecting the modes.
    pub lift_convection_by: DenseMatrix,
    /// ĉ(φ_j; u_L, φ_i): the modes convecting the lift.
    pub lift_convection_of: DenseMatrix,
    /// ĉ(u_L; u_L, φ_i).
    pub lift_convection_fixed: Vec<f64>,
    /// a(u_L, φ_i), multiplied by ν inside the steppers.
    pub lift_stiffness: Vec<f64>,
    /// b(u_L, ψ_q): the continuity offset of the lift.
    pub lift_divergence: Vec<f64>,
    pub gamma_d: f64,
    pub r_u: usize,
    pub r_s: usize,
    pub r_p: usize,
    filters: BTreeMap<u64, DenseLu>,
    mass_lu: DenseLu,
}

impl ReducedOperators {
    pub fn r_us(&self) -> usize {
        self.r_u + self.r_s
    }

    /// Reduced differential filter: solves (δ²Â + M̂ + γ_D·Ĝ)·ā = M̂·a with
    /// the factorization prepared for this radius. δ = 0 with γ_D = 0 is the
    /// exact identity and returns the input unchanged.
    pub fn filter_solve(&self, delta: f64, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.r_us() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a reduced space of {} modes",
                a.len(),
                self.r_us()
            )));
        }
        if delta == 0.0 && self.gamma_d == 0.0 {
            return Ok(a.to_vec());
        }
        let lu = self.filters.get(&delta.to_bits()).ok_or_else(|| {
            Error::Invalid(format!("no reduced filter was prepared for radius {delta}"))
        })?;
        lu.solve(&self.mass.matvec(a))
    }

    /// The radii whose filter factorizations are available.
    pub fn filter_radii(&self) -> Vec<f64> {
        self.filters.keys().map(|&bits| f64::from_bits(bits)).collect()
    }

    /// Exact Galerkin reduction in the L² product: coefficients of the
    /// M-orthogonal projection of `u - lift` onto the combined block.
    pub fn reduce_velocity(
        &self,
        basis: &ReducedBasis,
        mass_u: &Csr,
        u: &[f64],
    ) -> Result<Vec<f64>> {
        if u.len() != basis.n_velocity_dofs() {
            return Err(Error::Dimension(format!(
                "velocity has {} dofs, basis expects {}",
                u.len(),
                basis.n_velocity_dofs()
            )));
        }
        let lifted: Vec<f64> = u.iter().zip(basis.lift()).map(|(a, b)| a - b).collect();
        let weighted = mass_u.matvec(&lifted);
        let rhs: Vec<f64> =
            (0..self.r_us()).map(|j| dot(&basis.velocity_mode(j), &weighted)).collect();
        self.mass_lu.solve(&rhs)
    }
}

/// Projects `csr · dense` column by column.
fn sparse_times_dense(csr: &Csr, dense: &DenseMatrix) -> DenseMatrix {
    let cols = map_indexed(dense.n_cols(), |j| csr.matvec(&dense.col(j)));
    let mut out = DenseMatrix::zeros(csr.n_rows(), dense.n_cols());
    for (j, col) in cols.iter().enumerate() {
        out.set_col(j, col);
    }
    out
}

/// leftᵀ · (csr · right) without materializing the sparse product.
fn project(csr: &Csr, left: &DenseMatrix, right: &DenseMatrix) -> DenseMatrix {
    left.transpose().matmul(&sparse_times_dense(csr, right))
}

fn project_vector(left: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    (0..left.n_cols()).map(|j| dot(&left.col(j), v)).collect()
}

/// Builds every reduced operator plus one filter factorization per entry of
/// `deltas` (all sharing `gamma_d`).
pub fn project_operators(
    sp: &TaylorHoodSpace,
    basis: &ReducedBasis,
    deltas: &[f64],
    gamma_d: f64,
) -> Result<ReducedOperators> {
    if basis.n_velocity_dofs() != sp.n_velocity_dofs()
        || basis.n_pressure_dofs() != sp.n_pressure_dofs()
    {
        return Err(Error::Dimension("basis does not match the space".into()));
    }
    if !(gamma_d >= 0.0) || !gamma_d.is_finite() {
        return Err(Error::Config("grad-div penalty must be finite and nonnegative".into()));
    }
    for &d in deltas {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::Config("filter radii must be finite and nonnegative".into()));
        }
    }

    let phi = basis.combined_velocity();
    let psi = basis.pressure_modes();
    let lift = basis.lift();
    let r_us = basis.r_us();

    let mass_fom = assemble_mass(sp, FieldKind::Velocity);
    let stiffness_fom = assemble_stiffness(sp, FieldKind::Velocity);
    let graddiv_fom = assemble_graddiv(sp, 1.0);
    let divergence_fom = assemble_divergence(sp);

    let mass = project(&mass_fom, &phi, &phi);
    let stiffness = project(&stiffness_fom, &phi, &phi);
    let graddiv = project(&graddiv_fom, &phi, &phi);
    let divergence = project(&divergence_fom, psi, &phi);

    // One sparse convection assembly per convecting mode; the same pass
    // collects the mode-convects-lift columns.
    let per_mode: Vec<(DenseMatrix, Vec<f64>)> = map_indexed(r_us, |j| {
        let mode = basis.velocity_mode(j);
        let tensor_slice = project(&assemble_convection_matrix(sp, &mode), &phi, &phi);
        let convects_lift = project_vector(&phi, &apply_convection(sp, &mode, lift));
        (tensor_slice, convects_lift)
    });
    let mut convection = Vec::with_capacity(r_us);
    let mut lift_convection_of = DenseMatrix::zeros(r_us, r_us);
    for (j, (tensor_slice, convects_lift)) in per_mode.into_iter().enumerate() {
        convection.push(tensor_slice);
        lift_convection_of.set_col(j, &convects_lift);
    }

    let lift_convection_by = project(&assemble_convection_matrix(sp, lift), &phi, &phi);
    let lift_convection_fixed = project_vector(&phi, &apply_convection(sp, lift, lift));
    let lift_stiffness = project_vector(&phi, &stiffness_fom.matvec(lift));
    let lift_divergence = project_vector(psi, &divergence_fom.matvec(lift));

    let mut filters = BTreeMap::new();
    for &delta in deltas {
        if let std::collections::btree_map::Entry::Vacant(slot) = filters.entry(delta.to_bits()) {
            slot.insert(DenseLu::new(
                &mass.add(&stiffness.scale(delta * delta)).add(&graddiv.scale(gamma_d)),
            )?);
        }
    }
    let mass_lu = DenseLu::new(&mass)?;

    Ok(ReducedOperators {
        mass,
        stiffness,
        graddiv,
        divergence,
        convection,
        lift_convection_by,
        lift_convection_of,
        lift_convection_fixed,
        lift_stiffness,
        lift_divergence,
        gamma_d,
        r_u: basis.r_u(),
        r_s: basis.r_s(),
        r_p: basis.r_p(),
        filters,
        mass_lu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::EvolveConfig;
    use crate::fem::assembly::skew_convection_form;
    use crate::mesh::build_rectangle_mesh;
    use crate::rom::basis::build_basis;
    use crate::strategies::{Provenance, SnapshotSet, Strategy, StrategyConfig};
    use crate::testutil::{rng, unit};

    fn square_space(n: usize) -> TaylorHoodSpace {
        let mesh = build_rectangle_mesh(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap();
        TaylorHoodSpace::new(mesh)
    }

    fn random_snapshots(sp: &TaylorHoodSpace, count: usize, seed: u64) -> SnapshotSet {
        let cfg = StrategyConfig::new(
            Strategy::Unfiltered,
            EvolveConfig::new(1.0, 0.1),
            count as f64 * 0.1,
        );
        let provenance = Provenance { config: cfg, mesh_hash: sp.mesh().content_hash() };
        let mut set = SnapshotSet::new(provenance, sp.n_velocity_dofs(), sp.n_pressure_dofs());
        let mut r = rng(seed);
        for k in 0..count {
            let u: Vec<f64> = (0..sp.n_velocity_dofs()).map(|_| unit(&mut r)).collect();
            let p: Vec<f64> = (0..sp.n_pressure_dofs()).map(|_| unit(&mut r)).collect();
            set.push(k as f64 * 0.1, u, p).unwrap();
        }
        set
    }

    fn small_setup(seed: u64, lift_seed: Option<u64>) -> (TaylorHoodSpace, ReducedBasis) {
        let sp = square_space(3);
        let snaps = random_snapshots(&sp, 6, seed);
        let lift = match lift_seed {
            Some(s) => {
                let mut r = rng(s);
                (0..sp.n_velocity_dofs()).map(|_| 0.1 * unit(&mut r)).collect()
            }
            None => vec![0.0; sp.n_velocity_dofs()],
        };
        let basis = build_basis(&sp, &snaps, &lift, 3, 2, 2).unwrap();
        (sp, basis)
    }

    #[test]
    fn single_mode_operators_reduce_to_rayleigh_quotients() {
        let sp = square_space(3);
        let snaps = random_snapshots(&sp, 4, 31);
        let lift = vec![0.0; sp.n_velocity_dofs()];
        let basis = build_basis(&sp, &snaps, &lift, 1, 0, 1).unwrap();
        let delta = 0.07;
        let gamma = 0.4;
        let ops = project_operators(&sp, &basis, &[delta], gamma).unwrap();

        let phi = basis.velocity_mode(0);
        let m = assemble_mass(&sp, FieldKind::Velocity).quadratic_form(&phi, &phi);
        let k = assemble_stiffness(&sp, FieldKind::Velocity).quadratic_form(&phi, &phi);
        let g = assemble_graddiv(&sp, 1.0).quadratic_form(&phi, &phi);
        assert!((ops.mass.data()[0] - 1.0).abs() <= 1e-10, "mode is M-normalized");
        assert!((ops.mass.data()[0] - m).abs() <= 1e-12);
        assert!((ops.stiffness.data()[0] - k).abs() <= 1e-10 * k);
        assert!((ops.graddiv.data()[0] - g).abs() <= 1e-10 * g.max(1.0));

        // The scalar filter is m/(δ²k + m + γg), straight from the three
        // quadratures above.
        let filtered = ops.filter_solve(delta, &[2.5]).unwrap();
        let want = 2.5 * m / (delta * delta * k + m + gamma * g);
        assert!((filtered[0] - want).abs() <= 1e-10 * want.abs(), "{} vs {want}", filtered[0]);
        assert!(filtered[0].abs() < 2.5, "filtering attenuates");

        // Radii that were never prepared are rejected rather than guessed.
        assert!(ops.filter_solve(0.5, &[1.0]).is_err());
        assert_eq!(ops.filter_radii(), vec![delta]);
    }

    #[test]
    fn tensor_matches_the_form_and_is_antisymmetric() {
        let (sp, basis) = small_setup(37, Some(38));
        let ops = project_operators(&sp, &basis, &[], 0.0).unwrap();
        let r_us = basis.r_us();

        for j in 0..r_us {
            let t = &ops.convection[j];
            let phi_j = basis.velocity_mode(j);
            for i in 0..r_us {
                for k in 0..r_us {
                    let direct = skew_convection_form(
                        &sp,
                        &phi_j,
                        &basis.velocity_mode(k),
                        &basis.velocity_mode(i),
                    );
                    let got = t.data()[i * r_us + k];
                    assert!(
                        (got - direct).abs() <= 1e-10,
                        "tensor[{j}][{i},{k}] = {got} vs {direct}"
                    );
                    let mirror = t.data()[k * r_us + i];
                    assert!((got + mirror).abs() <= 1e-12, "skew symmetry in the last slots");
                }
            }
        }

        // Energy neutrality: the triple contraction with one coefficient
        // vector vanishes because each slice is antisymmetric.
        let mut r = rng(43);
        let a: Vec<f64> = (0..r_us).map(|_| unit(&mut r)).collect();
        let mut contracted = 0.0;
        for j in 0..r_us {
            contracted += a[j] * dot(&a, &ops.convection[j].matvec(&a));
        }
        assert!(contracted.abs() <= 1e-12);

        // Lift terms agree with the same direct quadratures.
        let lift = basis.lift();
        for i in 0..r_us {
            let phi_i = basis.velocity_mode(i);
            let fixed = skew_convection_form(&sp, lift, lift, &phi_i);
            assert!((ops.lift_convection_fixed[i] - fixed).abs() <= 1e-10);
            for k in 0..r_us {
                let by = skew_convection_form(&sp, lift, &basis.velocity_mode(k), &phi_i);
                assert!((ops.lift_convection_by.data()[i * r_us + k] - by).abs() <= 1e-10);
                let of = skew_convection_form(&sp, &basis.velocity_mode(k), lift, &phi_i);
                assert!((ops.lift_convection_of.data()[i * r_us + k] - of).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn reduced_deconvolution_matches_dense_matrix_algebra() {
        let (sp, basis) = small_setup(53, None);
        let delta = 0.05;
        let gamma = 0.25;
        let ops = project_operators(&sp, &basis, &[delta], gamma).unwrap();
        let r_us = basis.r_us();

        // Dense oracle: materialize F = (δ²Â + M̂ + γĜ)⁻¹M̂ column by column
        // and apply 2F − F² explicitly.
        let system = ops
            .mass
            .add(&ops.stiffness.scale(delta * delta))
            .add(&ops.graddiv.scale(gamma));
        let lu = DenseLu::new(&system).unwrap();
        let mut f = DenseMatrix::zeros(r_us, r_us);
        for j in 0..r_us {
            let mut e = vec![0.0; r_us];
            e[j] = 1.0;
            f.set_col(j, &lu.solve(&ops.mass.matvec(&e)).unwrap());
        }

        let mut r = rng(59);
        let a: Vec<f64> = (0..r_us).map(|_| unit(&mut r)).collect();
        let once = ops.filter_solve(delta, &a).unwrap();
        let twice = ops.filter_solve(delta, &once).unwrap();
        let deconvolved: Vec<f64> =
            once.iter().zip(&twice).map(|(x, y)| 2.0 * x - y).collect();

        let fa = f.matvec(&a);
        let ffa = f.matvec(&fa);
        for i in 0..r_us {
            let want = 2.0 * fa[i] - ffa[i];
            assert!(
                (deconvolved[i] - want).abs() <= 1e-12,
                "coefficient {i}: {} vs {want}",
                deconvolved[i]
            );
        }
    }

    #[test]
    fn reduction_inverts_expansion_on_the_reduced_span() {
        let (sp, basis) = small_setup(61, Some(62));
        let ops = project_operators(&sp, &basis, &[], 0.0).unwrap();
        let mass_u = assemble_mass(&sp, FieldKind::Velocity);
        let r_us = basis.r_us();

        let mut r = rng(67);
        let a: Vec<f64> = (0..r_us).map(|_| unit(&mut r)).collect();
        let field = basis.expand_velocity(&a, 0.0).unwrap();
        let back = ops.reduce_velocity(&basis, &mass_u, &field.coeffs).unwrap();
        for i in 0..r_us {
            assert!((back[i] - a[i]).abs() <= 1e-10, "coefficient {i}: {} vs {}", back[i], a[i]);
        }

        // For a field outside the span, the reduction residual is
        // M-orthogonal to every mode: that is what Galerkin projection means.
        let u: Vec<f64> = (0..sp.n_velocity_dofs()).map(|_| unit(&mut r)).collect();
        let coeffs = ops.reduce_velocity(&basis, &mass_u, &u).unwrap();
        let projected = basis.expand_velocity(&coeffs, 0.0).unwrap();
        let defect: Vec<f64> =
            u.iter().zip(&projected.coeffs).map(|(x, y)| x - y).collect();
        let weighted = mass_u.matvec(&defect);
        for j in 0..r_us {
            let leak = dot(&basis.velocity_mode(j), &weighted);
            assert!(leak.abs() <= 1e-10, "mode {j} still sees {leak}");
        }

        // Divergence lift column agrees with a direct product.
        let psi = basis.pressure_modes();
        let b = assemble_divergence(&sp);
        let bl = b.matvec(basis.lift());
        for q in 0..basis.r_p() {
            let want = dot(&psi.col(q), &bl);
            assert!((ops.lift_divergence[q] - want).abs() <= 1e-12);
        }
    }
}
