//! One implicit-Euler step of the incompressible momentum/continuity system,
//! solved by a full Newton iteration on the coupled velocity–pressure
//! unknowns. This is the "evolve" half that every regularization strategy
//! shares; the optional projected eddy-viscosity term makes it the
//! eddy-viscosity variant.
//!
//! Unknown layout: velocity dofs first (`0..n_u`), pressure dofs after
//! (`n_u..n_u+n_p`). Dirichlet velocity values (and the optional pressure
//! pin on enclosed domains) are enforced strongly, so traces are bitwise
//! exact and Newton iterates on homogeneous increments.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::fem::assembly::{
    apply_convection, assemble_convection_jacobian, assemble_divergence, assemble_mass,
    assemble_smagorinsky, assemble_smagorinsky_jacobian, assemble_stiffness, eddy_viscosity,
    small_scale_interpolation,
};
use crate::fem::dirichlet::{
    constrain_system, velocity_dirichlet_values, BoundaryValues, ConstrainedSystem,
};
use crate::fem::space::{BcSpec, FieldKind, TaylorHoodSpace};
use crate::numerics::lu::sparse_lu_factor;
use crate::numerics::sparse::{Coo, Csr};

/// Parameters of a single evolve step.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveConfig {
    pub nu: f64,
    pub dt: f64,
    /// Absolute l² tolerance on the combined free residual.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Smagorinsky constant; `Some` switches the projected eddy-viscosity
    /// term on.
    pub c_s: Option<f64>,
}

impl EvolveConfig {
    pub fn new(nu: f64, dt: f64) -> EvolveConfig {
        EvolveConfig { nu, dt, newton_tol: 1e-9, newton_max_iter: 25, c_s: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::Config(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::Config("newton_tol must be positive".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::Config("newton_max_iter must be at least 1".into()));
        }
        if let Some(c_s) = self.c_s {
            if !(c_s > 0.0) || !c_s.is_finite() {
                return Err(Error::Config(format!(
                    "smagorinsky constant must be positive, got {c_s}"
                )));
            }
        }
        Ok(())
    }
}

/// Precomputed operators and constraint data for a fixed space, boundary
/// condition, and parameter set.
pub struct FlowSystem<'a> {
    sp: &'a TaylorHoodSpace,
    bc: BcSpec,
    cfg: EvolveConfig,
    pressure_pin: Option<usize>,
    mass: Csr,
    stiffness: Csr,
    divergence: Csr,
    div_t: Csr,
    projector: Option<Csr>,
    constrained: BTreeSet<usize>,
}

impl<'a> FlowSystem<'a> {
    pub fn new(
        sp: &'a TaylorHoodSpace,
        bc: BcSpec,
        cfg: EvolveConfig,
        pressure_pin: Option<usize>,
    ) -> Result<FlowSystem<'a>> {
        cfg.validate()?;
        if let Some(pin) = pressure_pin {
            if pin >= sp.n_pressure_dofs() {
                return Err(Error::Config(format!(
                    "pressure pin {pin} out of range ({} pressure dofs)",
                    sp.n_pressure_dofs()
                )));
            }
        }
        let divergence = assemble_divergence(sp);
        let div_t = divergence.transpose();
        let mut constrained: BTreeSet<usize> = sp.dirichlet_velocity_dofs();
        if let Some(pin) = pressure_pin {
            constrained.insert(sp.n_velocity_dofs() + pin);
        }
        let projector = cfg.c_s.map(|_| small_scale_interpolation(sp));
        Ok(FlowSystem {
            sp,
            bc,
            cfg,
            pressure_pin,
            mass: assemble_mass(sp, FieldKind::Velocity),
            stiffness: assemble_stiffness(sp, FieldKind::Velocity),
            divergence,
            div_t,
            projector,
            constrained,
        })
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        self.sp
    }

    pub fn config(&self) -> &EvolveConfig {
        &self.cfg
    }

    pub fn mass(&self) -> &Csr {
        &self.mass
    }

    pub fn stiffness(&self) -> &Csr {
        &self.stiffness
    }

    pub fn divergence(&self) -> &Csr {
        &self.divergence
    }

    pub fn constrained(&self) -> &BTreeSet<usize> {
        &self.constrained
    }

    pub fn boundary_values(&self, t: f64) -> BoundaryValues {
        let mut values = self.velocity_trace(t);
        if let Some(pin) = self.pressure_pin {
            values.set(self.sp.n_velocity_dofs() + pin, 0.0);
        }
        values
    }

    /// Velocity Dirichlet data alone, indexed into the velocity block; safe
    /// to stamp onto a bare velocity vector.
    pub fn velocity_trace(&self, t: f64) -> BoundaryValues {
        velocity_dirichlet_values(self.sp, &self.bc, t)
    }

    fn n_coupled(&self) -> usize {
        self.sp.n_velocity_dofs() + self.sp.n_pressure_dofs()
    }

    /// Combined residual with constrained rows forced to zero; valid for
    /// iterates whose trace already matches the boundary data.
    pub fn residual(&self, w: &[f64], p: &[f64], u_prev: &[f64]) -> Vec<f64> {
        let n_u = self.sp.n_velocity_dofs();
        assert_eq!(w.len(), n_u);
        assert_eq!(u_prev.len(), n_u);
        assert_eq!(p.len(), self.sp.n_pressure_dofs());

        let conv = apply_convection(self.sp, w, w);
        let a_w = self.stiffness.matvec(w);
        let m_dw = {
            let dw: Vec<f64> = w.iter().zip(u_prev).map(|(a, b)| a - b).collect();
            self.mass.matvec(&dw)
        };
        let bt_p = self.div_t.matvec(p);
        let smag = self.projector.as_ref().map(|proj| {
            let c_s = self.cfg.c_s.expect("projector implies c_s");
            let s = proj.matvec(w);
            let nu_t = eddy_viscosity(self.sp, &s, c_s);
            assemble_smagorinsky(self.sp, &nu_t, proj).matvec(w)
        });
        let b_w = self.divergence.matvec(w);

        let mut out = vec![0.0; self.n_coupled()];
        for i in 0..n_u {
            let mut r = m_dw[i] / self.cfg.dt + self.cfg.nu * a_w[i] + conv[i] - bt_p[i];
            if let Some(s) = &smag {
                r += s[i];
            }
            out[i] = r;
        }
        for q in 0..self.sp.n_pressure_dofs() {
            out[n_u + q] = -b_w[q];
        }
        for &d in &self.constrained {
            out[d] = 0.0;
        }
        out
    }

    /// Coupled Newton matrix before boundary elimination:
    /// `[[M/Δt + νA + dC(w) (+ dS(w)), −Bᵀ], [−B, 0]]`.
    pub fn jacobian(&self, w: &[f64]) -> Csr {
        let n_u = self.sp.n_velocity_dofs();
        let n_p = self.sp.n_pressure_dofs();
        let conv_jac = assemble_convection_jacobian(self.sp, w);
        let mut terms: Vec<(f64, &Csr)> = vec![
            (1.0 / self.cfg.dt, &self.mass),
            (self.cfg.nu, &self.stiffness),
            (1.0, &conv_jac),
        ];
        let smag_jac = self.projector.as_ref().map(|proj| {
            let c_s = self.cfg.c_s.expect("projector implies c_s");
            assemble_smagorinsky_jacobian(self.sp, w, c_s, proj)
        });
        if let Some(s) = &smag_jac {
            terms.push((1.0, s));
        }
        let k = Csr::linear_combination(&terms);

        let n = n_u + n_p;
        let mut coo = Coo::with_capacity(n, n, k.nnz() + 2 * self.divergence.nnz());
        for (r, c, v) in k.iter() {
            coo.push(r, c, v);
        }
        for (r, c, v) in self.div_t.iter() {
            coo.push(r, n_u + c, -v);
        }
        for (r, c, v) in self.divergence.iter() {
            coo.push(n_u + r, c, -v);
        }
        coo.to_csr()
    }

    /// Residual and eliminated Jacobian at one state, as used inside the
    /// Newton loop.
    pub fn newton_residual_and_jacobian(
        &self,
        w: &[f64],
        p: &[f64],
        u_prev: &[f64],
    ) -> (Vec<f64>, ConstrainedSystem) {
        let r = self.residual(w, p, u_prev);
        let sys = constrain_system(&self.jacobian(w), &self.constrained);
        (r, sys)
    }

    /// Advances one implicit Euler step to time `t_next`, returning the new
    /// velocity, pressure, and the number of Newton updates performed.
    pub fn evolve_step(
        &self,
        u_prev: &[f64],
        p_guess: &[f64],
        t_next: f64,
    ) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let mut history = Vec::new();
        self.evolve_step_logged(u_prev, p_guess, t_next, &mut history)
    }

    /// Like [`evolve_step`](Self::evolve_step) but records the residual norm
    /// seen at the start of every Newton update.
    pub fn evolve_step_logged(
        &self,
        u_prev: &[f64],
        p_guess: &[f64],
        t_next: f64,
        residual_history: &mut Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let n_u = self.sp.n_velocity_dofs();
        let values = self.boundary_values(t_next);
        let mut w = u_prev.to_vec();
        let mut p = p_guess.to_vec();
        // Strong trace at the new time level before the first residual.
        for (dof, g) in values.iter() {
            if dof < n_u {
                w[dof] = g;
            } else {
                p[dof - n_u] = g;
            }
        }

        let homogeneous = {
            let mut z = BoundaryValues::new();
            for &d in &self.constrained {
                z.set(d, 0.0);
            }
            z
        };

        let mut iters = 0usize;
        loop {
            let r = self.residual(&w, &p, u_prev);
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            // At least one update so a converged start still verifies
            // itself against the full linearization.
            if norm <= self.cfg.newton_tol && iters >= 1 {
                return Ok((w, p, iters));
            }
            if iters >= self.cfg.newton_max_iter || !norm.is_finite() {
                return Err(Error::NewtonDiverged { iters, residual: norm });
            }
            residual_history.push(norm);
            let sys = constrain_system(&self.jacobian(&w), &self.constrained);
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let rhs = sys.apply_rhs(&rhs, &homogeneous)?;
            let delta = sparse_lu_factor(sys.matrix())?.solve(&rhs)?;
            for i in 0..n_u {
                w[i] += delta[i];
            }
            for q in 0..self.sp.n_pressure_dofs() {
                p[q] += delta[n_u + q];
            }
            iters += 1;
        }
    }

    /// Steady Stokes solution with the system's boundary data at time `t`:
    /// the lift field for reduced bases, and an initial state for runs that
    /// start from rest-plus-boundary-data.
    pub fn steady_stokes(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n_u = self.sp.n_velocity_dofs();
        let n_p = self.sp.n_pressure_dofs();
        let n = n_u + n_p;
        let mut coo = Coo::with_capacity(n, n, self.stiffness.nnz() + 2 * self.divergence.nnz());
        for (r, c, v) in self.stiffness.iter() {
            coo.push(r, c, self.cfg.nu * v);
        }
        for (r, c, v) in self.div_t.iter() {
            coo.push(r, n_u + c, -v);
        }
        for (r, c, v) in self.divergence.iter() {
            coo.push(n_u + r, c, -v);
        }
        let sys = constrain_system(&coo.to_csr(), &self.constrained);
        let rhs = sys.apply_rhs(&vec![0.0; n], &self.boundary_values(t))?;
        let z = sparse_lu_factor(sys.matrix())?.solve(&rhs)?;
        Ok((z[..n_u].to_vec(), z[n_u..].to_vec()))
    }
}
