//! Scale separation and smoothing: the elliptic differential filter, its
//! eddy-viscosity-coefficient variant, the coarse-space projection
//! postprocess, first-order deconvolution, and small-scale extraction.
//!
//! All filters act on velocity coefficients only. Factorizations for fixed
//! `(δ, γ_D)` are cached — the eliminated system matrix is independent of
//! the boundary mode, which only changes the right-hand side.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::fem::assembly::{
    assemble_eddy_diffusion, assemble_graddiv, assemble_mass, assemble_stiffness, eddy_viscosity,
};
use crate::fem::dirichlet::{constrain_system, BoundaryValues, ConstrainedSystem};
use crate::fem::space::{FieldKind, TaylorHoodSpace};
use crate::numerics::lu::{sparse_lu_factor, LuFactorization};
use crate::numerics::sparse::{Coo, Csr};

/// Boundary handling of a filter solve: keep the Dirichlet trace of the
/// input field, or clamp it to zero. Outflow stays natural either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterBc {
    MatchDirichlet,
    Homogeneous,
}

struct CachedFilter {
    sys: ConstrainedSystem,
    lu: LuFactorization,
}

/// Filter operators over one velocity space, with factorization reuse
/// across time steps. Lookups share the cache; inserts are exclusive.
pub struct FilterContext<'a> {
    sp: &'a TaylorHoodSpace,
    mass: Csr,
    stiffness: Csr,
    graddiv_unit: Csr,
    cache: RwLock<HashMap<(u64, u64), Arc<CachedFilter>>>,
}

impl<'a> FilterContext<'a> {
    pub fn new(sp: &'a TaylorHoodSpace) -> FilterContext<'a> {
        FilterContext {
            sp,
            mass: assemble_mass(sp, FieldKind::Velocity),
            stiffness: assemble_stiffness(sp, FieldKind::Velocity),
            graddiv_unit: assemble_graddiv(sp, 1.0),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        self.sp
    }

    pub fn mass(&self) -> &Csr {
        &self.mass
    }

    /// ‖∇·u‖_{L²} through the unit grad-div form.
    pub fn divergence_norm(&self, u: &[f64]) -> f64 {
        self.graddiv_unit.quadratic_form(u, u).max(0.0).sqrt()
    }

    fn cached(&self, delta: f64, gamma_d: f64) -> Result<Arc<CachedFilter>> {
        let key = (delta.to_bits(), gamma_d.to_bits());
        if let Some(hit) = self.cache.read().expect("filter cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let matrix = Csr::linear_combination(&[
            (delta * delta, &self.stiffness),
            (1.0, &self.mass),
            (gamma_d, &self.graddiv_unit),
        ]);
        let sys = constrain_system(&matrix, &self.sp.dirichlet_velocity_dofs());
        let lu = sparse_lu_factor(sys.matrix())?;
        let entry = Arc::new(CachedFilter { sys, lu });
        let mut guard = self.cache.write().expect("filter cache poisoned");
        Ok(guard.entry(key).or_insert(entry).clone())
    }

    fn trace_values(&self, w: &[f64], bc: FilterBc) -> BoundaryValues {
        let mut values = BoundaryValues::new();
        for &d in &self.sp.dirichlet_velocity_dofs() {
            values.set(
                d,
                match bc {
                    FilterBc::MatchDirichlet => w[d],
                    FilterBc::Homogeneous => 0.0,
                },
            );
        }
        values
    }

    /// Solves `(δ²·A + M + γ_D·G)·ū = M·w` with the chosen trace handling.
    pub fn differential_filter(
        &self,
        w: &[f64],
        delta: f64,
        gamma_d: f64,
        bc: FilterBc,
    ) -> Result<Vec<f64>> {
        assert_eq!(w.len(), self.sp.n_velocity_dofs());
        if !(delta >= 0.0) || !(gamma_d >= 0.0) {
            return Err(Error::Config(format!(
                "filter parameters must be nonnegative, got δ = {delta}, γ_D = {gamma_d}"
            )));
        }
        let cached = self.cached(delta, gamma_d)?;
        let rhs = self.mass.matvec(w);
        let rhs = cached.sys.apply_rhs(&rhs, &self.trace_values(w, bc))?;
        cached.lu.solve(&rhs)
    }

    /// Eddy-viscosity-coefficient smoother `(A_{ν_T} + M)·ū = M·w_small`
    /// with `ν_T` evaluated from the input itself; the operator changes with
    /// the input, so nothing is cached.
    pub fn nonlinear_filter(&self, w_small: &[f64], c_s: f64, bc: FilterBc) -> Result<Vec<f64>> {
        assert_eq!(w_small.len(), self.sp.n_velocity_dofs());
        if !(c_s >= 0.0) {
            return Err(Error::Config(format!("smagorinsky constant must be ≥ 0, got {c_s}")));
        }
        let nu_t = eddy_viscosity(self.sp, w_small, c_s);
        let a_nu = assemble_eddy_diffusion(self.sp, &nu_t);
        let matrix = Csr::linear_combination(&[(1.0, &a_nu), (1.0, &self.mass)]);
        let sys = constrain_system(&matrix, &self.sp.dirichlet_velocity_dofs());
        let rhs = self.mass.matvec(w_small);
        let rhs = sys.apply_rhs(&rhs, &self.trace_values(w_small, bc))?;
        sparse_lu_factor(sys.matrix())?.solve(&rhs)
    }

    /// First-order deconvolution `2·F(u) − F(F(u))` with one parameter set.
    pub fn ad_deconvolve_order1(
        &self,
        u: &[f64],
        delta: f64,
        gamma_d: f64,
        bc: FilterBc,
    ) -> Result<Vec<f64>> {
        let once = self.differential_filter(u, delta, gamma_d, bc)?;
        let twice = self.differential_filter(&once, delta, gamma_d, bc)?;
        Ok(once.iter().zip(&twice).map(|(a, b)| 2.0 * a - b).collect())
    }
}

/// `w′ = w − w̄`: the coefficients the large scales leave behind.
pub fn small_scales(w: &[f64], large: &[f64]) -> Vec<f64> {
    assert_eq!(w.len(), large.len(), "scale split needs matching spaces");
    w.iter().zip(large).map(|(a, b)| a - b).collect()
}

/// A velocity sub-space with its prolongation into the full quadratic
/// space, plus the projection systems built over it.
pub struct CoarseSpace {
    prolongation: Csr,
    /// Pᵀ·M — turns fine coefficients into coarse projection data.
    restricted_mass: Csr,
    mass_c: Csr,
    graddiv_c: Csr,
    cache: RwLock<HashMap<u64, Arc<LuFactorization>>>,
}

impl CoarseSpace {
    fn from_prolongation(sp: &TaylorHoodSpace, prolongation: Csr) -> CoarseSpace {
        let mass = assemble_mass(sp, FieldKind::Velocity);
        let graddiv = assemble_graddiv(sp, 1.0);
        let pt = prolongation.transpose();
        let restricted_mass = pt.matmul(&mass);
        let mass_c = restricted_mass.matmul(&prolongation);
        let graddiv_c = pt.matmul(&graddiv).matmul(&prolongation);
        CoarseSpace {
            prolongation,
            restricted_mass,
            mass_c,
            graddiv_c,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// Piecewise-linear velocity on the same mesh: vertex values carry over,
    /// midpoints take the endpoint average. Nested, so the prolongation is
    /// exact.
    pub fn nested_p1(sp: &TaylorHoodSpace) -> CoarseSpace {
        let n_u = sp.n_velocity_dofs();
        let nv = sp.mesh().n_vertices();
        let mut coo = Coo::with_capacity(n_u, 2 * nv, 2 * (nv + 2 * sp.edges().len()));
        for v in 0..nv {
            for c in 0..2 {
                coo.push(2 * v + c, 2 * v + c, 1.0);
            }
        }
        for (e, &[a, b]) in sp.edges().iter().enumerate() {
            let node = nv + e;
            for c in 0..2 {
                coo.push(2 * node + c, 2 * a + c, 0.5);
                coo.push(2 * node + c, 2 * b + c, 0.5);
            }
        }
        CoarseSpace::from_prolongation(sp, coo.to_csr())
    }

    /// The full space as its own "coarse" space; projection becomes the
    /// identity at γ_P = 0.
    pub fn identity(sp: &TaylorHoodSpace) -> CoarseSpace {
        CoarseSpace::from_prolongation(sp, Csr::identity(sp.n_velocity_dofs()))
    }

    pub fn prolongation(&self) -> &Csr {
        &self.prolongation
    }

    pub fn n_coarse_dofs(&self) -> usize {
        self.prolongation.n_cols()
    }

    /// Solves `(ū, v) + γ_P(∇·ū, ∇·v) = (w, v)` over the coarse space and
    /// prolongs the solution back; the penalized-projection postprocess.
    pub fn l2_projection_postprocess(&self, w: &[f64], gamma_p: f64) -> Result<Vec<f64>> {
        assert_eq!(w.len(), self.prolongation.n_rows());
        if !(gamma_p >= 0.0) {
            return Err(Error::Config(format!("projection penalty must be ≥ 0, got {gamma_p}")));
        }
        let key = gamma_p.to_bits();
        // The read guard must be released before any write-lock attempt below.
        let hit = self
            .cache
            .read()
            .expect("projection cache poisoned")
            .get(&key)
            .cloned();
        let lu = match hit {
            Some(lu) => lu,
            None => {
                let matrix = Csr::linear_combination(&[
                    (1.0, &self.mass_c),
                    (gamma_p, &self.graddiv_c),
                ]);
                let lu = Arc::new(sparse_lu_factor(&matrix)?);
                let mut guard = self.cache.write().expect("projection cache poisoned");
                guard.entry(key).or_insert(lu).clone()
            }
        };
        let rhs = self.restricted_mass.matvec(w);
        let coarse = lu.solve(&rhs)?;
        Ok(self.prolongation.matvec(&coarse))
    }
}
