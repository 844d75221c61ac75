//! Taylor–Hood finite elements: quadratic velocity, linear pressure on
//! straight triangles, with the operator assembly and strong boundary
//! handling the time steppers build on.

pub(crate) mod basis;

pub mod assembly;
pub mod dirichlet;
pub mod quadrature;
pub mod space;

pub use assembly::{
    apply_convection, assemble_convection_jacobian, assemble_convection_matrix,
    assemble_divergence, assemble_eddy_diffusion, assemble_graddiv, assemble_mass,
    assemble_smagorinsky, assemble_smagorinsky_jacobian, assemble_stiffness, convection_form,
    eddy_viscosity, skew_convection_form, small_scale_interpolation,
};
pub use dirichlet::{
    constrain_system, velocity_dirichlet_values, BoundaryValues, ConstrainedSystem,
};
pub use space::{BcSpec, Field, FieldKind, TaylorHoodSpace};
