//! Reduced-order counterparts of the full solvers: proper orthogonal
//! decomposition of snapshot data, supremizer enrichment for pressure
//! stability, Galerkin projection of the flow operators, and the reduced
//! time steppers with their filter-based variants.

pub mod basis;
pub mod pod;
pub mod project;
pub mod step;
pub mod supremizer;

pub use basis::{build_basis, expand, ReducedBasis};
pub use pod::{pod, PodModes, POD_DROP_RELATIVE};
pub use project::{project_operators, ReducedOperators};
pub use step::{
    effc_rom_step, efrom_step, epfc_rom_step, grom_step, run_reduced, ReducedState, RomConfig,
    RomRun, RomStrategy,
};
pub use supremizer::SupremizerSolver;
