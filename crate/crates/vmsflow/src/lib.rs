//! Evolve-filter regularization of under-resolved incompressible flow.
//!
//! The library simulates the 2D incompressible Navier-Stokes equations with
//! Taylor-Hood (P2-P1) finite elements and regularizes the under-resolved
//! dynamics by filtering: the classical evolve-filter (EF) and
//! evolve-filter-relax (EFR) schemes, two variational-multiscale variants that
//! filter only the small resolved scales (EFFC via a second differential
//! filter, EPFC via an L2-projection postprocess), and a difference-correction
//! variant. Every full-order strategy has a POD-Galerkin reduced-order
//! counterpart built on supremizer-enriched velocity bases.
//!
//! Crate layout mirrors the pipeline: [`mesh`] builds tagged triangulations,
//! [`fem`] assembles the variational forms, [`evolve`] advances one implicit
//! Euler step by Newton iteration, [`filters`] provides the scale-separation
//! operators, [`strategies`] orchestrates full-order runs, [`rom`] compresses
//! and replays them, [`diagnostics`] measures, and [`cli`] wires everything to
//! files and a command line.

// Parameter checks are written `!(x >= 0.0)` on purpose: the negation also
// rejects NaN, which a plain `x < 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Test oracles walk several arrays with one shared index; enumerate() reads
// worse there, so the range-loop lint is off for test builds only.
#![cfg_attr(test, allow(clippy::needless_range_loop))]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod exec;
pub mod fem;
pub mod filters;
pub mod io;
pub mod mesh;
pub mod numerics;
pub mod rom;
pub mod strategies;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil;
