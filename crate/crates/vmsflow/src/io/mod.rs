//! Artifact persistence: snapshot and basis binaries, diagnostics CSV,
//! legacy VTK export, and the run manifest tying them together.

mod binary;
pub mod basis_file;
pub mod csv;
pub mod manifest;
pub mod snapshots;
pub mod vtk;

pub use basis_file::{read_basis, write_basis};
pub use csv::{read_diagnostics_csv, write_diagnostics_csv};
pub use manifest::RunManifest;
pub use snapshots::{read_snapshots, write_snapshots};
pub use vtk::export_vtk;
