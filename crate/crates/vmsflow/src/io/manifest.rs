//! Run manifest: what produced the artifacts in a run directory. Every
//! other output file carries [`RunManifest::id`], a hash over the identity
//! fields (code version, mesh, effective configuration) — timings do not
//! change the id.

use std::path::Path;

use crate::error::Result;
use crate::mesh::Fnv;

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    /// Effective configuration in file syntax, every default resolved.
    pub config_echo: String,
    pub mesh_hash: u64,
    pub code_version: String,
    pub wall_clock_s: f64,
    /// Named stage durations in seconds, in execution order.
    pub stages: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn new(config_echo: String, mesh_hash: u64) -> RunManifest {
        RunManifest {
            config_echo,
            mesh_hash,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s: 0.0,
            stages: Vec::new(),
        }
    }

    pub fn stage(&mut self, name: &str, seconds: f64) {
        self.stages.push((name.to_string(), seconds));
    }

    /// Identity hash: stable across reruns of the same configuration on the
    /// same mesh with the same build, regardless of how long they took.
    pub fn id(&self) -> u64 {
        let mut h = Fnv::new();
        h.update(self.code_version.as_bytes());
        h.update(&self.mesh_hash.to_le_bytes());
        h.update(self.config_echo.as_bytes());
        h.finish()
    }

    pub fn render(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(s, "vmsflow {}", self.code_version).unwrap();
        writeln!(s, "manifest_id = {:016x}", self.id()).unwrap();
        writeln!(s, "mesh_hash = {:016x}", self.mesh_hash).unwrap();
        writeln!(s, "wall_clock_s = {}", self.wall_clock_s).unwrap();
        for (name, secs) in &self.stages {
            writeln!(s, "stage {name} = {secs}").unwrap();
        }
        s.push('\n');
        s.push_str(&self.config_echo);
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
