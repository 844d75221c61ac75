//! Snapshot persistence: signature, version, provenance, space dimensions,
//! then `(t, velocity, pressure)` records as little-endian 64-bit floats.
//! Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::evolve::EvolveConfig;
use crate::io::binary::{BinReader, BinWriter};
use crate::strategies::{CoarseSpaceKind, Provenance, SnapshotSet, Strategy, StrategyConfig};

const MAGIC: &[u8; 8] = b"VMSFSNP\0";
const VERSION: u64 = 1;

fn strategy_code(s: Strategy) -> u64 {
    match s {
        Strategy::Unfiltered => 0,
        Strategy::Ef => 1,
        Strategy::Efr => 2,
        Strategy::Effc => 3,
        Strategy::Epfc => 4,
        Strategy::DiffCorrect => 5,
    }
}

fn strategy_from_code(c: u64) -> Result<Strategy> {
    Ok(match c {
        0 => Strategy::Unfiltered,
        1 => Strategy::Ef,
        2 => Strategy::Efr,
        3 => Strategy::Effc,
        4 => Strategy::Epfc,
        5 => Strategy::DiffCorrect,
        other => return Err(Error::Invalid(format!("unknown strategy code {other}"))),
    })
}

/// Writes the set and the id of the manifest that produced it.
pub fn write_snapshots(path: &Path, set: &SnapshotSet, manifest_id: u64) -> Result<()> {
    let mut w = BinWriter::new(BufWriter::new(File::create(path)?));
    w.bytes(MAGIC)?;
    w.u64(VERSION)?;
    w.u64(manifest_id)?;

    let prov = set.provenance();
    let cfg = &prov.config;
    w.u64(prov.mesh_hash)?;
    w.u64(strategy_code(cfg.strategy))?;
    w.u64(match cfg.coarse {
        CoarseSpaceKind::NestedP1 => 0,
        CoarseSpaceKind::Full => 1,
    })?;
    w.u64(cfg.evolve.c_s.is_some() as u64)?;
    w.f64(cfg.evolve.c_s.unwrap_or(0.0))?;
    w.f64(cfg.evolve.nu)?;
    w.f64(cfg.evolve.dt)?;
    w.f64(cfg.evolve.newton_tol)?;
    w.u64(cfg.evolve.newton_max_iter as u64)?;
    w.f64(cfg.t_final)?;
    w.f64(cfg.delta)?;
    w.f64(cfg.delta1)?;
    w.f64(cfg.delta2)?;
    w.f64(cfg.chi)?;
    w.f64(cfg.gamma_d)?;
    w.f64(cfg.gamma_p)?;
    w.u64(cfg.snapshot_stride as u64)?;

    w.u64(set.n_velocity_dofs() as u64)?;
    w.u64(set.n_pressure_dofs() as u64)?;
    w.u64(set.len() as u64)?;
    for s in set.snapshots() {
        w.f64(s.t)?;
        w.f64s(&s.velocity)?;
        w.f64s(&s.pressure)?;
    }
    w.finish()
}

/// Reads a set back along with the manifest id stored beside it.
pub fn read_snapshots(path: &Path) -> Result<(SnapshotSet, u64)> {
    let mut r = BinReader::new(BufReader::new(File::open(path)?));
    r.expect_magic(MAGIC, "snapshot")?;
    r.expect_version(VERSION, "snapshot")?;
    let manifest_id = r.u64()?;

    let mesh_hash = r.u64()?;
    let strategy = strategy_from_code(r.u64()?)?;
    let coarse = match r.u64()? {
        0 => CoarseSpaceKind::NestedP1,
        1 => CoarseSpaceKind::Full,
        other => return Err(Error::Invalid(format!("unknown coarse-space code {other}"))),
    };
    let has_cs = r.u64()? != 0;
    let cs_value = r.f64()?;
    let nu = r.f64()?;
    let dt = r.f64()?;
    let newton_tol = r.f64()?;
    let newton_max_iter = r.u64()? as usize;
    let config = StrategyConfig {
        strategy,
        evolve: EvolveConfig {
            nu,
            dt,
            newton_tol,
            newton_max_iter,
            c_s: has_cs.then_some(cs_value),
        },
        t_final: r.f64()?,
        delta: r.f64()?,
        delta1: r.f64()?,
        delta2: r.f64()?,
        chi: r.f64()?,
        gamma_d: r.f64()?,
        gamma_p: r.f64()?,
        coarse,
        snapshot_stride: r.u64()? as usize,
    };

    let n_u = r.u64()? as usize;
    let n_p = r.u64()? as usize;
    let count = r.u64()? as usize;
    let mut set = SnapshotSet::new(Provenance { config, mesh_hash }, n_u, n_p);
    for _ in 0..count {
        let t = r.f64()?;
        let velocity = r.f64s(n_u)?;
        let pressure = r.f64s(n_p)?;
        set.push(t, velocity, pressure)?;
    }
    r.expect_eof("snapshot")?;
    Ok((set, manifest_id))
}
