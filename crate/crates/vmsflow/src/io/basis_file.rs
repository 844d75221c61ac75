//! Reduced-basis persistence: signature, version, dimensioned header, then
//! lift, the three mode blocks, and their spectra as little-endian 64-bit
//! floats.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::Result;
use crate::io::binary::{BinReader, BinWriter};
use crate::numerics::dense::DenseMatrix;
use crate::rom::ReducedBasis;

const MAGIC: &[u8; 8] = b"VMSFBAS\0";
const VERSION: u64 = 1;

pub fn write_basis(path: &Path, basis: &ReducedBasis, manifest_id: u64) -> Result<()> {
    let mut w = BinWriter::new(BufWriter::new(File::create(path)?));
    w.bytes(MAGIC)?;
    w.u64(VERSION)?;
    w.u64(manifest_id)?;
    w.u64(basis.n_velocity_dofs() as u64)?;
    w.u64(basis.n_pressure_dofs() as u64)?;
    w.u64(basis.r_u() as u64)?;
    w.u64(basis.r_s() as u64)?;
    w.u64(basis.r_p() as u64)?;
    w.f64s(basis.lift())?;
    w.f64s(basis.velocity_modes().data())?;
    w.f64s(basis.supremizer_modes().data())?;
    w.f64s(basis.pressure_modes().data())?;
    for spectrum in
        [&basis.velocity_spectrum, &basis.supremizer_spectrum, &basis.pressure_spectrum]
    {
        w.u64(spectrum.len() as u64)?;
        w.f64s(spectrum)?;
    }
    w.finish()
}

pub fn read_basis(path: &Path) -> Result<(ReducedBasis, u64)> {
    let mut r = BinReader::new(BufReader::new(File::open(path)?));
    r.expect_magic(MAGIC, "basis")?;
    r.expect_version(VERSION, "basis")?;
    let manifest_id = r.u64()?;
    let n_u = r.u64()? as usize;
    let n_p = r.u64()? as usize;
    let r_u = r.u64()? as usize;
    let r_s = r.u64()? as usize;
    let r_p = r.u64()? as usize;
    let lift = r.f64s(n_u)?;
    let velocity = DenseMatrix::from_row_major(n_u, r_u, r.f64s(n_u * r_u)?);
    let supremizer = DenseMatrix::from_row_major(n_u, r_s, r.f64s(n_u * r_s)?);
    let pressure = DenseMatrix::from_row_major(n_p, r_p, r.f64s(n_p * r_p)?);
    let mut spectra = Vec::with_capacity(3);
    for _ in 0..3 {
        let len = r.u64()? as usize;
        spectra.push(r.f64s(len)?);
    }
    r.expect_eof("basis")?;
    let pressure_spectrum = spectra.pop().unwrap();
    let supremizer_spectrum = spectra.pop().unwrap();
    let velocity_spectrum = spectra.pop().unwrap();
    let basis = ReducedBasis::from_parts(
        velocity,
        supremizer,
        pressure,
        lift,
        velocity_spectrum,
        supremizer_spectrum,
        pressure_spectrum,
    )?;
    Ok((basis, manifest_id))
}
