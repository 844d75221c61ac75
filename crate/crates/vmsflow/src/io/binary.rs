//! Little-endian binary plumbing shared by the snapshot and basis files.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub(crate) struct BinWriter<W: Write> {
    w: W,
}

impl<W: Write> BinWriter<W> {
    pub fn new(w: W) -> BinWriter<W> {
        BinWriter { w }
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.w.write_all(b)?;
        Ok(())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64s(&mut self, vs: &[f64]) -> Result<()> {
        for &v in vs {
            self.f64(v)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub(crate) struct BinReader<R: Read> {
    r: R,
}

impl<R: Read> BinReader<R> {
    pub fn new(r: R) -> BinReader<R> {
        BinReader { r }
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    /// Checks the 8-byte file signature, naming the format on mismatch.
    pub fn expect_magic(&mut self, magic: &[u8; 8], what: &str) -> Result<()> {
        let mut b = [0u8; 8];
        self.r.read_exact(&mut b)?;
        if &b != magic {
            return Err(Error::Invalid(format!("not a {what} file (bad signature)")));
        }
        Ok(())
    }

    /// Checks the format version right after the signature.
    pub fn expect_version(&mut self, version: u64, what: &str) -> Result<()> {
        let got = self.u64()?;
        if got != version {
            return Err(Error::Invalid(format!(
                "{what} file has version {got}, this build reads version {version}"
            )));
        }
        Ok(())
    }

    /// Asserts the stream is exhausted; anything left means a corrupt or
    /// mislabeled file.
    pub fn expect_eof(&mut self, what: &str) -> Result<()> {
        let mut b = [0u8; 1];
        match self.r.read(&mut b)? {
            0 => Ok(()),
            _ => Err(Error::Invalid(format!("{what} file has trailing data"))),
        }
    }
}
