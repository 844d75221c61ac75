//! Diagnostics series as CSV. Optional quantities (forces, reference
//! error) round-trip as empty fields; a `# manifest` comment line ties the
//! file to the run that wrote it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsSeries, ForceCoefficients};
use crate::error::{Error, Result};

const HEADER: &str = "t,energy,p_norm,div,C_D,C_L,C_D_ex,C_L_ey,E_u";

pub fn write_diagnostics_csv(
    path: &Path,
    series: &DiagnosticsSeries,
    manifest_id: u64,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# manifest {manifest_id:016x}")?;
    writeln!(out, "{HEADER}")?;
    for rec in series.records() {
        write!(out, "{},{},{},{}", rec.t, rec.energy, rec.pressure_norm, rec.divergence_norm)?;
        match &rec.forces {
            Some(f) => write!(out, ",{},{},{},{}", f.drag, f.lift, f.drag_ex, f.lift_ey)?,
            None => write!(out, ",,,,")?,
        }
        match rec.reference_error {
            Some(e) => writeln!(out, ",{e}")?,
            None => writeln!(out, ",")?,
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_diagnostics_csv(path: &Path) -> Result<DiagnosticsSeries> {
    let text = std::fs::read_to_string(path)?;
    let label = path.display().to_string();
    let mut series = DiagnosticsSeries::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let err = |msg: String| Error::Parse { path: label.clone(), line: lineno, msg };
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line != HEADER {
                return Err(err(format!("expected header `{HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 columns, got {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| err(format!("cannot parse `{}` in column {}", fields[i], i + 1)))
        };
        let force_fields = &fields[4..8];
        let forces = if force_fields.iter().all(|f| f.is_empty()) {
            None
        } else if force_fields.iter().any(|f| f.is_empty()) {
            return Err(err("force columns must be all present or all empty".into()));
        } else {
            Some(ForceCoefficients {
                drag: num(4)?,
                lift: num(5)?,
                drag_ex: num(6)?,
                lift_ey: num(7)?,
            })
        };
        let reference_error = if fields[8].is_empty() { None } else { Some(num(8)?) };
        series.push(DiagnosticsRecord {
            t: num(0)?,
            energy: num(1)?,
            pressure_norm: num(2)?,
            divergence_norm: num(3)?,
            forces,
            reference_error,
        })?;
    }
    if !saw_header {
        return Err(Error::Parse {
            path: label,
            line: 0,
            msg: "no header line found".into(),
        });
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DiagnosticsSeries {
        let mut s = DiagnosticsSeries::new();
        s.push(DiagnosticsRecord {
            t: 0.0,
            energy: 1.25,
            pressure_norm: 0.5,
            divergence_norm: 1e-9,
            forces: None,
            reference_error: None,
        })
        .unwrap();
        s.push(DiagnosticsRecord {
            t: 0.1,
            energy: 1.1875,
            pressure_norm: 0.4375,
            divergence_norm: 2e-9,
            forces: Some(ForceCoefficients {
                drag: 3.1640625,
                lift: -0.0078125,
                drag_ex: 3.15625,
                lift_ey: -0.005,
            }),
            reference_error: Some(0.0125),
        })
        .unwrap();
        s
    }

    #[test]
    fn round_trip_preserves_every_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let series = sample();
        write_diagnostics_csv(&path, &series, 0xbeef).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# manifest 000000000000beef\n"));
        assert_eq!(text.lines().nth(1), Some(HEADER));
        assert_eq!(text.lines().count(), 2 + series.len());

        let back = read_diagnostics_csv(&path).unwrap();
        assert_eq!(back.records(), series.records());
    }

    #[test]
    fn malformed_rows_are_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        for (body, needle) in [
            ("t,energy\n", "expected header"),
            (&format!("{HEADER}\n1,2,3\n"), "expected 9 columns"),
            (&format!("{HEADER}\n0,1,2,3,4,,6,7,\n"), "all present or all empty"),
            (&format!("{HEADER}\n0,one,2,3,,,,,\n"), "cannot parse `one`"),
        ] {
            std::fs::write(&path, body).unwrap();
            match read_diagnostics_csv(&path) {
                Err(Error::Parse { msg, .. }) => {
                    assert!(msg.contains(needle), "{msg:?} missing {needle:?}")
                }
                other => panic!("expected parse error for {body:?}, got {other:?}"),
            }
        }
    }
}
