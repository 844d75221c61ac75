//! Legacy ASCII VTK export of a velocity/pressure pair on the mesh
//! vertices, with vorticity as a derived point scalar. Quadratic velocity
//! dofs are downsampled to the vertex nodes; vorticity at a vertex is the
//! area-weighted average of the per-element curl evaluated there.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::space::{Field, FieldKind, TaylorHoodSpace};

pub fn export_vtk(
    sp: &TaylorHoodSpace,
    velocity: &Field,
    pressure: &Field,
    path: &Path,
    comment: &str,
) -> Result<()> {
    if velocity.kind != FieldKind::Velocity || pressure.kind != FieldKind::Pressure {
        return Err(Error::Invalid("export expects a (velocity, pressure) pair".into()));
    }
    if velocity.coeffs.len() != sp.n_velocity_dofs()
        || pressure.coeffs.len() != sp.n_pressure_dofs()
    {
        return Err(Error::Dimension(format!(
            "fields carry ({}, {}) coefficients, the space has ({}, {})",
            velocity.coeffs.len(),
            pressure.coeffs.len(),
            sp.n_velocity_dofs(),
            sp.n_pressure_dofs()
        )));
    }

    let mesh = sp.mesh();
    let nv = mesh.n_vertices();
    let vorticity = vertex_vorticity(sp, &velocity.coeffs);

    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    // The title line may not exceed 255 characters and must not be empty.
    let title = if comment.is_empty() { "flow field" } else { comment };
    writeln!(out, "{}", &title[..title.len().min(255)])?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;

    writeln!(out, "POINTS {nv} double")?;
    for &(x, y) in mesh.vertices() {
        writeln!(out, "{x} {y} 0")?;
    }
    let nt = mesh.n_triangles();
    writeln!(out, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }

    writeln!(out, "POINT_DATA {nv}")?;
    writeln!(out, "VECTORS velocity double")?;
    for v in 0..nv {
        writeln!(out, "{} {} 0", velocity.coeffs[2 * v], velocity.coeffs[2 * v + 1])?;
    }
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in 0..nv {
        writeln!(out, "{}", pressure.coeffs[v])?;
    }
    writeln!(out, "SCALARS vorticity double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in 0..nv {
        writeln!(out, "{}", vorticity[v])?;
    }
    out.flush()?;
    Ok(())
}

/// `∂x u_y − ∂y u_x` at each vertex, averaged over the adjacent elements
/// with area weights (the per-element curl is multivalued at a vertex).
fn vertex_vorticity(sp: &TaylorHoodSpace, coeffs: &[f64]) -> Vec<f64> {
    let mesh = sp.mesh();
    let nv = mesh.n_vertices();
    let mut acc = vec![0.0; nv];
    let mut weight = vec![0.0; nv];
    for k in 0..mesh.n_triangles() {
        let area = mesh.triangle_area(k);
        for (corner, &v) in mesh.triangles()[k].iter().enumerate() {
            let p = mesh.triangle_corners(k)[corner];
            let g = sp.velocity_gradient_at(k, coeffs, p);
            acc[v] += area * (g[1][0] - g[0][1]);
            weight[v] += area;
        }
    }
    acc.iter().zip(&weight).map(|(a, w)| if *w > 0.0 { a / w } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rectangle_mesh;

    fn space() -> TaylorHoodSpace {
        TaylorHoodSpace::new(build_rectangle_mesh(3, 3, (0.0, 1.0), (0.0, 1.0)).unwrap())
    }

    /// Pulls one named float block back out of the exported text.
    fn parse_block(text: &str, header: &str, n: usize, per_line: usize) -> Vec<f64> {
        let mut lines = text.lines().skip_while(|l| !l.starts_with(header));
        assert!(lines.next().is_some(), "missing block {header}");
        let mut out = Vec::new();
        for line in lines {
            if line.starts_with("LOOKUP_TABLE") {
                continue;
            }
            let vals: Vec<f64> = line.split_whitespace().map(|v| v.parse().unwrap()).collect();
            if vals.len() != per_line {
                break;
            }
            out.extend(vals);
            if out.len() == n * per_line {
                break;
            }
        }
        assert_eq!(out.len(), n * per_line, "short block {header}");
        out
    }

    #[test]
    fn zero_fields_export_zero_arrays() {
        let sp = space();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.vtk");
        let u = Field::velocity(vec![0.0; sp.n_velocity_dofs()], 0.0);
        let p = Field::pressure(vec![0.0; sp.n_pressure_dofs()], 0.0);
        export_vtk(&sp, &u, &p, &path, "").unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let nv = sp.mesh().n_vertices();
        assert!(text.contains(&format!("POINTS {nv} double")));
        assert!(text.contains(&format!("POINT_DATA {nv}")));
        for block in [
            parse_block(&text, "VECTORS velocity", nv, 3),
            parse_block(&text, "SCALARS pressure", nv, 1),
            parse_block(&text, "SCALARS vorticity", nv, 1),
        ] {
            assert!(block.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn reader_recovers_the_vertex_values() {
        let sp = space();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtk");
        let u = Field::velocity(
            sp.interpolate_velocity(|(x, y)| (x + 2.0 * y, x * y)),
            0.5,
        );
        let p = Field::pressure(sp.interpolate_pressure(|(x, y)| x - y), 0.5);
        export_vtk(&sp, &u, &p, &path, "manifest 00ff").unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().nth(1), Some("manifest 00ff"));
        let nv = sp.mesh().n_vertices();
        let pts = parse_block(&text, "POINTS", nv, 3);
        let vel = parse_block(&text, "VECTORS velocity", nv, 3);
        let pre = parse_block(&text, "SCALARS pressure", nv, 1);
        for v in 0..nv {
            let (x, y) = (pts[3 * v], pts[3 * v + 1]);
            assert_eq!(pts[3 * v + 2], 0.0);
            assert!((vel[3 * v] - (x + 2.0 * y)).abs() <= 1e-12);
            assert!((vel[3 * v + 1] - x * y).abs() <= 1e-12);
            assert!((pre[v] - (x - y)).abs() <= 1e-12);
        }
    }

    #[test]
    fn rigid_rotation_has_constant_curl() {
        let sp = space();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rot.vtk");
        // u = (−y, x): ∂x u_y − ∂y u_x = 2 everywhere, and the field is
        // linear so each element reproduces it exactly.
        let u = Field::velocity(sp.interpolate_velocity(|(x, y)| (-y, x)), 0.0);
        let p = Field::pressure(vec![0.0; sp.n_pressure_dofs()], 0.0);
        export_vtk(&sp, &u, &p, &path, "").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let nv = sp.mesh().n_vertices();
        for w in parse_block(&text, "SCALARS vorticity", nv, 1) {
            assert!((w - 2.0).abs() <= 1e-10, "curl {w}");
        }
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let sp = space();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vtk");
        let u = Field::velocity(vec![0.0; 4], 0.0);
        let p = Field::pressure(vec![0.0; sp.n_pressure_dofs()], 0.0);
        assert!(export_vtk(&sp, &u, &p, &path, "").is_err());
        assert!(export_vtk(&sp, &p, &u, &path, "").is_err(), "swapped kinds");
    }
}
