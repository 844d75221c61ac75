//! Plain-text mesh persistence.
//!
//! Format (version 1): a header line, then three counted sections. All
//! coordinates are written with 17 digits after the decimal exponent so a
//! load returns bitwise-identical f64 values.
//!
//! ```text
//! vmsflow-mesh 1
//! vertices <n>
//! <x> <y>
//! triangles <n>
//! <a> <b> <c>
//! boundary_edges <n>
//! <a> <b> <inlet|walls|outflow>
//! ```

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

const HEADER: &str = "vmsflow-mesh 1";

pub fn save_mesh(m: &Mesh, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{HEADER}")?;
    writeln!(w, "vertices {}", m.n_vertices())?;
    for &(x, y) in m.vertices() {
        writeln!(w, "{x:.17e} {y:.17e}")?;
    }
    writeln!(w, "triangles {}", m.n_triangles())?;
    for t in m.triangles() {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "boundary_edges {}", m.boundary_edges().len())?;
    for &([a, b], tag) in m.boundary_edges() {
        writeln!(w, "{a} {b} {}", tag.as_str())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let path_str = path.display().to_string();
    let fail = |line: usize, msg: String| Error::Parse { path: path_str.clone(), line, msg };

    let mut next_line = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(s))) => Ok((i + 1, s)),
            Some((i, Err(e))) => Err(fail(i + 1, format!("unreadable line: {e}"))),
            None => Err(fail(0, format!("file ends before {what}"))),
        }
    };

    let (ln, header) = next_line("header")?;
    if header.trim() != HEADER {
        return Err(fail(ln, format!("expected header '{HEADER}', found '{}'", header.trim())));
    }

    let section_count = |ln: usize, s: &str, name: &str| -> Result<usize> {
        let mut it = s.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(k), Some(v), None) if k == name => v
                .parse()
                .map_err(|_| fail(ln, format!("invalid {name} count '{v}'"))),
            _ => Err(fail(ln, format!("expected '{name} <count>', found '{s}'"))),
        }
    };

    let (ln, s) = next_line("vertices section")?;
    let n_vertices = section_count(ln, &s, "vertices")?;
    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (ln, s) = next_line("vertex coordinates")?;
        let mut it = s.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(x), Some(y), None) => {
                let x: f64 = x.parse().map_err(|_| fail(ln, format!("invalid coordinate '{x}'")))?;
                let y: f64 = y.parse().map_err(|_| fail(ln, format!("invalid coordinate '{y}'")))?;
                vertices.push((x, y));
            }
            _ => return Err(fail(ln, format!("expected '<x> <y>', found '{s}'"))),
        }
    }

    let (ln, s) = next_line("triangles section")?;
    let n_triangles = section_count(ln, &s, "triangles")?;
    let mut triangles = Vec::with_capacity(n_triangles);
    for _ in 0..n_triangles {
        let (ln, s) = next_line("triangle indices")?;
        let idx: Vec<usize> = s
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| fail(ln, format!("invalid vertex index '{v}'"))))
            .collect::<Result<_>>()?;
        if idx.len() != 3 {
            return Err(fail(ln, format!("expected 3 vertex indices, found {}", idx.len())));
        }
        triangles.push([idx[0], idx[1], idx[2]]);
    }

    let (ln, s) = next_line("boundary_edges section")?;
    let n_edges = section_count(ln, &s, "boundary_edges")?;
    let mut boundary_edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (ln, s) = next_line("boundary edge")?;
        let mut it = s.split_whitespace();
        match (it.next(), it.next(), it.next(), it.next()) {
            (Some(a), Some(b), Some(tag), None) => {
                let a: usize = a.parse().map_err(|_| fail(ln, format!("invalid vertex index '{a}'")))?;
                let b: usize = b.parse().map_err(|_| fail(ln, format!("invalid vertex index '{b}'")))?;
                let tag = BoundaryTag::parse(tag)
                    .ok_or_else(|| fail(ln, format!("unknown boundary tag '{tag}'")))?;
                boundary_edges.push(([a, b], tag));
            }
            _ => return Err(fail(ln, format!("expected '<a> <b> <tag>', found '{s}'"))),
        }
    }

    Mesh::new(vertices, triangles, boundary_edges)
}
