//! Conforming triangulations of 2D domains with tagged boundary segments.

mod channel;
mod file;

pub use channel::{build_channel_mesh, build_cylinder_channel_mesh, ChannelGeometry};
pub use file::{load_mesh, save_mesh};

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Classification of a boundary edge. Dirichlet data lives on Inlet ∪ Walls;
/// Outflow is the natural (do-nothing) part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Inlet,
    Walls,
    Outflow,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Inlet => "inlet",
            BoundaryTag::Walls => "walls",
            BoundaryTag::Outflow => "outflow",
        }
    }

    pub fn parse(s: &str) -> Option<BoundaryTag> {
        match s {
            "inlet" => Some(BoundaryTag::Inlet),
            "walls" => Some(BoundaryTag::Walls),
            "outflow" => Some(BoundaryTag::Outflow),
            _ => None,
        }
    }
}

/// Immutable triangulation.
///
/// Triangles are counter-clockwise; every boundary edge `[a, b]` is oriented
/// along its triangle's traversal, so the domain interior lies to its left
/// and `(b−a)` rotated by −90° points outward. `element_diameters[k]` is the
/// longest edge of triangle `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<(f64, f64)>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    element_diameters: Vec<f64>,
}

impl Mesh {
    /// Validates connectivity and builds the derived data. Triangles are
    /// reoriented to counter-clockwise when needed; boundary edges must list
    /// exactly the edges that belong to one triangle, each once.
    pub fn new(
        vertices: Vec<(f64, f64)>,
        mut triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Mesh> {
        let n = vertices.len();
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!("triangle {k} references a missing vertex")));
            }
            let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area < 0.0 {
                t.swap(1, 2);
            } else if area == 0.0 {
                return Err(Error::Mesh(format!("triangle {k} is degenerate")));
            }
        }

        // Edge incidence: interior edges twice, boundary edges once.
        let mut incidence: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for (k, t) in triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = incidence.entry(key).or_insert((0, [a, b]));
                entry.0 += 1;
                if entry.0 > 2 {
                    return Err(Error::Mesh(format!(
                        "edge ({a}, {b}) is shared by more than two triangles (triangle {k})"
                    )));
                }
            }
        }

        let mut tagged: HashMap<(usize, usize), (BoundaryTag, [usize; 2])> = HashMap::new();
        for &([a, b], tag) in &boundary_edges {
            if a >= n || b >= n {
                return Err(Error::Mesh(format!("boundary edge ({a}, {b}) references a missing vertex")));
            }
            let key = (a.min(b), a.max(b));
            match incidence.get(&key) {
                Some(&(1, oriented)) => {
                    if tagged.insert(key, (tag, oriented)).is_some() {
                        return Err(Error::Mesh(format!("boundary edge ({a}, {b}) is tagged twice")));
                    }
                }
                Some(_) => {
                    return Err(Error::Mesh(format!(
                        "boundary edge ({a}, {b}) is interior to the triangulation"
                    )));
                }
                None => {
                    return Err(Error::Mesh(format!(
                        "boundary edge ({a}, {b}) does not belong to any triangle"
                    )));
                }
            }
        }
        let n_once = incidence.values().filter(|&&(count, _)| count == 1).count();
        if n_once != tagged.len() {
            return Err(Error::Mesh(format!(
                "boundary tags cover {} of {} boundary edges",
                tagged.len(),
                n_once
            )));
        }

        // Keep the caller's edge order, but store the triangle-aligned
        // orientation so outward normals are well defined.
        let boundary_edges = boundary_edges
            .iter()
            .map(|&([a, b], _)| {
                let key = (a.min(b), a.max(b));
                let (tag, oriented) = tagged[&key];
                (oriented, tag)
            })
            .collect();

        let element_diameters = triangles
            .iter()
            .map(|t| {
                let p = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
                dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
            })
            .collect();

        Ok(Mesh { vertices, triangles, boundary_edges, element_diameters })
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[([usize; 2], BoundaryTag)] {
        &self.boundary_edges
    }

    pub fn element_diameters(&self) -> &[f64] {
        &self.element_diameters
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_corners(&self, k: usize) -> [(f64, f64); 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_corners(k);
        0.5 * signed_area(a, b, c)
    }

    pub fn domain_area(&self) -> f64 {
        (0..self.n_triangles()).map(|k| self.triangle_area(k)).sum()
    }

    /// Replaces every boundary tag by `f(edge midpoint)`.
    pub fn with_boundary_tags(&self, f: impl Fn((f64, f64)) -> BoundaryTag) -> Mesh {
        let mut out = self.clone();
        for ([a, b], tag) in &mut out.boundary_edges {
            let (pa, pb) = (self.vertices[*a], self.vertices[*b]);
            *tag = f((0.5 * (pa.0 + pb.0), 0.5 * (pa.1 + pb.1)));
        }
        out
    }

    /// FNV-1a over the canonical byte image of coordinates, connectivity,
    /// and tags; used to stamp artifacts with the mesh they came from.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv::new();
        h.update(&(self.vertices.len() as u64).to_le_bytes());
        for &(x, y) in &self.vertices {
            h.update(&x.to_bits().to_le_bytes());
            h.update(&y.to_bits().to_le_bytes());
        }
        h.update(&(self.triangles.len() as u64).to_le_bytes());
        for t in &self.triangles {
            for &v in t {
                h.update(&(v as u64).to_le_bytes());
            }
        }
        h.update(&(self.boundary_edges.len() as u64).to_le_bytes());
        for &([a, b], tag) in &self.boundary_edges {
            h.update(&(a as u64).to_le_bytes());
            h.update(&(b as u64).to_le_bytes());
            h.update(&[tag as u8]);
        }
        h.finish()
    }
}

/// Running FNV-1a (64-bit).
pub(crate) struct Fnv(u64);

impl Fnv {
    pub fn new() -> Fnv {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

fn signed_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
}

/// Structured triangulation of `x_range × y_range`: nx·ny cells, each split
/// along the same diagonal. All outer edges are tagged Walls; retag with
/// [`Mesh::with_boundary_tags`] when a flow-through setup is needed.
pub fn build_rectangle_mesh(
    nx: usize,
    ny: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Mesh(format!("subdivision counts must be positive, got ({nx}, {ny})")));
    }
    if !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
        return Err(Error::Mesh("rectangle ranges must be strictly increasing".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / nx as f64;
            let y = y_range.0 + (y_range.1 - y_range.0) * j as f64 / ny as f64;
            vertices.push((x, y));
        }
    }
    let at = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let boundary_edges = boundary_edges_by_scan(&triangles)
        .into_iter()
        .map(|e| (e, BoundaryTag::Walls))
        .collect();
    Mesh::new(vertices, triangles, boundary_edges)
}

/// Edges used by exactly one triangle, oriented along their triangle, in
/// first-use order.
pub(crate) fn boundary_edges_by_scan(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut out = Vec::new();
    for t in triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            if counts[&(a.min(b), a.max(b))] == 1 {
                out.push([a, b]);
            }
        }
    }
    out
}

/// Exact minimum/maximum element diameter plus counts.
pub fn mesh_stats(m: &Mesh) -> (f64, f64, usize, usize) {
    let h_min = m.element_diameters().iter().cloned().fold(f64::INFINITY, f64::min);
    let h_max = m.element_diameters().iter().cloned().fold(0.0, f64::max);
    (h_min, h_max, m.n_vertices(), m.n_triangles())
}
