//! Unstructured channel-with-obstacle meshes.
//!
//! Point placement is ours; the constrained Delaunay triangulation that
//! connects the points is delegated to `spade`. Around the obstacle we lay
//! staggered rings whose spacing grows from `target_h / refinement` at the
//! circle to the background spacing at the blend radius; the rest of the
//! channel is a structured grid. The circle polygon is enforced with
//! constraint edges and the hole is carved afterwards by centroid test.

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::mesh::{boundary_edges_by_scan, BoundaryTag, Mesh};

/// Channel `(0, length) × (0, height)` minus the disk at `center` with
/// `radius`. Defaults to the benchmark geometry.
#[derive(Debug, Clone, Copy)]
pub struct ChannelGeometry {
    pub length: f64,
    pub height: f64,
    pub center: (f64, f64),
    pub radius: f64,
}

impl Default for ChannelGeometry {
    fn default() -> Self {
        ChannelGeometry { length: 2.2, height: 0.41, center: (0.2, 0.2), radius: 0.05 }
    }
}

/// Benchmark-geometry convenience wrapper around [`build_channel_mesh`].
pub fn build_cylinder_channel_mesh(target_h: f64, refinement_near_cylinder: f64) -> Result<Mesh> {
    build_channel_mesh(ChannelGeometry::default(), target_h, refinement_near_cylinder)
}

pub fn build_channel_mesh(
    geom: ChannelGeometry,
    target_h: f64,
    refinement_near_cylinder: f64,
) -> Result<Mesh> {
    if !(target_h > 0.0) || !target_h.is_finite() {
        return Err(Error::Mesh(format!("target_h must be positive, got {target_h}")));
    }
    if !(refinement_near_cylinder > 0.0) || !refinement_near_cylinder.is_finite() {
        return Err(Error::Mesh(format!(
            "refinement_near_cylinder must be positive, got {refinement_near_cylinder}"
        )));
    }
    let (cx, cy) = geom.center;
    let r = geom.radius;
    if !(r > 0.0) {
        return Err(Error::Mesh(format!("radius must be positive, got {r}")));
    }
    // Shortest distance from the circle to a wall.
    let clearance = (cx.min(geom.length - cx)).min(cy.min(geom.height - cy)) - r;
    let h_near = target_h / refinement_near_cylinder;
    if clearance <= 3.0 * h_near {
        return Err(Error::Mesh(format!(
            "circle at {:?} with radius {r} leaves clearance {clearance:.3e}, too small for \
             near-obstacle spacing {h_near:.3e}",
            geom.center
        )));
    }
    // Background spacing: grid-cell diagonals land at about target_h.
    let s = target_h / std::f64::consts::SQRT_2;
    if s > 0.2 * geom.height {
        return Err(Error::Mesh(format!(
            "target_h {target_h} is too coarse for channel height {}",
            geom.height
        )));
    }
    let blend = r + 0.8 * clearance;
    if blend + 0.7 * s >= r + clearance {
        return Err(Error::Mesh(format!(
            "target_h {target_h} is too coarse relative to the obstacle clearance {clearance:.3e}"
        )));
    }

    // Ring spacing interpolates from h_near at the circle to slightly above
    // the grid spacing at the blend radius.
    let h_far = 1.2 * s;
    let spacing = |rho: f64| {
        let t = ((rho - r) / (blend - r)).clamp(0.0, 1.0);
        h_near + (h_far - h_near) * t
    };

    let mut points: Vec<(f64, f64)> = Vec::new();
    let n_circle = ((2.0 * std::f64::consts::PI * r / h_near).round() as usize).max(16);
    for i in 0..n_circle {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / n_circle as f64;
        points.push((cx + r * theta.cos(), cy + r * theta.sin()));
    }

    let keep = |p: (f64, f64)| {
        p.0 > 0.45 * s
            && p.0 < geom.length - 0.45 * s
            && p.1 > 0.45 * s
            && p.1 < geom.height - 0.45 * s
    };
    let mut rho = r;
    let mut ring = 0usize;
    let outermost;
    loop {
        rho += spacing(rho);
        ring += 1;
        if rho > blend {
            outermost = rho - spacing(rho);
            break;
        }
        let m = ((2.0 * std::f64::consts::PI * rho / spacing(rho)).round() as usize).max(16);
        let offset = 0.5 * (ring % 2) as f64;
        for i in 0..m {
            let theta = 2.0 * std::f64::consts::PI * (i as f64 + offset) / m as f64;
            let p = (cx + rho * theta.cos(), cy + rho * theta.sin());
            if keep(p) {
                points.push(p);
            }
        }
    }

    let nx = (geom.length / s).ceil() as usize;
    let ny = (geom.height / s).ceil() as usize;
    let exclusion = outermost + 0.7 * s;
    for j in 0..=ny {
        for i in 0..=nx {
            let p = (
                geom.length * i as f64 / nx as f64,
                geom.height * j as f64 / ny as f64,
            );
            if ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt() >= exclusion {
                points.push(p);
            }
        }
    }

    // Triangulate; the circle polygon is pinned with constraint edges.
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(points.len());
    for &(x, y) in &points {
        let h = cdt
            .insert(Point2::new(x, y))
            .map_err(|e| Error::Mesh(format!("point insertion failed at ({x}, {y}): {e:?}")))?;
        handles.push(h);
    }
    for i in 0..n_circle {
        cdt.add_constraint(handles[i], handles[(i + 1) % n_circle]);
    }

    let mut vertices = vec![(0.0, 0.0); cdt.num_vertices()];
    for v in cdt.vertices() {
        let p = v.position();
        vertices[v.fix().index()] = (p.x, p.y);
    }
    let circle_poly: Vec<(f64, f64)> =
        (0..n_circle).map(|i| vertices[handles[i].index()]).collect();
    let inside_hole = |p: (f64, f64)| {
        (0..n_circle).all(|i| {
            let a = circle_poly[i];
            let b = circle_poly[(i + 1) % n_circle];
            (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) > 0.0
        })
    };
    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(cdt.num_inner_faces());
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let idx = [vs[0].fix().index(), vs[1].fix().index(), vs[2].fix().index()];
        let centroid = (
            (vertices[idx[0]].0 + vertices[idx[1]].0 + vertices[idx[2]].0) / 3.0,
            (vertices[idx[0]].1 + vertices[idx[1]].1 + vertices[idx[2]].1) / 3.0,
        );
        if !inside_hole(centroid) {
            triangles.push(idx);
        }
    }

    // Compact renumbering in ascending old-index order.
    let mut new_index = vec![usize::MAX; vertices.len()];
    let mut used: Vec<usize> = triangles.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let compact: Vec<(f64, f64)> = used.iter().map(|&v| vertices[v]).collect();
    for (new, &old) in used.iter().enumerate() {
        new_index[old] = new;
    }
    for t in &mut triangles {
        for v in t.iter_mut() {
            *v = new_index[*v];
        }
    }

    let tol = 1e-9 * geom.length.max(geom.height);
    let boundary_edges = boundary_edges_by_scan(&triangles)
        .into_iter()
        .map(|[a, b]| {
            let mid_x = 0.5 * (compact[a].0 + compact[b].0);
            let tag = if mid_x.abs() < tol {
                BoundaryTag::Inlet
            } else if (mid_x - geom.length).abs() < tol {
                BoundaryTag::Outflow
            } else {
                BoundaryTag::Walls
            };
            ([a, b], tag)
        })
        .collect();

    Mesh::new(compact, triangles, boundary_edges)
}
