//! Quantitative observables: norms, obstacle forces, relative errors,
//! cross-mesh transfer, and line samples.
//!
//! A [`FlowProbes`] instance caches the Gramians (and the obstacle boundary,
//! when the mesh has one) for a space, so per-step evaluation during a run is
//! a handful of sparse quadratic forms plus a boundary-edge quadrature.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::fem::quadrature::{tri_rule, EDGE_RULE};
use crate::fem::{assemble_graddiv, assemble_mass, Field, FieldKind, TaylorHoodSpace};
use crate::mesh::BoundaryTag;
use crate::numerics::lu::sparse_lu_factor;
use crate::numerics::sparse::Csr;

/// Reference velocity scale in the force coefficients.
pub const DEFAULT_U_REF: f64 = 1.0;
/// Reference length scale in the force coefficients (obstacle diameter).
pub const DEFAULT_L_REF: f64 = 0.1;

/// Force coefficients on the obstacle boundary, computed from the stress
/// `2ν D(u) − p I` with `D` the symmetric velocity gradient.
///
/// `drag`/`lift` project the traction onto the obstacle tangent/normal
/// (`t_C`/`n_C`), the convention used by the figures this code reproduces;
/// `drag_ex`/`lift_ey` are the usual fixed-axis coefficients. The normal
/// points out of the obstacle, into the fluid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceCoefficients {
    pub drag: f64,
    pub lift: f64,
    pub drag_ex: f64,
    pub lift_ey: f64,
}

/// One row of a diagnostics time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Squared L² norm of the velocity (`uᵀ M u`).
    pub energy: f64,
    pub pressure_norm: f64,
    pub divergence_norm: f64,
    /// Present when the mesh has a closed interior obstacle.
    pub forces: Option<ForceCoefficients>,
    /// Relative L² error against a reference trajectory, when one is given.
    pub reference_error: Option<f64>,
}

/// Append-only series with strictly increasing times and finite entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsSeries {
    records: Vec<DiagnosticsRecord>,
}

impl DiagnosticsSeries {
    pub fn new() -> DiagnosticsSeries {
        DiagnosticsSeries { records: Vec::new() }
    }

    pub fn push(&mut self, rec: DiagnosticsRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(rec.t > last.t) {
                return Err(Error::Invalid(format!(
                    "diagnostics times must increase strictly: {} after {}",
                    rec.t, last.t
                )));
            }
        }
        let mut entries = vec![rec.t, rec.energy, rec.pressure_norm, rec.divergence_norm];
        if let Some(f) = rec.forces {
            entries.extend_from_slice(&[f.drag, f.lift, f.drag_ex, f.lift_ey]);
        }
        if let Some(e) = rec.reference_error {
            entries.push(e);
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite diagnostics entry at t = {}",
                rec.t
            )));
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }
}

/// One straight boundary edge of the obstacle with its adjacent triangle.
/// `(nx, ny)` is the unit normal pointing out of the obstacle (into the
/// fluid); the tangent used for the drag projection is `(ny, −nx)`.
#[derive(Debug, Clone, Copy)]
struct ObstacleEdge {
    tri: usize,
    a: usize,
    b: usize,
    mid: usize,
    len: f64,
    nx: f64,
    ny: f64,
}

/// Cached observables for one space.
pub struct FlowProbes<'a> {
    sp: &'a TaylorHoodSpace,
    mass_u: Csr,
    mass_p: Csr,
    graddiv: Csr,
    obstacle: Option<Vec<ObstacleEdge>>,
}

impl<'a> FlowProbes<'a> {
    pub fn new(sp: &'a TaylorHoodSpace) -> FlowProbes<'a> {
        FlowProbes {
            sp,
            mass_u: assemble_mass(sp, FieldKind::Velocity),
            mass_p: assemble_mass(sp, FieldKind::Pressure),
            graddiv: assemble_graddiv(sp, 1.0),
            obstacle: detect_obstacle(sp),
        }
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        self.sp
    }

    pub fn has_obstacle(&self) -> bool {
        self.obstacle.is_some()
    }

    /// Total length of the obstacle polygon, if there is one.
    pub fn obstacle_perimeter(&self) -> Option<f64> {
        self.obstacle.as_ref().map(|edges| edges.iter().map(|e| e.len).sum())
    }

    /// All P2 nodes lying on the obstacle boundary (vertices and midpoints).
    pub fn obstacle_nodes(&self) -> Option<std::collections::BTreeSet<usize>> {
        self.obstacle.as_ref().map(|edges| {
            edges.iter().flat_map(|e| [e.a, e.b, e.mid]).collect()
        })
    }

    /// Squared L² norm of a velocity coefficient vector.
    pub fn kinetic_energy(&self, u: &[f64]) -> f64 {
        self.mass_u.quadratic_form(u, u)
    }

    pub fn velocity_norm(&self, u: &[f64]) -> f64 {
        self.kinetic_energy(u).max(0.0).sqrt()
    }

    pub fn pressure_norm(&self, p: &[f64]) -> f64 {
        self.mass_p.quadratic_form(p, p).max(0.0).sqrt()
    }

    /// `‖∇·u‖` via the grad-div quadratic form at unit penalty.
    pub fn divergence_norm(&self, u: &[f64]) -> f64 {
        self.graddiv.quadratic_form(u, u).max(0.0).sqrt()
    }

    /// L² norm of a field, weighted by the Gramian of its kind.
    pub fn l2_norm(&self, f: &Field) -> f64 {
        match f.kind {
            FieldKind::Velocity => self.velocity_norm(&f.coeffs),
            FieldKind::Pressure => self.pressure_norm(&f.coeffs),
        }
    }

    /// `‖test − reference‖ / ‖reference‖` in the Gramian norm of the kind.
    pub fn relative_error(&self, reference: &Field, test: &Field) -> Result<f64> {
        if reference.kind != test.kind || reference.coeffs.len() != test.coeffs.len() {
            return Err(Error::Dimension(
                "relative error requires two fields of one kind on one space".into(),
            ));
        }
        let denom = self.l2_norm(reference);
        if denom == 0.0 {
            return Err(Error::Invalid("relative error against a zero reference".into()));
        }
        let diff: Vec<f64> = reference
            .coeffs
            .iter()
            .zip(&test.coeffs)
            .map(|(r, t)| t - r)
            .collect();
        let num = match reference.kind {
            FieldKind::Velocity => self.velocity_norm(&diff),
            FieldKind::Pressure => self.pressure_norm(&diff),
        };
        Ok(num / denom)
    }

    /// Drag and lift coefficients `2/(U²L) ∮ ((2ν D(u) − p I)·n_C)·(t_C | n_C) ds`
    /// over the obstacle, plus the fixed-axis pair. Three-point Gauss per edge
    /// is exact: the traction of a P2–P1 pair is linear along a straight edge.
    pub fn drag_lift(
        &self,
        u: &Field,
        p: &Field,
        nu: f64,
        u_ref: f64,
        l_ref: f64,
    ) -> Result<ForceCoefficients> {
        if u.kind != FieldKind::Velocity || p.kind != FieldKind::Pressure {
            return Err(Error::Invalid("drag_lift expects a velocity and a pressure".into()));
        }
        if !(u_ref > 0.0) || !(l_ref > 0.0) {
            return Err(Error::Config(format!(
                "reference scales must be positive, got U = {u_ref}, L = {l_ref}"
            )));
        }
        let edges = self.obstacle.as_ref().ok_or_else(|| {
            Error::Invalid("no closed obstacle boundary found on this mesh".into())
        })?;
        self.forces_on(edges, &u.coeffs, &p.coeffs, nu, u_ref, l_ref)
    }

    fn forces_on(
        &self,
        edges: &[ObstacleEdge],
        u: &[f64],
        p: &[f64],
        nu: f64,
        u_ref: f64,
        l_ref: f64,
    ) -> Result<ForceCoefficients> {
        let verts = self.sp.mesh().vertices();
        let (mut drag, mut lift, mut drag_ex, mut lift_ey) = (0.0, 0.0, 0.0, 0.0);
        for e in edges {
            let (ax, ay) = verts[e.a];
            let (bx, by) = verts[e.b];
            for &(s, w) in EDGE_RULE.iter() {
                let q = (ax + s * (bx - ax), ay + s * (by - ay));
                let g = self.sp.velocity_gradient_at(e.tri, u, q);
                let pr = self.sp.pressure_at(e.tri, p, q);
                let d11 = g[0][0];
                let d22 = g[1][1];
                let d12 = 0.5 * (g[0][1] + g[1][0]);
                let tx = 2.0 * nu * (d11 * e.nx + d12 * e.ny) - pr * e.nx;
                let ty = 2.0 * nu * (d12 * e.nx + d22 * e.ny) - pr * e.ny;
                let ds = w * e.len;
                drag += ds * (tx * e.ny - ty * e.nx);
                lift += ds * (tx * e.nx + ty * e.ny);
                drag_ex += ds * tx;
                lift_ey += ds * ty;
            }
        }
        let scale = 2.0 / (u_ref * u_ref * l_ref);
        Ok(ForceCoefficients {
            drag: scale * drag,
            lift: scale * lift,
            drag_ex: scale * drag_ex,
            lift_ey: scale * lift_ey,
        })
    }

    /// One diagnostics row at time `t`, with forces when the mesh has an
    /// obstacle and a relative error when a reference velocity is given.
    pub fn record(
        &self,
        t: f64,
        u: &[f64],
        p: &[f64],
        nu: f64,
        reference: Option<&[f64]>,
    ) -> Result<DiagnosticsRecord> {
        let forces = match &self.obstacle {
            Some(edges) => {
                Some(self.forces_on(edges, u, p, nu, DEFAULT_U_REF, DEFAULT_L_REF)?)
            }
            None => None,
        };
        let reference_error = match reference {
            Some(r) => {
                let rf = Field::velocity(r.to_vec(), t);
                let tf = Field::velocity(u.to_vec(), t);
                Some(self.relative_error(&rf, &tf)?)
            }
            None => None,
        };
        Ok(DiagnosticsRecord {
            t,
            energy: self.kinetic_energy(u),
            pressure_norm: self.pressure_norm(p),
            divergence_norm: self.divergence_norm(u),
            forces,
            reference_error,
        })
    }
}

/// Interior closed loops of Walls-tagged boundary edges. Returns `None` when
/// the mesh has no such loop (or the interior Walls edges do not close).
fn detect_obstacle(sp: &TaylorHoodSpace) -> Option<Vec<ObstacleEdge>> {
    let mesh = sp.mesh();
    let verts = mesh.vertices();
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in verts {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let tol = 1e-9 * (xmax - xmin).max(ymax - ymin).max(1.0);
    let interior = |i: usize| {
        let (x, y) = verts[i];
        x > xmin + tol && x < xmax - tol && y > ymin + tol && y < ymax - tol
    };

    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (k, t) in mesh.triangles().iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            owner.insert((a.min(b), a.max(b)), k);
        }
    }

    let mut edges = Vec::new();
    for &([a, b], tag) in mesh.boundary_edges() {
        if tag != BoundaryTag::Walls || !interior(a) || !interior(b) {
            continue;
        }
        let tri = owner[&(a.min(b), a.max(b))];
        let (ax, ay) = verts[a];
        let (bx, by) = verts[b];
        let (dx, dy) = (bx - ax, by - ay);
        let len = dx.hypot(dy);
        // Boundary edges keep the triangle's traversal, so the fluid lies to
        // the left of a→b and the obstacle to the right.
        edges.push(ObstacleEdge {
            tri,
            a,
            b,
            mid: sp.edge_node(a, b),
            len,
            nx: -dy / len,
            ny: dx / len,
        });
    }
    if edges.is_empty() {
        return None;
    }
    let mut degree: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for e in &edges {
        degree.entry(e.a).or_insert((0, 0)).0 += 1;
        degree.entry(e.b).or_insert((0, 0)).1 += 1;
    }
    if degree.values().any(|&(out, inc)| out != 1 || inc != 1) {
        return None;
    }
    Some(edges)
}

/// Uniform-grid point locator over a space's triangles.
pub struct PointLocator<'a> {
    sp: &'a TaylorHoodSpace,
    x0: f64,
    y0: f64,
    inv_dx: f64,
    inv_dy: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<u32>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(sp: &'a TaylorHoodSpace) -> PointLocator<'a> {
        let mesh = sp.mesh();
        let verts = mesh.vertices();
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in verts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        let n = mesh.n_triangles().max(1);
        let nx = ((n as f64).sqrt().ceil() as usize).clamp(1, 256);
        let ny = nx;
        let width = (xmax - xmin).max(f64::MIN_POSITIVE);
        let height = (ymax - ymin).max(f64::MIN_POSITIVE);
        let mut bins = vec![Vec::new(); nx * ny];
        let clamp_idx = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        for (k, t) in mesh.triangles().iter().enumerate() {
            let xs = t.map(|v| verts[v].0);
            let ys = t.map(|v| verts[v].1);
            let (lo_x, hi_x) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            let (lo_y, hi_y) = (ys.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            let i0 = clamp_idx((lo_x - xmin) / width * nx as f64, nx);
            let i1 = clamp_idx((hi_x - xmin) / width * nx as f64, nx);
            let j0 = clamp_idx((lo_y - ymin) / height * ny as f64, ny);
            let j1 = clamp_idx((hi_y - ymin) / height * ny as f64, ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(k as u32);
                }
            }
        }
        PointLocator {
            sp,
            x0: xmin,
            y0: ymin,
            inv_dx: nx as f64 / width,
            inv_dy: ny as f64 / height,
            nx,
            ny,
            bins,
        }
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        self.sp
    }

    /// Triangle containing `p`, or `None` when the point lies outside the
    /// triangulation (beyond its boundary or inside a hole).
    pub fn locate(&self, p: (f64, f64)) -> Option<usize> {
        let clamp_idx = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        let i = clamp_idx((p.0 - self.x0) * self.inv_dx, self.nx);
        let j = clamp_idx((p.1 - self.y0) * self.inv_dy, self.ny);
        let verts = self.sp.mesh().vertices();
        for &k in &self.bins[j * self.nx + i] {
            let t = self.sp.mesh().triangles()[k as usize];
            let (c0, c1, c2) = (verts[t[0]], verts[t[1]], verts[t[2]]);
            let full = cross(c0, c1, c2);
            let l0 = cross(p, c1, c2) / full;
            let l1 = cross(c0, p, c2) / full;
            let l2 = cross(c0, c1, p) / full;
            if l0 >= -1e-10 && l1 >= -1e-10 && l2 >= -1e-10 {
                return Some(k as usize);
            }
        }
        None
    }

    /// Velocity magnitude sampled at `n_points` equispaced abscissae along
    /// `y = ordinate`, spanning the mesh bounding box. Points not covered by
    /// the triangulation report `None`.
    pub fn line_sample(
        &self,
        u: &Field,
        ordinate: f64,
        n_points: usize,
    ) -> Result<Vec<(f64, Option<f64>)>> {
        if u.kind != FieldKind::Velocity {
            return Err(Error::Invalid("line_sample expects a velocity field".into()));
        }
        if n_points == 0 {
            return Err(Error::Config("line_sample needs at least one point".into()));
        }
        let width = self.nx as f64 / self.inv_dx;
        let mut out = Vec::with_capacity(n_points);
        for i in 0..n_points {
            let frac = if n_points == 1 { 0.5 } else { i as f64 / (n_points - 1) as f64 };
            let x = self.x0 + frac * width;
            let sample = self.locate((x, ordinate)).map(|k| {
                let (vx, vy) = self.sp.velocity_at(k, &u.coeffs, (x, ordinate));
                vx.hypot(vy)
            });
            out.push((x, sample));
        }
        Ok(out)
    }
}

fn cross(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// L² projection of a field living on `source`'s space onto `target`:
/// assembles `∫ f φ` by quadrature on the target mesh, evaluating `f` through
/// point location on the source mesh, and solves with the target Gramian.
pub fn cross_mesh_project(
    source: &PointLocator<'_>,
    f: &Field,
    target: &TaylorHoodSpace,
) -> Result<Field> {
    let rule = tri_rule(5);
    let n = target.n_dofs(f.kind);
    let mut rhs = vec![0.0; n];
    let src = source.space();
    for k in 0..target.mesh().n_triangles() {
        let corners = target.mesh().triangle_corners(k);
        let area2 = cross(corners[0], corners[1], corners[2]);
        for &(xr, yr, wq) in rule {
            let q = (
                corners[0].0 + (corners[1].0 - corners[0].0) * xr + (corners[2].0 - corners[0].0) * yr,
                corners[0].1 + (corners[1].1 - corners[0].1) * xr + (corners[2].1 - corners[0].1) * yr,
            );
            let sk = source.locate(q).ok_or_else(|| {
                Error::Invalid(format!(
                    "projection point ({:.6}, {:.6}) lies outside the source mesh",
                    q.0, q.1
                ))
            })?;
            let w = wq * area2;
            let (r, s) = barycentric_to_ref(corners, q);
            match f.kind {
                FieldKind::Velocity => {
                    let (vx, vy) = src.velocity_at(sk, &f.coeffs, q);
                    let (phi, _) = crate::fem::basis::p2_basis(r, s);
                    let nodes = target.element_nodes(k);
                    for (l, &node) in nodes.iter().enumerate() {
                        rhs[2 * node] += w * vx * phi[l];
                        rhs[2 * node + 1] += w * vy * phi[l];
                    }
                }
                FieldKind::Pressure => {
                    let v = src.pressure_at(sk, &f.coeffs, q);
                    let phi = [1.0 - r - s, r, s];
                    let tri = target.mesh().triangles()[k];
                    for (l, &vtx) in tri.iter().enumerate() {
                        rhs[vtx] += w * v * phi[l];
                    }
                }
            }
        }
    }
    let mass = assemble_mass(target, f.kind);
    let lu = sparse_lu_factor(&mass)?;
    let coeffs = lu.solve(&rhs)?;
    Ok(Field { kind: f.kind, coeffs, time: f.time })
}

fn barycentric_to_ref(corners: [(f64, f64); 3], p: (f64, f64)) -> (f64, f64) {
    let full = cross(corners[0], corners[1], corners[2]);
    let l1 = cross(corners[0], p, corners[2]) / full;
    let l2 = cross(corners[0], corners[1], p) / full;
    (l1, l2)
}
