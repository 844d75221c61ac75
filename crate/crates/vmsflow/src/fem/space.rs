//! Taylor–Hood P2–P1 spaces over a triangulation, plus the fields and
//! boundary-data closures that live on them.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::fem::basis::{p1_basis, p2_basis, ElementMap};
use crate::mesh::{BoundaryTag, Mesh};

/// Velocity (P2, two components per node) or pressure (P1, one per vertex).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Velocity,
    Pressure,
}

/// Coefficient vector over a space, stamped with its simulation time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub kind: FieldKind,
    pub coeffs: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn velocity(coeffs: Vec<f64>, time: f64) -> Field {
        Field { kind: FieldKind::Velocity, coeffs, time }
    }

    pub fn pressure(coeffs: Vec<f64>, time: f64) -> Field {
        Field { kind: FieldKind::Pressure, coeffs, time }
    }
}

/// P2 vector velocity + P1 scalar pressure over one mesh.
///
/// Velocity nodes are the mesh vertices followed by one node per edge, with
/// edges numbered in sorted `(min, max)` vertex order; a node carries the two
/// dofs `2·node` (x) and `2·node + 1` (y). Pressure dofs coincide with vertex
/// indices.
#[derive(Debug)]
pub struct TaylorHoodSpace {
    mesh: Mesh,
    edges: Vec<[usize; 2]>,
    edge_of: BTreeMap<(usize, usize), usize>,
    node_coords: Vec<(f64, f64)>,
    dirichlet_nodes: BTreeMap<usize, BoundaryTag>,
}

impl TaylorHoodSpace {
    pub fn new(mesh: Mesh) -> TaylorHoodSpace {
        let mut edge_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in mesh.triangles() {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                edge_of.insert((a.min(b), a.max(b)), 0);
            }
        }
        let mut edges = Vec::with_capacity(edge_of.len());
        for (i, (&(a, b), slot)) in edge_of.iter_mut().enumerate() {
            *slot = i;
            edges.push([a, b]);
        }

        let nv = mesh.n_vertices();
        let mut node_coords = Vec::with_capacity(nv + edges.len());
        node_coords.extend_from_slice(mesh.vertices());
        for &[a, b] in &edges {
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            node_coords.push((0.5 * (pa.0 + pb.0), 0.5 * (pa.1 + pb.1)));
        }

        // Walls take precedence over Inlet at shared corners; Outflow
        // contributes no Dirichlet nodes.
        let mut dirichlet_nodes: BTreeMap<usize, BoundaryTag> = BTreeMap::new();
        for &([a, b], tag) in mesh.boundary_edges() {
            if tag == BoundaryTag::Outflow {
                continue;
            }
            let mid = nv + edge_of[&(a.min(b), a.max(b))];
            for node in [a, b, mid] {
                match dirichlet_nodes.get(&node) {
                    Some(BoundaryTag::Walls) => {}
                    _ => {
                        dirichlet_nodes.insert(node, tag);
                    }
                }
            }
        }

        TaylorHoodSpace { mesh, edges, edge_of, node_coords, dirichlet_nodes }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_velocity_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn n_dofs(&self, kind: FieldKind) -> usize {
        match kind {
            FieldKind::Velocity => self.n_velocity_dofs(),
            FieldKind::Pressure => self.n_pressure_dofs(),
        }
    }

    /// Coordinates of every velocity node (vertices, then edge midpoints).
    pub fn node_coords(&self) -> &[(f64, f64)] {
        &self.node_coords
    }

    pub fn velocity_dof(node: usize, component: usize) -> usize {
        2 * node + component
    }

    pub fn edge_node(&self, a: usize, b: usize) -> usize {
        self.mesh.n_vertices() + self.edge_of[&(a.min(b), a.max(b))]
    }

    /// Endpoint vertices of each P2 edge node, indexed by `node − n_vertices`.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// The six P2 nodes of a triangle in reference order.
    pub fn element_nodes(&self, k: usize) -> [usize; 6] {
        let [a, b, c] = self.mesh.triangles()[k];
        [a, b, c, self.edge_node(a, b), self.edge_node(b, c), self.edge_node(c, a)]
    }

    /// The twelve velocity dofs of a triangle (node-major, x before y).
    pub fn velocity_element_dofs(&self, k: usize) -> [usize; 12] {
        let nodes = self.element_nodes(k);
        let mut out = [0usize; 12];
        for (l, &n) in nodes.iter().enumerate() {
            out[2 * l] = 2 * n;
            out[2 * l + 1] = 2 * n + 1;
        }
        out
    }

    pub fn pressure_element_dofs(&self, k: usize) -> [usize; 3] {
        self.mesh.triangles()[k]
    }

    /// Velocity nodes on Γ_D with the tag that claimed them.
    pub fn dirichlet_nodes(&self) -> &BTreeMap<usize, BoundaryTag> {
        &self.dirichlet_nodes
    }

    /// Both velocity dofs of every Dirichlet node.
    pub fn dirichlet_velocity_dofs(&self) -> BTreeSet<usize> {
        self.dirichlet_nodes
            .keys()
            .flat_map(|&n| [2 * n, 2 * n + 1])
            .collect()
    }

    pub(crate) fn element_map(&self, k: usize) -> ElementMap {
        ElementMap::new(self.mesh.triangle_corners(k))
    }

    /// Nodal interpolant of a velocity function.
    pub fn interpolate_velocity(&self, f: impl Fn((f64, f64)) -> (f64, f64)) -> Vec<f64> {
        let mut out = vec![0.0; self.n_velocity_dofs()];
        for (n, &p) in self.node_coords.iter().enumerate() {
            let (vx, vy) = f(p);
            out[2 * n] = vx;
            out[2 * n + 1] = vy;
        }
        out
    }

    /// Nodal interpolant of a pressure function.
    pub fn interpolate_pressure(&self, f: impl Fn((f64, f64)) -> f64) -> Vec<f64> {
        self.mesh.vertices().iter().map(|&p| f(p)).collect()
    }

    /// Velocity value at a physical point known to lie in element `k`.
    pub fn velocity_at(&self, k: usize, coeffs: &[f64], p: (f64, f64)) -> (f64, f64) {
        let map = self.element_map(k);
        let (x, y) = map.to_reference(p);
        let (v, _) = p2_basis(x, y);
        let nodes = self.element_nodes(k);
        let mut out = (0.0, 0.0);
        for (l, &n) in nodes.iter().enumerate() {
            out.0 += v[l] * coeffs[2 * n];
            out.1 += v[l] * coeffs[2 * n + 1];
        }
        out
    }

    /// Velocity gradient `[∂ⱼ uᵢ]` at a physical point in element `k`.
    pub fn velocity_gradient_at(&self, k: usize, coeffs: &[f64], p: (f64, f64)) -> [[f64; 2]; 2] {
        let map = self.element_map(k);
        let (x, y) = map.to_reference(p);
        let (_, g) = p2_basis(x, y);
        let nodes = self.element_nodes(k);
        let mut out = [[0.0; 2]; 2];
        for (l, &n) in nodes.iter().enumerate() {
            let gp = map.grad(g[l]);
            out[0][0] += gp.0 * coeffs[2 * n];
            out[0][1] += gp.1 * coeffs[2 * n];
            out[1][0] += gp.0 * coeffs[2 * n + 1];
            out[1][1] += gp.1 * coeffs[2 * n + 1];
        }
        out
    }

    pub fn pressure_at(&self, k: usize, coeffs: &[f64], p: (f64, f64)) -> f64 {
        let map = self.element_map(k);
        let (x, y) = map.to_reference(p);
        let (v, _) = p1_basis(x, y);
        let t = self.mesh.triangles()[k];
        (0..3).map(|l| v[l] * coeffs[t[l]]).sum()
    }
}

type BcFn = dyn Fn((f64, f64), f64, BoundaryTag) -> (f64, f64) + Send + Sync;

/// Dirichlet velocity data: position, time, and owning tag to components.
#[derive(Clone)]
pub struct BcSpec {
    f: Arc<BcFn>,
}

impl BcSpec {
    pub fn new(
        f: impl Fn((f64, f64), f64, BoundaryTag) -> (f64, f64) + Send + Sync + 'static,
    ) -> BcSpec {
        BcSpec { f: Arc::new(f) }
    }

    pub fn zero() -> BcSpec {
        BcSpec::new(|_, _, _| (0.0, 0.0))
    }

    /// Steady parabolic inlet `6/H²·y(H−y)` (unit mean, peak 1.5), no-slip
    /// walls.
    pub fn channel_inflow(height: f64) -> BcSpec {
        BcSpec::new(move |(_, y), _, tag| match tag {
            BoundaryTag::Inlet => (6.0 / (height * height) * y * (height - y), 0.0),
            _ => (0.0, 0.0),
        })
    }

    /// Driven lid on the top wall with linear ramps of width `ramp` at both
    /// ends (wall-compatible corners), `speed` on the plateau; every other
    /// wall is no-slip.
    pub fn cavity_lid(side: f64, ramp: f64, speed: f64) -> BcSpec {
        BcSpec::new(move |(x, y), _, _| {
            if (y - side).abs() < 1e-12 * side {
                let profile = if x < ramp {
                    x / ramp
                } else if x > side - ramp {
                    (side - x) / ramp
                } else {
                    1.0
                };
                (speed * profile.max(0.0), 0.0)
            } else {
                (0.0, 0.0)
            }
        })
    }

    pub fn eval(&self, p: (f64, f64), t: f64, tag: BoundaryTag) -> (f64, f64) {
        (self.f)(p, t, tag)
    }
}

impl std::fmt::Debug for BcSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BcSpec(..)")
    }
}
