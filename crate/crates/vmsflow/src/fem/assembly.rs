//! Element-loop assembly of every variational form in the pipeline.
//!
//! Each assembler computes local blocks in parallel (deterministically
//! indexed by element) and scatters them sequentially in element order, so
//! the compressed result is bit-identical with and without the `parallel`
//! feature.

use crate::exec::map_indexed;
use crate::fem::basis::{p1_basis, p2_basis};
use crate::fem::quadrature::{RULE_DEG4, RULE_DEG5, RULE_DEG6};
use crate::fem::space::{FieldKind, TaylorHoodSpace};
use crate::numerics::sparse::{Coo, Csr};

/// Rows, columns, and a row-major dense block from one element.
struct LocalBlock {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

fn scatter(n_rows: usize, n_cols: usize, blocks: Vec<LocalBlock>) -> Csr {
    let nnz: usize = blocks.iter().map(|b| b.vals.len()).sum();
    let mut coo = Coo::with_capacity(n_rows, n_cols, nnz);
    for b in blocks {
        for (i, &r) in b.rows.iter().enumerate() {
            for (j, &c) in b.cols.iter().enumerate() {
                coo.push(r, c, b.vals[i * b.cols.len() + j]);
            }
        }
    }
    coo.to_csr()
}

/// φᵢ values of the active scalar basis at one quadrature point.
fn scalar_basis(kind: FieldKind, x: f64, y: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    match kind {
        FieldKind::Velocity => {
            let (v, g) = p2_basis(x, y);
            (v.to_vec(), g.to_vec())
        }
        FieldKind::Pressure => {
            let (v, g) = p1_basis(x, y);
            (v.to_vec(), g.to_vec())
        }
    }
}

fn scalar_dofs(sp: &TaylorHoodSpace, kind: FieldKind, k: usize) -> Vec<usize> {
    match kind {
        FieldKind::Velocity => sp.element_nodes(k).to_vec(),
        FieldKind::Pressure => sp.pressure_element_dofs(k).to_vec(),
    }
}

/// Expands a scalar-node block to both velocity components: dofs interleave
/// as (2·node, 2·node+1) and the block is component-diagonal.
fn vectorize(nodes: &[usize], scalar_block: &[f64]) -> LocalBlock {
    let n = nodes.len();
    let mut dofs = Vec::with_capacity(2 * n);
    for &node in nodes {
        dofs.push(2 * node);
        dofs.push(2 * node + 1);
    }
    let mut vals = vec![0.0; 4 * n * n];
    for i in 0..n {
        for j in 0..n {
            let v = scalar_block[i * n + j];
            vals[(2 * i) * 2 * n + 2 * j] = v;
            vals[(2 * i + 1) * 2 * n + 2 * j + 1] = v;
        }
    }
    LocalBlock { rows: dofs.clone(), cols: dofs, vals }
}

/// ∫ u·v (velocity: vector-valued, component-diagonal).
pub fn assemble_mass(sp: &TaylorHoodSpace, kind: FieldKind) -> Csr {
    let n = sp.n_dofs(kind);
    let blocks = map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let dofs = scalar_dofs(sp, kind, k);
        let m = dofs.len();
        let mut block = vec![0.0; m * m];
        for &(x, y, w) in &RULE_DEG5 {
            let (phi, _) = scalar_basis(kind, x, y);
            let wdet = w * map.det;
            for i in 0..m {
                for j in 0..m {
                    block[i * m + j] += wdet * (phi[i] * phi[j]);
                }
            }
        }
        match kind {
            FieldKind::Velocity => vectorize(&dofs, &block),
            FieldKind::Pressure => LocalBlock { rows: dofs.clone(), cols: dofs, vals: block },
        }
    });
    scatter(n, n, blocks)
}

/// ∫ ∇u : ∇v, uniformly weighted (`weight[k] = 1`) or with a per-element
/// coefficient such as an eddy viscosity.
fn stiffness_weighted(sp: &TaylorHoodSpace, kind: FieldKind, weight: Option<&[f64]>) -> Csr {
    let n = sp.n_dofs(kind);
    let blocks = map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let dofs = scalar_dofs(sp, kind, k);
        let m = dofs.len();
        let scale = weight.map_or(1.0, |w| w[k]);
        let mut block = vec![0.0; m * m];
        for &(x, y, w) in &RULE_DEG4 {
            let (_, gref) = scalar_basis(kind, x, y);
            let g: Vec<(f64, f64)> = gref.iter().map(|&gr| map.grad(gr)).collect();
            let wdet = w * map.det * scale;
            for i in 0..m {
                for j in 0..m {
                    block[i * m + j] += wdet * (g[i].0 * g[j].0 + g[i].1 * g[j].1);
                }
            }
        }
        match kind {
            FieldKind::Velocity => vectorize(&dofs, &block),
            FieldKind::Pressure => LocalBlock { rows: dofs.clone(), cols: dofs, vals: block },
        }
    });
    scatter(n, n, blocks)
}

pub fn assemble_stiffness(sp: &TaylorHoodSpace, kind: FieldKind) -> Csr {
    stiffness_weighted(sp, kind, None)
}

/// ∫ ν_T ∇u : ∇v with piecewise-constant ν_T.
pub fn assemble_eddy_diffusion(sp: &TaylorHoodSpace, nu_t: &[f64]) -> Csr {
    assert_eq!(nu_t.len(), sp.mesh().n_triangles());
    stiffness_weighted(sp, FieldKind::Velocity, Some(nu_t))
}

/// b(v, q) = ∫ q ∇·v as an n_p × n_u matrix.
pub fn assemble_divergence(sp: &TaylorHoodSpace) -> Csr {
    let blocks = map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let vdofs = sp.velocity_element_dofs(k);
        let pdofs = sp.pressure_element_dofs(k);
        let mut vals = vec![0.0; 3 * 12];
        for &(x, y, w) in &RULE_DEG4 {
            let (_, gref) = p2_basis(x, y);
            let (psi, _) = p1_basis(x, y);
            let wdet = w * map.det;
            for q in 0..3 {
                for b in 0..6 {
                    let g = map.grad(gref[b]);
                    vals[q * 12 + 2 * b] += wdet * psi[q] * g.0;
                    vals[q * 12 + 2 * b + 1] += wdet * psi[q] * g.1;
                }
            }
        }
        LocalBlock { rows: pdofs.to_vec(), cols: vdofs.to_vec(), vals }
    });
    scatter(sp.n_pressure_dofs(), sp.n_velocity_dofs(), blocks)
}

/// γ ∫ (∇·u)(∇·v).
pub fn assemble_graddiv(sp: &TaylorHoodSpace, gamma: f64) -> Csr {
    let n = sp.n_velocity_dofs();
    let blocks = map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let dofs = sp.velocity_element_dofs(k);
        let mut vals = vec![0.0; 12 * 12];
        for &(x, y, w) in &RULE_DEG4 {
            let (_, gref) = p2_basis(x, y);
            let g: Vec<(f64, f64)> = gref.iter().map(|&gr| map.grad(gr)).collect();
            let wdet = w * map.det * gamma;
            for a in 0..6 {
                let da = [g[a].0, g[a].1];
                for b in 0..6 {
                    let db = [g[b].0, g[b].1];
                    for alpha in 0..2 {
                        for beta in 0..2 {
                            vals[(2 * a + alpha) * 12 + 2 * b + beta] +=
                                wdet * (da[alpha] * db[beta]);
                        }
                    }
                }
            }
        }
        LocalBlock { rows: dofs.to_vec(), cols: dofs.to_vec(), vals }
    });
    scatter(n, n, blocks)
}

/// Velocity values and gradient of a coefficient vector at one reference
/// point of element `k`.
fn velocity_point_data(
    sp: &TaylorHoodSpace,
    k: usize,
    coeffs: &[f64],
    phi: &[f64; 6],
    grad: &[(f64, f64)],
) -> ([f64; 2], [[f64; 2]; 2]) {
    let nodes = sp.element_nodes(k);
    let mut val = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for (l, &node) in nodes.iter().enumerate() {
        for c in 0..2 {
            let u = coeffs[2 * node + c];
            val[c] += phi[l] * u;
            g[c][0] += grad[l].0 * u;
            g[c][1] += grad[l].1 * u;
        }
    }
    (val, g)
}

/// r with r·z = ĉ(w; u, z) = ½[c(w;u,z) − c(w;z,u)] for every interpolant z.
pub fn apply_convection(sp: &TaylorHoodSpace, w: &[f64], u: &[f64]) -> Vec<f64> {
    assert_eq!(w.len(), sp.n_velocity_dofs());
    assert_eq!(u.len(), sp.n_velocity_dofs());
    let locals = map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let mut vals = [0.0; 12];
        for &(x, y, wq) in &RULE_DEG6 {
            let (phi, gref) = p2_basis(x, y);
            let g: Vec<(f64, f64)> = gref.iter().map(|&gr| map.grad(gr)).collect();
            let (wv, _) = velocity_point_data(sp, k, w, &phi, &g);
            let (uv, ug) = velocity_point_data(sp, k, u, &phi, &g);
            let wdet = 0.5 * wq * map.det;
            for a in 0..6 {
                let w_dot_ga = wv[0] * g[a].0 + wv[1] * g[a].1;
                for alpha in 0..2 {
                    let w_dot_gu = wv[0] * ug[alpha][0] + wv[1] * ug[alpha][1];
                    vals[2 * a + alpha] += wdet * (w_dot_gu * phi[a] - w_dot_ga * uv[alpha]);
                }
            }
        }
        (sp.velocity_element_dofs(k), vals)
    });
    let mut out = vec![0.0; sp.n_velocity_dofs()];
    for (dofs, vals) in locals {
        for (l, &d) in dofs.iter().enumerate() {
            out[d] += vals[l];
        }
    }
    out
}

/// N(w) with N[i, j] = ĉ(w; φ_j, φ_i): the linearization of the convective
/// term in its transported argument.
pub fn assemble_convection_matrix(sp: &TaylorHoodSpace, w: &[f64]) -> Csr {
    assert_eq!(w.len(), sp.n_velocity_dofs());
    let n = sp.n_velocity_dofs();
    let blocks = map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let dofs = scalar_dofs(sp, FieldKind::Velocity, k);
        let mut block = vec![0.0; 36];
        for &(x, y, wq) in &RULE_DEG6 {
            let (phi, gref) = p2_basis(x, y);
            let g: Vec<(f64, f64)> = gref.iter().map(|&gr| map.grad(gr)).collect();
            let (wv, _) = velocity_point_data(sp, k, w, &phi, &g);
            let wdet = 0.5 * wq * map.det;
            let w_dot_g: Vec<f64> = g.iter().map(|gi| wv[0] * gi.0 + wv[1] * gi.1).collect();
            for a in 0..6 {
                for b in 0..6 {
                    block[a * 6 + b] += wdet * (w_dot_g[b] * phi[a] - w_dot_g[a] * phi[b]);
                }
            }
        }
        vectorize(&dofs, &block)
    });
    scatter(n, n, blocks)
}

/// N(w) + X(w): the full derivative of u ↦ ĉ(u; u, ·) at w, where X carries
/// the derivative with respect to the convecting argument,
/// X[(a,α),(b,β)] = ½ ∫ φ_b [(∂_β w_α) φ_a − (∂_β φ_a) w_α].
pub fn assemble_convection_jacobian(sp: &TaylorHoodSpace, w: &[f64]) -> Csr {
    assert_eq!(w.len(), sp.n_velocity_dofs());
    let n = sp.n_velocity_dofs();
    let blocks = map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let dofs = sp.velocity_element_dofs(k);
        let mut vals = vec![0.0; 12 * 12];
        for &(x, y, wq) in &RULE_DEG6 {
            let (phi, gref) = p2_basis(x, y);
            let g: Vec<(f64, f64)> = gref.iter().map(|&gr| map.grad(gr)).collect();
            let (wv, wg) = velocity_point_data(sp, k, w, &phi, &g);
            let wdet = 0.5 * wq * map.det;
            let w_dot_g: Vec<f64> = g.iter().map(|gi| wv[0] * gi.0 + wv[1] * gi.1).collect();
            for a in 0..6 {
                for b in 0..6 {
                    // Component-diagonal transported part.
                    let n_ab = wdet * (w_dot_g[b] * phi[a] - w_dot_g[a] * phi[b]);
                    for c in 0..2 {
                        vals[(2 * a + c) * 12 + 2 * b + c] += n_ab;
                    }
                    // Convecting part couples components.
                    let ga = [g[a].0, g[a].1];
                    for alpha in 0..2 {
                        for beta in 0..2 {
                            vals[(2 * a + alpha) * 12 + 2 * b + beta] += wdet
                                * phi[b]
                                * (wg[alpha][beta] * phi[a] - ga[beta] * wv[alpha]);
                        }
                    }
                }
            }
        }
        LocalBlock { rows: dofs.to_vec(), cols: dofs.to_vec(), vals }
    });
    scatter(n, n, blocks)
}

/// Raw trilinear form c(w; u, z) = ∫ (w·∇)u · z.
pub fn convection_form(sp: &TaylorHoodSpace, w: &[f64], u: &[f64], z: &[f64]) -> f64 {
    let terms = map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let mut s = 0.0;
        for &(x, y, wq) in &RULE_DEG6 {
            let (phi, gref) = p2_basis(x, y);
            let g: Vec<(f64, f64)> = gref.iter().map(|&gr| map.grad(gr)).collect();
            let (wv, _) = velocity_point_data(sp, k, w, &phi, &g);
            let (_, ug) = velocity_point_data(sp, k, u, &phi, &g);
            let (zv, _) = velocity_point_data(sp, k, z, &phi, &g);
            for alpha in 0..2 {
                s += wq * map.det * (wv[0] * ug[alpha][0] + wv[1] * ug[alpha][1]) * zv[alpha];
            }
        }
        s
    });
    terms.iter().sum()
}

/// Skew form ĉ(w; u, z) evaluated through [`apply_convection`].
pub fn skew_convection_form(sp: &TaylorHoodSpace, w: &[f64], u: &[f64], z: &[f64]) -> f64 {
    crate::numerics::dense::dot(&apply_convection(sp, w, u), z)
}

/// ν_T per element: c_s²·h_K²·‖mean ∇u‖_F. The mean gradient of a P2 field
/// is its centroid value.
pub fn eddy_viscosity(sp: &TaylorHoodSpace, u_small: &[f64], c_s: f64) -> Vec<f64> {
    assert_eq!(u_small.len(), sp.n_velocity_dofs());
    map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let (phi, gref) = p2_basis(1.0 / 3.0, 1.0 / 3.0);
        let g: Vec<(f64, f64)> = gref.iter().map(|&gr| map.grad(gr)).collect();
        let (_, ug) = velocity_point_data(sp, k, u_small, &phi, &g);
        let frob = (ug[0][0] * ug[0][0]
            + ug[0][1] * ug[0][1]
            + ug[1][0] * ug[1][0]
            + ug[1][1] * ug[1][1])
            .sqrt();
        let h = sp.mesh().element_diameters()[k];
        c_s * c_s * h * h * frob
    })
}

/// Nodal small-scale extractor Π̄ = I − I_h: vertex values drop out, midpoint
/// rows subtract the endpoint average. Sparse and local, so operators
/// composed with it stay sparse.
pub fn small_scale_interpolation(sp: &TaylorHoodSpace) -> Csr {
    let n = sp.n_velocity_dofs();
    let nv = sp.mesh().n_vertices();
    let mut coo = Coo::with_capacity(n, n, 3 * (sp.n_nodes() - nv) * 2);
    for node in nv..sp.n_nodes() {
        let [a, b] = edge_endpoints(sp, node - nv);
        for c in 0..2 {
            coo.push(2 * node + c, 2 * node + c, 1.0);
            coo.push(2 * node + c, 2 * a + c, -0.5);
            coo.push(2 * node + c, 2 * b + c, -0.5);
        }
    }
    coo.to_csr()
}

fn edge_endpoints(sp: &TaylorHoodSpace, edge: usize) -> [usize; 2] {
    // Edge nodes sit at midpoints; recover endpoints from any element that
    // carries the node.
    // The space stores edges in sorted order; reuse that directly.
    sp.edges()[edge]
}

/// a_s(u; ·, ·) = ∫ ν_T ∇Π̄u : ∇Π̄v assembled as Π̄ᵀ·A_{ν_T}·Π̄.
pub fn assemble_smagorinsky(sp: &TaylorHoodSpace, nu_t: &[f64], projector: &Csr) -> Csr {
    let a_nu = assemble_eddy_diffusion(sp, nu_t);
    projector.transpose().matmul(&a_nu).matmul(projector)
}

/// Full derivative of u ↦ a_s(u; u, ·): Π̄ᵀ(A_{ν_T} + D)Π̄ where D carries
/// the ν_T sensitivity, D[i, j] = Σ_K (c_s²h_K²/‖G_K‖)(G_K : Ḡ_j)·∫_K ∇s:∇φ_i
/// with s = Π̄u and G the centroid gradient.
pub fn assemble_smagorinsky_jacobian(
    sp: &TaylorHoodSpace,
    u: &[f64],
    c_s: f64,
    projector: &Csr,
) -> Csr {
    let s = projector.matvec(u);
    let nu_t = eddy_viscosity(sp, &s, c_s);
    let a_nu = assemble_eddy_diffusion(sp, &nu_t);

    let n = sp.n_velocity_dofs();
    let blocks = map_indexed(sp.mesh().n_triangles(), |k| {
        let map = sp.element_map(k);
        let dofs = sp.velocity_element_dofs(k);
        let h = sp.mesh().element_diameters()[k];

        let (phi_c, gref_c) = p2_basis(1.0 / 3.0, 1.0 / 3.0);
        let gc: Vec<(f64, f64)> = gref_c.iter().map(|&gr| map.grad(gr)).collect();
        let (_, big_g) = velocity_point_data(sp, k, &s, &phi_c, &gc);
        let norm_g = (big_g[0][0] * big_g[0][0]
            + big_g[0][1] * big_g[0][1]
            + big_g[1][0] * big_g[1][0]
            + big_g[1][1] * big_g[1][1])
            .sqrt();
        let mut vals = vec![0.0; 12 * 12];
        if norm_g > 0.0 {
            // g_vec[i] = ∫ ∇s : ∇φ_i (exact with the degree-4 rule).
            let mut g_vec = [0.0; 12];
            for &(x, y, w) in &RULE_DEG4 {
                let (phi, gref) = p2_basis(x, y);
                let g: Vec<(f64, f64)> = gref.iter().map(|&gr| map.grad(gr)).collect();
                let (_, sg) = velocity_point_data(sp, k, &s, &phi, &g);
                let wdet = w * map.det;
                for a in 0..6 {
                    for alpha in 0..2 {
                        g_vec[2 * a + alpha] +=
                            wdet * (sg[alpha][0] * g[a].0 + sg[alpha][1] * g[a].1);
                    }
                }
            }
            // d_vec[j] = c_s²h²·(G : Ḡ_j)/‖G‖.
            let scale = c_s * c_s * h * h / norm_g;
            let mut d_vec = [0.0; 12];
            for b in 0..6 {
                for beta in 0..2 {
                    d_vec[2 * b + beta] =
                        scale * (big_g[beta][0] * gc[b].0 + big_g[beta][1] * gc[b].1);
                }
            }
            for i in 0..12 {
                for j in 0..12 {
                    vals[i * 12 + j] = g_vec[i] * d_vec[j];
                }
            }
        }
        LocalBlock { rows: dofs.to_vec(), cols: dofs.to_vec(), vals }
    });
    let d = scatter(n, n, blocks);
    let inner = Csr::linear_combination(&[(1.0, &a_nu), (1.0, &d)]);
    projector.transpose().matmul(&inner).matmul(projector)
}
