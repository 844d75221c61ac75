//! Lagrange bases on the reference triangle and the affine element map.
//!
//! Barycentrics: λ₀ = 1 − x − y, λ₁ = x, λ₂ = y. P2 nodes are the three
//! vertices followed by the midpoints of edges (0,1), (1,2), (2,0).

/// P2 values and reference gradients at a reference point.
pub(crate) fn p2_basis(x: f64, y: f64) -> ([f64; 6], [(f64, f64); 6]) {
    let l = [1.0 - x - y, x, y];
    let dl = [(-1.0, -1.0), (1.0, 0.0), (0.0, 1.0)];
    let mut v = [0.0; 6];
    let mut g = [(0.0, 0.0); 6];
    for i in 0..3 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
        g[i] = ((4.0 * l[i] - 1.0) * dl[i].0, (4.0 * l[i] - 1.0) * dl[i].1);
    }
    for (slot, (i, j)) in [(0usize, 1usize), (1, 2), (2, 0)].iter().enumerate() {
        v[3 + slot] = 4.0 * l[*i] * l[*j];
        g[3 + slot] = (
            4.0 * (l[*i] * dl[*j].0 + l[*j] * dl[*i].0),
            4.0 * (l[*i] * dl[*j].1 + l[*j] * dl[*i].1),
        );
    }
    (v, g)
}

/// P1 values and (constant) reference gradients.
pub(crate) fn p1_basis(x: f64, y: f64) -> ([f64; 3], [(f64, f64); 3]) {
    ([1.0 - x - y, x, y], [(-1.0, -1.0), (1.0, 0.0), (0.0, 1.0)])
}

/// Affine map data of one triangle.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ElementMap {
    pub origin: (f64, f64),
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    inv_t: [[f64; 2]; 2],
}

impl ElementMap {
    pub fn new(corners: [(f64, f64); 3]) -> ElementMap {
        let jac = [
            [corners[1].0 - corners[0].0, corners[2].0 - corners[0].0],
            [corners[1].1 - corners[0].1, corners[2].1 - corners[0].1],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        ElementMap { origin: corners[0], jac, det, inv_t }
    }

    /// Physical gradient from a reference gradient.
    pub fn grad(&self, g: (f64, f64)) -> (f64, f64) {
        (
            self.inv_t[0][0] * g.0 + self.inv_t[0][1] * g.1,
            self.inv_t[1][0] * g.0 + self.inv_t[1][1] * g.1,
        )
    }

    #[allow(dead_code)] // inverse of `to_reference`; exercised by the round-trip tests
    pub fn to_physical(self, p: (f64, f64)) -> (f64, f64) {
        (
            self.origin.0 + self.jac[0][0] * p.0 + self.jac[0][1] * p.1,
            self.origin.1 + self.jac[1][0] * p.0 + self.jac[1][1] * p.1,
        )
    }

    pub fn to_reference(self, p: (f64, f64)) -> (f64, f64) {
        let (dx, dy) = (p.0 - self.origin.0, p.1 - self.origin.1);
        (
            (self.jac[1][1] * dx - self.jac[0][1] * dy) / self.det,
            (-self.jac[1][0] * dx + self.jac[0][0] * dy) / self.det,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_is_nodal() {
        let nodes = [
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (0.5, 0.0),
            (0.5, 0.5),
            (0.0, 0.5),
        ];
        for (i, &(x, y)) in nodes.iter().enumerate() {
            let (v, _) = p2_basis(x, y);
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v[j] - want).abs() < 1e-15, "φ_{j} at node {i}: {}", v[j]);
            }
        }
    }

    #[test]
    fn bases_sum_to_one_with_zero_gradient() {
        for &(x, y) in &[(0.3, 0.2), (0.1, 0.85), (0.33, 0.33)] {
            let (v2, g2) = p2_basis(x, y);
            assert!((v2.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let gx: f64 = g2.iter().map(|g| g.0).sum();
            let gy: f64 = g2.iter().map(|g| g.1).sum();
            assert!(gx.abs() < 1e-14 && gy.abs() < 1e-14);
            let (v1, _) = p1_basis(x, y);
            assert!((v1.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn p2_gradients_match_finite_differences() {
        let h = 1e-6;
        for &(x, y) in &[(0.25, 0.3), (0.6, 0.2)] {
            let (_, g) = p2_basis(x, y);
            for j in 0..6 {
                let (vx1, _) = p2_basis(x + h, y);
                let (vx0, _) = p2_basis(x - h, y);
                let (vy1, _) = p2_basis(x, y + h);
                let (vy0, _) = p2_basis(x, y - h);
                assert!(((vx1[j] - vx0[j]) / (2.0 * h) - g[j].0).abs() < 1e-8);
                assert!(((vy1[j] - vy0[j]) / (2.0 * h) - g[j].1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn element_map_round_trips_and_scales_gradients() {
        let corners = [(1.0, 2.0), (3.0, 2.5), (1.5, 4.0)];
        let map = ElementMap::new(corners);
        assert!(map.det > 0.0);
        for &p in &[(0.2, 0.3), (0.0, 0.0), (0.5, 0.5)] {
            let q = map.to_reference(map.to_physical(p));
            assert!((q.0 - p.0).abs() < 1e-14 && (q.1 - p.1).abs() < 1e-14);
        }
        // A linear function x ↦ 2x + 3y has physical gradient (2, 3); pull it
        // back through the map and push it forward again.
        let ref_grad = (
            2.0 * map.jac[0][0] + 3.0 * map.jac[1][0],
            2.0 * map.jac[0][1] + 3.0 * map.jac[1][1],
        );
        let g = map.grad(ref_grad);
        assert!((g.0 - 2.0).abs() < 1e-14 && (g.1 - 3.0).abs() < 1e-14);
    }
}
