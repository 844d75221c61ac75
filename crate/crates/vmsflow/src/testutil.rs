//! Independent oracles shared by unit tests.
//!
//! Everything here deliberately avoids the production code paths it is used
//! to check: dense Gaussian elimination instead of the sparse factorization,
//! cyclic Jacobi rotations instead of the library eigensolver, and a collapsed
//! tensor-product Gauss rule instead of the hardcoded symmetric triangle
//! rules.

/// Solves `a x = b` by dense Gaussian elimination with partial pivoting.
/// `a` is row-major n x n. Panics on zero pivot (oracle inputs are chosen
/// nonsingular).
pub fn dense_solve_ge(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let mut piv = k;
        for r in k + 1..n {
            if m[r * n + k].abs() > m[piv * n + k].abs() {
                piv = r;
            }
        }
        assert!(m[piv * n + k].abs() > 0.0, "oracle hit a zero pivot at column {k}");
        if piv != k {
            for c in 0..n {
                m.swap(k * n + c, piv * n + c);
            }
            x.swap(k, piv);
        }
        for r in k + 1..n {
            let f = m[r * n + k] / m[k * n + k];
            if f != 0.0 {
                for c in k..n {
                    m[r * n + c] -= f * m[k * n + c];
                }
                x[r] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in k + 1..n {
            s -= m[k * n + c] * x[c];
        }
        x[k] = s / m[k * n + k];
    }
    x
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns), sorted descending.
/// `a` is row-major n x n, assumed symmetric.
pub fn jacobi_eig(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frob(&m, n)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].partial_cmp(&m[i * n + i]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (newc, &oldc) in order.iter().enumerate() {
        for r in 0..n {
            vecs[r * n + newc] = v[r * n + oldc];
        }
    }
    (vals, vecs)
}

fn frob(a: &[f64], n: usize) -> f64 {
    a.iter().take(n * n).map(|x| x * x).sum::<f64>().sqrt()
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    // Newton iteration on P_n over [-1, 1], then affine map to [0, 1].
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature points `(x, y, w)` on the reference triangle {x,y >= 0, x+y <= 1}
/// exact for total degree `deg`, built by collapsing a tensor Gauss rule
/// through the Duffy map (x, y) = (u, v(1-u)). Weights sum to 1/2.
pub fn duffy_rule(deg: usize) -> Vec<(f64, f64, f64)> {
    let n = deg / 2 + 2;
    let g = gauss_legendre_01(n);
    let mut pts = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            pts.push((u, v * (1.0 - u), wu * wv * (1.0 - u)));
        }
    }
    pts
}

/// Integrates `f` over the reference triangle with a rule exact to `deg`.
pub fn integrate_ref_triangle(deg: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    duffy_rule(deg).iter().map(|&(x, y, w)| w * f(x, y)).sum()
}

/// Deterministic test RNG.
pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample in [-1, 1].
pub fn unit(r: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand::Rng;
    r.random_range(-1.0..1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_monomials() {
        // n-point Gauss is exact to degree 2n-1 on [0,1].
        for n in 1..8 {
            let g = gauss_legendre_01(n);
            for d in 0..(2 * n) {
                let got: f64 = g.iter().map(|&(x, w)| w * x.powi(d as i32)).sum();
                let want = 1.0 / (d as f64 + 1.0);
                assert!(
                    (got - want).abs() < 1e-13,
                    "n={n} degree={d}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn duffy_rule_matches_exact_triangle_moments() {
        // Exact value of int x^a y^b over the reference triangle: a! b! / (a+b+2)!.
        let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>().max(1.0);
        for deg in [2usize, 4, 5, 6, 10] {
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let got = integrate_ref_triangle(deg, |x, y| x.powi(a as i32) * y.powi(b as i32));
                    let want = fact(a) * fact(b) / fact(a + b + 2);
                    assert!(
                        (got - want).abs() < 1e-14 * (1.0 + want.abs()),
                        "deg={deg} monomial x^{a} y^{b}: got {got}, want {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(5, 2, -1) conjugated by a rotation keeps its eigenvalues.
        let c = 0.8_f64;
        let s = 0.6_f64;
        // Q = rotation in the (0,1) plane; A = Q D Q^T.
        let d = [5.0, 2.0, -1.0];
        let q = [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0];
        let mut a = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    a[i * 3 + j] += q[i * 3 + k] * d[k] * q[j * 3 + k];
                }
            }
        }
        let (vals, vecs) = jacobi_eig(&a, 3);
        assert!((vals[0] - 5.0).abs() < 1e-12, "largest eigenvalue: {}", vals[0]);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] + 1.0).abs() < 1e-12);
        // Residual check A v = lambda v.
        for j in 0..3 {
            for i in 0..3 {
                let av: f64 = (0..3).map(|k| a[i * 3 + k] * vecs[k * 3 + j]).sum();
                assert!(
                    (av - vals[j] * vecs[i * 3 + j]).abs() < 1e-12,
                    "eigenpair {j} residual row {i}"
                );
            }
        }
    }

    #[test]
    fn gaussian_elimination_solves_hilbert_like_system() {
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 1.0 } else { 0.0 };
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64) - 2.5).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i] += a[i * n + j] * x_true[j];
            }
        }
        let x = dense_solve_ge(&a, &b, n);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-12, "component {i}: {} vs {}", x[i], x_true[i]);
        }
    }
}
